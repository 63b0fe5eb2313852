#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace speccompact {

enum class Label : int { Fail = -1, Pass = 1 };

constexpr int to_sign(Label l) noexcept { return static_cast<int>(l); }
constexpr Label from_sign(double v) noexcept { return v >= 0.0 ? Label::Pass : Label::Fail; }

// Dense row-major matrix of feature vectors, one row per instance.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t dim) : dim_(dim) {}
  FeatureMatrix(std::size_t dim, std::vector<double> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return dim_ == 0 ? rows_ : values_.size() / dim_; }
  bool empty() const noexcept { return rows() == 0; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const double> values() const noexcept { return values_; }

  void push_back(std::span<const double> row);
  void reserve(std::size_t rows) { values_.reserve(rows * dim_); }

 private:
  std::size_t dim_ = 0;
  std::size_t rows_ = 0;  // only meaningful for zero-dimensional matrices
  std::vector<double> values_;
};

}  // namespace speccompact
