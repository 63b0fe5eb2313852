#include "speccompact/features.hpp"

#include "speccompact/error.hpp"

namespace speccompact {

FeatureMatrix::FeatureMatrix(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 ? !values_.empty() : values_.size() % dim_ != 0) {
    throw Error(ErrorCode::DimensionMismatch, "feature buffer is not a whole number of rows");
  }
}

void FeatureMatrix::push_back(std::span<const double> row) {
  if (row.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) +
                                                  " values, matrix dimension is " +
                                                  std::to_string(dim_));
  }
  values_.insert(values_.end(), row.begin(), row.end());
  ++rows_;
}

}  // namespace speccompact
