#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "speccompact/features.hpp"

namespace speccompact {

/// One specification s_i: a measured quantity with a closed acceptability
/// range [range_lo, range_hi] and a per-application test cost.
struct SpecificationDef {
  std::string name;
  std::string unit;
  double nominal = 0.0;
  double range_lo = 0.0;
  double range_hi = 1.0;
  double test_cost = 1.0;

  double width() const noexcept { return range_hi - range_lo; }
  double normalize(double v) const noexcept { return (v - range_lo) / width(); }
  double denormalize(double u) const noexcept { return range_lo + u * width(); }
  bool in_range(double v) const noexcept { return v >= range_lo && v <= range_hi; }

  friend bool operator==(const SpecificationDef&, const SpecificationDef&) = default;
};

// Throws InvalidSpec on an empty/whitespace name, lo >= hi, a nominal outside
// the range, a negative cost, or duplicate names.
void validate_spec_set(std::span<const SpecificationDef> specs);

struct DeviceRecord {
  std::string id;
  std::vector<double> values;

  friend bool operator==(const DeviceRecord&, const DeviceRecord&) = default;
};

/// A device population over an ordered specification set. Immutable once
/// constructed; the constructor validates every record against the specs.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<SpecificationDef> specs, std::vector<DeviceRecord> records,
          bool normalized = false);

  const std::vector<SpecificationDef>& specs() const noexcept { return specs_; }
  const std::vector<DeviceRecord>& records() const noexcept { return records_; }
  bool normalized() const noexcept { return normalized_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::vector<std::string> spec_names() const;
  /// Index of a spec column; throws UnknownSpecName.
  std::size_t spec_index(const std::string& name) const;
  const SpecificationDef& spec(const std::string& name) const { return specs_[spec_index(name)]; }

  /// Feature rows made of the named columns, in the given order.
  FeatureMatrix features(std::span<const std::string> names) const;
  /// Records at the given positions, in that order.
  Dataset select(std::span<const std::size_t> indices) const;
  /// First n records.
  Dataset head(std::size_t n) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::vector<SpecificationDef> specs_;
  std::vector<DeviceRecord> records_;
  bool normalized_ = false;
};

struct LabelVector {
  std::vector<std::string> subset;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t count(Label l) const;
  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

// Spec-set JSON: array of {name, unit, nominal, lo, hi, cost?}.
std::vector<SpecificationDef> load_spec_set(const std::filesystem::path& path);
std::vector<SpecificationDef> parse_spec_set(const std::string& json_text);
void save_spec_set(const std::filesystem::path& path, std::span<const SpecificationDef> specs);
std::string spec_set_to_json(std::span<const SpecificationDef> specs);

// Dataset CSV: header `id,<spec1>,...` in spec order, one record per row.
Dataset load_dataset(const std::filesystem::path& path, std::vector<SpecificationDef> specs);
Dataset parse_dataset(std::istream& in, std::vector<SpecificationDef> specs);
void save_dataset(const std::filesystem::path& path, const Dataset& ds);
void write_dataset(std::ostream& out, const Dataset& ds);
/// Column names after the id column of a dataset CSV.
std::vector<std::string> read_dataset_header(const std::filesystem::path& path);

/// Maps each value v of spec i to (v - lo_i) / (hi_i - lo_i). Values outside
/// the range land outside [0, 1] and are kept as-is.
Dataset normalize(const Dataset& ds);
Dataset denormalize(const Dataset& ds);

/// Pass iff every value in `subset` lies in its (closed) range. For a
/// normalized dataset the range is [0, 1]. `margin` widens (> 0) or shrinks
/// (< 0) every range on both sides by that fraction of its width.
LabelVector label_pass_fail(const Dataset& ds, std::span<const std::string> subset,
                            double margin = 0.0);

/// Seeded partition into (first, second) with round(fraction * n) records in
/// the first part. Relative record order is preserved within each part.
std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed);

double yield(const LabelVector& labels);

}  // namespace speccompact
