#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "speccompact/datamodel.hpp"
#include "speccompact/guardband.hpp"

namespace speccompact {

inline constexpr std::uint64_t kDefaultCellLimit = 1'000'000;

/// Axis-aligned grid over normalized spec values. Cells are half-open
/// [lo, hi) per dim with the last bin closed; points outside the bounds clamp
/// to the nearest edge cell.
struct GridSpec {
  std::vector<std::string> dims;
  std::vector<std::size_t> bins_per_dim;
  std::vector<std::pair<double, double>> bounds_per_dim;
  std::uint64_t cell_limit = kDefaultCellLimit;

  static GridSpec uniform(std::vector<std::string> dims, std::size_t bins, double lo = -0.25,
                          double hi = 1.25, std::uint64_t cell_limit = kDefaultCellLimit);

  std::size_t rank() const noexcept { return dims.size(); }
  /// Product of bins, saturating at UINT64_MAX.
  std::uint64_t cell_count() const noexcept;
  /// Throws InvalidConfig for malformed dims and CellLimitExceeded over budget.
  void validate() const;

  std::size_t bin_of(std::size_t dim, double v) const noexcept;
  std::uint64_t cell_of(std::span<const double> x) const;
  std::vector<double> cell_center(std::uint64_t cell) const;

  // Geometry only; the cell budget is a construction setting.
  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.dims == b.dims && a.bins_per_dim == b.bins_per_dim &&
           a.bounds_per_dim == b.bounds_per_dim;
  }
};

struct LookupTable {
  GridSpec grid;
  std::vector<TriState> attributes;  // row-major, last dim fastest

  friend bool operator==(const LookupTable&, const LookupTable&) = default;
};

/// Replaces the instances of every pure cell (single label) by one instance
/// at the cell center carrying that label; mixed cells keep all instances.
/// The result is projected onto the grid dims.
std::pair<Dataset, LabelVector> compact_training_data(const Dataset& normalized,
                                                      const LabelVector& labels,
                                                      const GridSpec& grid);

/// Same operation on bare features/labels (feature columns = grid dims).
std::pair<FeatureMatrix, std::vector<Label>> compact_features(const FeatureMatrix& x,
                                                              std::span<const Label> labels,
                                                              const GridSpec& grid);

LookupTable build_lookup_table(const GuardBandModel& gb, const GridSpec& grid);
TriState lut_classify(const LookupTable& lut, std::span<const double> x);

void write_lut(std::ostream& out, const LookupTable& lut);
LookupTable read_lut(std::istream& in);
void save_lut(const std::filesystem::path& path, const LookupTable& lut);
LookupTable load_lut(const std::filesystem::path& path);

}  // namespace speccompact
