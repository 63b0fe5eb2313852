#include "speccompact/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "speccompact/error.hpp"

namespace speccompact {

GridSpec GridSpec::uniform(std::vector<std::string> dims, std::size_t bins, double lo, double hi,
                           std::uint64_t cell_limit) {
  GridSpec g;
  g.bins_per_dim.assign(dims.size(), bins);
  g.bounds_per_dim.assign(dims.size(), {lo, hi});
  g.dims = std::move(dims);
  g.cell_limit = cell_limit;
  return g;
}

std::uint64_t GridSpec::cell_count() const noexcept {
  std::uint64_t total = 1;
  for (auto b : bins_per_dim) {
    if (b != 0 && total > std::numeric_limits<std::uint64_t>::max() / b) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= b;
  }
  return total;
}

void GridSpec::validate() const {
  if (dims.empty()) throw Error(ErrorCode::InvalidConfig, "grid has no dimensions");
  if (bins_per_dim.size() != dims.size() || bounds_per_dim.size() != dims.size()) {
    throw Error(ErrorCode::InvalidConfig, "grid bins/bounds do not match its dims");
  }
  for (std::size_t d = 0; d < dims.size(); ++d) {
    if (bins_per_dim[d] < 1) throw Error(ErrorCode::InvalidConfig, dims[d] + ": bins must be >= 1");
    if (!(bounds_per_dim[d].first < bounds_per_dim[d].second)) {
      throw Error(ErrorCode::InvalidConfig, dims[d] + ": grid bound lo must be < hi");
    }
  }
  // A saturated count would alias cell indices, whatever the budget says.
  if (cell_count() > cell_limit || cell_count() == std::numeric_limits<std::uint64_t>::max()) {
    // Report the exact product even when it overflows 64 bits.
    long double exact = 1.0L;
    for (auto b : bins_per_dim) exact *= static_cast<long double>(b);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3Lg", exact);
    throw Error(ErrorCode::CellLimitExceeded, std::string(buf) + " cells exceed the budget of " +
                                                  std::to_string(cell_limit));
  }
}

std::size_t GridSpec::bin_of(std::size_t d, double v) const noexcept {
  const auto [lo, hi] = bounds_per_dim[d];
  const std::size_t bins = bins_per_dim[d];
  const double pos = (v - lo) / (hi - lo) * static_cast<double>(bins);
  if (!(pos > 0.0)) return 0;  // also catches NaN
  if (pos >= static_cast<double>(bins)) return bins - 1;
  return static_cast<std::size_t>(pos);
}

std::uint64_t GridSpec::cell_of(std::span<const double> x) const {
  if (x.size() != dims.size()) {
    throw Error(ErrorCode::DimensionMismatch, "grid has " + std::to_string(dims.size()) +
                                                  " dims, point has " + std::to_string(x.size()));
  }
  std::uint64_t cell = 0;
  for (std::size_t d = 0; d < dims.size(); ++d) cell = cell * bins_per_dim[d] + bin_of(d, x[d]);
  return cell;
}

std::vector<double> GridSpec::cell_center(std::uint64_t cell) const {
  std::vector<double> c(dims.size());
  for (std::size_t d = dims.size(); d-- > 0;) {
    const std::uint64_t k = cell % bins_per_dim[d];
    cell /= bins_per_dim[d];
    const auto [lo, hi] = bounds_per_dim[d];
    c[d] = lo + (static_cast<double>(k) + 0.5) * (hi - lo) / static_cast<double>(bins_per_dim[d]);
  }
  return c;
}

namespace {

struct CellGroup {
  std::uint64_t cell = 0;
  std::size_t first = 0;
  std::size_t pass = 0;
  std::size_t fail = 0;
  bool mixed() const { return pass > 0 && fail > 0; }
};

// Occupied cells in order of first appearance, and each row's cell group.
struct CompactionPlan {
  std::vector<CellGroup> groups;
  std::vector<std::size_t> group_of;
};

CompactionPlan plan_compaction(const FeatureMatrix& x, std::span<const Label> labels,
                               const GridSpec& grid) {
  CompactionPlan plan;
  plan.group_of.resize(x.rows());
  std::unordered_map<std::uint64_t, std::size_t> index;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto cell = grid.cell_of(x.row(r));
    auto [it, inserted] = index.try_emplace(cell, plan.groups.size());
    if (inserted) plan.groups.push_back({cell, r, 0, 0});
    auto& g = plan.groups[it->second];
    (labels[r] == Label::Pass ? g.pass : g.fail) += 1;
    plan.group_of[r] = it->second;
  }
  return plan;
}

void check_grid_columns(const GridSpec& grid, std::size_t columns) {
  grid.validate();
  if (columns != grid.rank()) {
    throw Error(ErrorCode::DimensionMismatch, "feature dimension differs from grid rank");
  }
}

}  // namespace

std::pair<FeatureMatrix, std::vector<Label>> compact_features(const FeatureMatrix& x,
                                                              std::span<const Label> labels,
                                                              const GridSpec& grid) {
  if (x.rows() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "features and labels differ in length");
  }
  if (x.rows() == 0) return {FeatureMatrix(grid.rank()), {}};
  check_grid_columns(grid, x.dim());
  const auto plan = plan_compaction(x, labels, grid);

  FeatureMatrix out(x.dim());
  std::vector<Label> out_labels;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto& g = plan.groups[plan.group_of[r]];
    if (g.mixed()) {
      out.push_back(x.row(r));
      out_labels.push_back(labels[r]);
    } else if (g.first == r) {
      out.push_back(grid.cell_center(g.cell));
      out_labels.push_back(g.pass > 0 ? Label::Pass : Label::Fail);
    }
  }
  return {std::move(out), std::move(out_labels)};
}

std::pair<Dataset, LabelVector> compact_training_data(const Dataset& normalized,
                                                      const LabelVector& labels,
                                                      const GridSpec& grid) {
  if (!normalized.normalized()) {
    throw Error(ErrorCode::InvalidConfig, "grid compaction needs a normalized dataset");
  }
  if (labels.size() != normalized.size()) {
    throw Error(ErrorCode::LengthMismatch, "label vector does not match the dataset");
  }
  std::vector<SpecificationDef> specs;
  for (const auto& d : grid.dims) specs.push_back(normalized.spec(d));
  LabelVector out_labels{labels.subset, {}};
  if (normalized.empty()) return {Dataset(std::move(specs), {}, true), out_labels};

  const FeatureMatrix x = normalized.features(grid.dims);
  check_grid_columns(grid, x.dim());
  const auto plan = plan_compaction(x, labels.labels, grid);

  std::vector<DeviceRecord> records;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto& g = plan.groups[plan.group_of[r]];
    if (g.mixed()) {
      const auto row = x.row(r);
      records.push_back({normalized.records()[r].id, {row.begin(), row.end()}});
      out_labels.labels.push_back(labels.labels[r]);
    } else if (g.first == r) {
      records.push_back({"@cell" + std::to_string(g.cell), grid.cell_center(g.cell)});
      out_labels.labels.push_back(g.pass > 0 ? Label::Pass : Label::Fail);
    }
  }
  return {Dataset(std::move(specs), std::move(records), true), std::move(out_labels)};
}

LookupTable build_lookup_table(const GuardBandModel& gb, const GridSpec& grid) {
  grid.validate();
  if (grid.dims != gb.retained_specs) {
    throw Error(ErrorCode::DimensionMismatch, "grid dims must equal the model's retained specs");
  }
  LookupTable lut{grid, {}};
  const std::uint64_t cells = grid.cell_count();
  lut.attributes.reserve(cells);
  for (std::uint64_t c = 0; c < cells; ++c) {
    lut.attributes.push_back(classify(gb, grid.cell_center(c)));
  }
  return lut;
}

TriState lut_classify(const LookupTable& lut, std::span<const double> x) {
  return lut.attributes[lut.grid.cell_of(x)];
}

namespace {

constexpr std::size_t kLutLineWidth = 80;

double parse_number(const std::string& token, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(ErrorCode::ParseError, std::string("lookup table: bad ") + what + " '" + token + "'");
  }
  return v;
}

}  // namespace

void write_lut(std::ostream& out, const LookupTable& lut) {
  const auto& g = lut.grid;
  out << g.rank() << '\n';
  char lo[32], hi[32];
  for (std::size_t d = 0; d < g.rank(); ++d) {
    std::snprintf(lo, sizeof lo, "%.17g", g.bounds_per_dim[d].first);
    std::snprintf(hi, sizeof hi, "%.17g", g.bounds_per_dim[d].second);
    out << g.dims[d] << ' ' << lo << ' ' << hi << ' ' << g.bins_per_dim[d] << '\n';
  }
  std::string line;
  line.reserve(kLutLineWidth);
  for (auto a : lut.attributes) {
    line.push_back(to_char(a));
    if (line.size() == kLutLineWidth) {
      out << line << '\n';
      line.clear();
    }
  }
  if (!line.empty()) out << line << '\n';
}

LookupTable read_lut(std::istream& in) {
  LookupTable lut;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "lookup table: empty input");
  const auto rank = static_cast<std::size_t>(parse_number(line, "dimension count"));
  if (rank == 0) throw Error(ErrorCode::ParseError, "lookup table: zero dimensions");
  for (std::size_t d = 0; d < rank; ++d) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "lookup table: truncated header");
    std::istringstream ss(line);
    std::string name, lo, hi, bins;
    if (!(ss >> name >> lo >> hi >> bins)) {
      throw Error(ErrorCode::ParseError, "lookup table: malformed dim line '" + line + "'");
    }
    lut.grid.dims.push_back(name);
    lut.grid.bounds_per_dim.emplace_back(parse_number(lo, "lower bound"),
                                         parse_number(hi, "upper bound"));
    lut.grid.bins_per_dim.push_back(static_cast<std::size_t>(parse_number(bins, "bin count")));
  }
  lut.grid.cell_limit = std::numeric_limits<std::uint64_t>::max();
  lut.grid.validate();
  lut.grid.cell_limit = kDefaultCellLimit;
  const std::uint64_t cells = lut.grid.cell_count();
  lut.attributes.reserve(cells);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (char c : line) lut.attributes.push_back(tristate_from_char(c));
  }
  if (lut.attributes.size() != cells) {
    throw Error(ErrorCode::ParseError, "lookup table: expected " + std::to_string(cells) +
                                           " cells, found " + std::to_string(lut.attributes.size()));
  }
  lut.grid.cell_limit = std::max(kDefaultCellLimit, cells);
  return lut;
}

void save_lut(const std::filesystem::path& path, const LookupTable& lut) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_lut(out, lut);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

LookupTable load_lut(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_lut(in);
}

}  // namespace speccompact
