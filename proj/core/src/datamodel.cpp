#include "speccompact/datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "speccompact/error.hpp"

namespace speccompact {

namespace {

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  return std::none_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isspace(c) || c == ',' || c == '"';
  });
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate_spec_set(std::span<const SpecificationDef> specs) {
  std::unordered_set<std::string> seen;
  for (const auto& s : specs) {
    if (!valid_name(s.name)) {
      throw Error(ErrorCode::InvalidSpec, "spec name '" + s.name + "' is empty or contains separators");
    }
    if (!(s.range_lo < s.range_hi)) {
      throw Error(ErrorCode::InvalidSpec, s.name + ": range_lo must be < range_hi");
    }
    if (!s.in_range(s.nominal)) {
      throw Error(ErrorCode::InvalidSpec, s.name + ": nominal lies outside its range");
    }
    if (!(s.test_cost >= 0.0)) {
      throw Error(ErrorCode::InvalidSpec, s.name + ": test cost must be nonnegative");
    }
    if (!seen.insert(s.name).second) {
      throw Error(ErrorCode::InvalidSpec, "duplicate spec name '" + s.name + "'");
    }
  }
}

Dataset::Dataset(std::vector<SpecificationDef> specs, std::vector<DeviceRecord> records,
                 bool normalized)
    : specs_(std::move(specs)), records_(std::move(records)), normalized_(normalized) {
  validate_spec_set(specs_);
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (r.values.size() != specs_.size()) {
      throw Error(ErrorCode::DimensionMismatch,
                  "record '" + r.id + "' has " + std::to_string(r.values.size()) +
                      " values for " + std::to_string(specs_.size()) + " specs");
    }
    for (std::size_t j = 0; j < r.values.size(); ++j) {
      if (!std::isfinite(r.values[j])) {
        throw Error(ErrorCode::NonNumericValue,
                    "record '" + r.id + "', column " + specs_[j].name + ": value is not finite");
      }
    }
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate record id '" + r.id + "'");
    }
  }
}

std::vector<std::string> Dataset::spec_names() const {
  std::vector<std::string> names;
  names.reserve(specs_.size());
  for (const auto& s : specs_) names.push_back(s.name);
  return names;
}

std::size_t Dataset::spec_index(const std::string& name) const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].name == name) return i;
  }
  throw Error(ErrorCode::UnknownSpecName, "no spec named '" + name + "'");
}

FeatureMatrix Dataset::features(std::span<const std::string> names) const {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& n : names) cols.push_back(spec_index(n));
  std::vector<double> values;
  values.reserve(records_.size() * cols.size());
  for (const auto& r : records_) {
    for (auto c : cols) values.push_back(r.values[c]);
  }
  if (cols.empty()) return FeatureMatrix(0);
  return FeatureMatrix(cols.size(), std::move(values));
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out;
  out.specs_ = specs_;
  out.normalized_ = normalized_;
  out.records_.reserve(indices.size());
  for (auto i : indices) out.records_.push_back(records_.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, records_.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return select(idx);
}

std::size_t LabelVector::count(Label l) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
}

std::vector<SpecificationDef> parse_spec_set(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("spec set: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "spec set must be a JSON array");
  std::vector<SpecificationDef> specs;
  for (const auto& item : doc) {
    try {
      SpecificationDef s;
      s.name = item.at("name").get<std::string>();
      s.unit = item.value("unit", std::string{});
      s.nominal = item.at("nominal").get<double>();
      s.range_lo = item.at("lo").get<double>();
      s.range_hi = item.at("hi").get<double>();
      s.test_cost = item.value("cost", 1.0);
      specs.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("spec entry: ") + e.what());
    }
  }
  validate_spec_set(specs);
  return specs;
}

std::vector<SpecificationDef> load_spec_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_spec_set(buf.str());
}

std::string spec_set_to_json(std::span<const SpecificationDef> specs) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& s : specs) {
    doc.push_back({{"name", s.name},
                   {"unit", s.unit},
                   {"nominal", s.nominal},
                   {"lo", s.range_lo},
                   {"hi", s.range_hi},
                   {"cost", s.test_cost}});
  }
  return doc.dump(2) + "\n";
}

void save_spec_set(const std::filesystem::path& path, std::span<const SpecificationDef> specs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << spec_set_to_json(specs);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Dataset parse_dataset(std::istream& in, std::vector<SpecificationDef> specs) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "dataset has no header");
  auto header = split_csv_line(trim(line));
  for (auto& h : header) h = trim(h);
  if (header.empty() || header[0] != "id") {
    throw Error(ErrorCode::MissingColumn, "first column must be 'id'");
  }
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (j + 1 >= header.size() || header[j + 1] != specs[j].name) {
      throw Error(ErrorCode::MissingColumn, "expected column '" + specs[j].name + "' at position " +
                                                std::to_string(j + 1));
    }
  }
  if (header.size() != specs.size() + 1) {
    throw Error(ErrorCode::MissingColumn,
                "unexpected extra column '" + header[specs.size() + 1] + "'");
  }

  std::vector<DeviceRecord> records;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    DeviceRecord rec;
    rec.id = trim(cells[0]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::MissingColumn, "row " + rec.id + " has " +
                                                std::to_string(cells.size()) + " cells, expected " +
                                                std::to_string(header.size()));
    }
    if (!ids.insert(rec.id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate record id '" + rec.id + "'");
    }
    rec.values.resize(specs.size());
    for (std::size_t j = 0; j < specs.size(); ++j) {
      if (!parse_double(trim(cells[j + 1]), rec.values[j])) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + rec.id + ", column " + specs[j].name + ": '" + cells[j + 1] + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(specs), std::move(records), false);
}

Dataset load_dataset(const std::filesystem::path& path, std::vector<SpecificationDef> specs) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_dataset(in, std::move(specs));
}

std::vector<std::string> read_dataset_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::MissingColumn, "dataset has no header");
  auto header = split_csv_line(trim(line));
  if (header.empty() || trim(header[0]) != "id") {
    throw Error(ErrorCode::MissingColumn, "first column must be 'id'");
  }
  std::vector<std::string> names;
  for (std::size_t j = 1; j < header.size(); ++j) names.push_back(trim(header[j]));
  return names;
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << "id";
  for (const auto& s : ds.specs()) out << ',' << s.name;
  out << '\n';
  for (const auto& r : ds.records()) {
    out << r.id;
    for (double v : r.values) out << ',' << format_double(v);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_dataset(out, ds);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

Dataset normalize(const Dataset& ds) {
  if (ds.normalized()) throw Error(ErrorCode::AlreadyNormalized, "dataset is already normalized");
  std::vector<DeviceRecord> records = ds.records();
  const auto& specs = ds.specs();
  for (auto& r : records) {
    for (std::size_t j = 0; j < specs.size(); ++j) r.values[j] = specs[j].normalize(r.values[j]);
  }
  return Dataset(specs, std::move(records), true);
}

Dataset denormalize(const Dataset& ds) {
  if (!ds.normalized()) return ds;
  std::vector<DeviceRecord> records = ds.records();
  const auto& specs = ds.specs();
  for (auto& r : records) {
    for (std::size_t j = 0; j < specs.size(); ++j) r.values[j] = specs[j].denormalize(r.values[j]);
  }
  return Dataset(specs, std::move(records), false);
}

LabelVector label_pass_fail(const Dataset& ds, std::span<const std::string> subset, double margin) {
  struct Bounds {
    std::size_t col;
    double lo, hi;
  };
  std::vector<Bounds> bounds;
  for (const auto& name : subset) {
    const auto col = ds.spec_index(name);
    const auto& s = ds.specs()[col];
    if (ds.normalized()) {
      bounds.push_back({col, -margin, 1.0 + margin});
    } else {
      bounds.push_back({col, s.range_lo - margin * s.width(), s.range_hi + margin * s.width()});
    }
  }
  LabelVector out;
  out.subset.assign(subset.begin(), subset.end());
  out.labels.reserve(ds.size());
  for (const auto& r : ds.records()) {
    const bool pass = std::all_of(bounds.begin(), bounds.end(), [&](const Bounds& b) {
      const double v = r.values[b.col];
      return v >= b.lo && v <= b.hi;
    });
    out.labels.push_back(pass ? Label::Pass : Label::Fail);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (ds.empty()) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "split fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto first_n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Fisher-Yates with an explicit draw so the partition does not depend on
  // the standard library's shuffle implementation.
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> a(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(first_n));
  std::vector<std::size_t> b(perm.begin() + static_cast<std::ptrdiff_t>(first_n), perm.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {ds.select(a), ds.select(b)};
}

double yield(const LabelVector& labels) {
  if (labels.labels.empty()) return 0.0;
  return static_cast<double>(labels.count(Label::Pass)) / static_cast<double>(labels.size());
}

}  // namespace speccompact
