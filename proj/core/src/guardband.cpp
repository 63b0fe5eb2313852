#include "speccompact/guardband.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "speccompact/error.hpp"
#include "speccompact/grid.hpp"

namespace speccompact {

std::string_view to_string(TriState t) {
  switch (t) {
    case TriState::Good: return "Good";
    case TriState::Bad: return "Bad";
    case TriState::GuardBand: return "GuardBand";
  }
  return "?";
}

char to_char(TriState t) {
  switch (t) {
    case TriState::Good: return 'G';
    case TriState::Bad: return 'B';
    case TriState::GuardBand: return 'U';
  }
  return '?';
}

TriState tristate_from_char(char c) {
  switch (c) {
    case 'G': return TriState::Good;
    case 'B': return TriState::Bad;
    case 'U': return TriState::GuardBand;
    default: throw Error(ErrorCode::ParseError, std::string("unknown cell attribute '") + c + "'");
  }
}

GuardBandLabels guard_band_labels(const Dataset& normalized, std::span<const std::string> eliminated,
                                  double delta) {
  GuardBandLabels out{label_pass_fail(normalized, eliminated, -delta),
                      label_pass_fail(normalized, eliminated, delta)};
  for (std::size_t k = 0; k < out.tight.size(); ++k) {
    if (out.tight.labels[k] == Label::Pass && out.loose.labels[k] == Label::Fail) {
      throw std::logic_error("guard-band label nesting violated at record " +
                             normalized.records()[k].id);
    }
  }
  return out;
}

namespace {

SvcModel train_side(const FeatureMatrix& x, const std::vector<Label>& labels, const Hyperparams& hp,
                    std::uint64_t seed, const GridSpec* grid, const char* side) {
  try {
    if (grid != nullptr) {
      auto [cx, cl] = compact_features(x, labels, *grid);
      return train_svc(cx, cl, hp, seed);
    }
    return train_svc(x, labels, hp, seed);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateLabels) {
      throw Error(ErrorCode::DegenerateLabels, std::string(side) + " side: " + e.message());
    }
    throw;
  }
}

}  // namespace

GuardBandModel train_guard_band(const Dataset& train, std::span<const std::string> retained,
                                std::span<const std::string> eliminated, double delta,
                                const Hyperparams& hp, std::uint64_t seed, const GridSpec* grid) {
  if (retained.empty()) throw Error(ErrorCode::EmptyRetainedSet, "no retained specs to train on");
  if (!(delta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "delta must be nonnegative");
  if (!train.normalized()) {
    throw Error(ErrorCode::InvalidConfig, "guard-band training needs a normalized dataset");
  }
  std::unordered_set<std::string> kept(retained.begin(), retained.end());
  for (const auto& e : eliminated) {
    if (kept.contains(e)) {
      throw Error(ErrorCode::InvalidConfig, "spec '" + e + "' is both retained and eliminated");
    }
  }

  const auto labels = guard_band_labels(train, eliminated, delta);
  const FeatureMatrix x = train.features(retained);

  std::optional<GridSpec> side_grid;
  if (grid != nullptr) {
    side_grid = *grid;
    side_grid->dims.assign(retained.begin(), retained.end());
    if (side_grid->bins_per_dim.size() != retained.size()) {
      side_grid->bins_per_dim.assign(retained.size(), grid->bins_per_dim.at(0));
    }
    if (side_grid->bounds_per_dim.size() != retained.size()) {
      side_grid->bounds_per_dim.assign(retained.size(), grid->bounds_per_dim.at(0));
    }
    side_grid->validate();
  }
  const GridSpec* g = side_grid ? &*side_grid : nullptr;

  GuardBandModel gb;
  gb.delta = delta;
  gb.retained_specs.assign(retained.begin(), retained.end());
  gb.eliminated_specs.assign(eliminated.begin(), eliminated.end());
  gb.tight = train_side(x, labels.tight.labels, hp, seed, g, "tight");
  // Identical labels give identical training runs.
  gb.loose = labels.loose.labels == labels.tight.labels
                 ? gb.tight
                 : train_side(x, labels.loose.labels, hp, seed, g, "loose");
  return gb;
}

TriState classify(const GuardBandModel& gb, std::span<const double> x) {
  const Label t = predict(gb.tight, x);
  const Label l = predict(gb.loose, x);
  if (t != l) return TriState::GuardBand;
  return t == Label::Pass ? TriState::Good : TriState::Bad;
}

std::vector<TriState> classify_all(const GuardBandModel& gb, const FeatureMatrix& x) {
  std::vector<TriState> out;
  out.reserve(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(classify(gb, x.row(r)));
  return out;
}

void to_json(nlohmann::json& j, const GuardBandModel& gb) {
  j = {{"format", "speccompact.guardband/1"},
       {"delta", gb.delta},
       {"retained_specs", gb.retained_specs},
       {"eliminated_specs", gb.eliminated_specs},
       {"tight", gb.tight},
       {"loose", gb.loose}};
}

void from_json(const nlohmann::json& j, GuardBandModel& gb) {
  try {
    gb.delta = j.at("delta").get<double>();
    gb.retained_specs = j.at("retained_specs").get<std::vector<std::string>>();
    gb.eliminated_specs = j.at("eliminated_specs").get<std::vector<std::string>>();
    gb.tight = j.at("tight").get<SvcModel>();
    gb.loose = j.at("loose").get<SvcModel>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("guard-band model: ") + e.what());
  }
  if (gb.tight.dim() != gb.retained_specs.size() || gb.loose.dim() != gb.retained_specs.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sub-model dimension differs from retained spec count");
  }
}

GuardBandModel load_guard_band(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return j.get<GuardBandModel>();
}

void save_guard_band(const std::string& path, const GuardBandModel& gb) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << nlohmann::json(gb).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace speccompact
