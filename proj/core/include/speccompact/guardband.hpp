#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "speccompact/datamodel.hpp"
#include "speccompact/svc.hpp"

namespace speccompact {

struct GridSpec;

enum class TriState { Good, Bad, GuardBand };

std::string_view to_string(TriState t);
char to_char(TriState t);  // G, B, U
TriState tristate_from_char(char c);

/// Two classifiers trained against eliminated-spec ranges shrunk ("tight")
/// and widened ("loose") by `delta` of the normalized range on each side.
struct GuardBandModel {
  SvcModel tight;
  SvcModel loose;
  double delta = 0.0;
  std::vector<std::string> retained_specs;
  std::vector<std::string> eliminated_specs;
};

/// Per-side training labels for the eliminated specs of a normalized dataset.
struct GuardBandLabels {
  LabelVector tight;
  LabelVector loose;
};

GuardBandLabels guard_band_labels(const Dataset& normalized, std::span<const std::string> eliminated,
                                  double delta);

/// Trains both sides on the retained-spec features of a normalized dataset.
/// If `grid` is given (dims are ignored and replaced by `retained`), each
/// side's training set is grid-compacted against that side's labels first.
/// A single-class side raises DegenerateLabels naming the side.
GuardBandModel train_guard_band(const Dataset& train, std::span<const std::string> retained,
                                std::span<const std::string> eliminated, double delta,
                                const Hyperparams& hp, std::uint64_t seed,
                                const GridSpec* grid = nullptr);

TriState classify(const GuardBandModel& gb, std::span<const double> x);
std::vector<TriState> classify_all(const GuardBandModel& gb, const FeatureMatrix& x);

void to_json(nlohmann::json& j, const GuardBandModel& gb);
void from_json(const nlohmann::json& j, GuardBandModel& gb);
GuardBandModel load_guard_band(const std::string& path);
void save_guard_band(const std::string& path, const GuardBandModel& gb);

}  // namespace speccompact
