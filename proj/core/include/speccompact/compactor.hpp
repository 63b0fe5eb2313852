#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "speccompact/datamodel.hpp"
#include "speccompact/grid.hpp"
#include "speccompact/guardband.hpp"
#include "speccompact/svc.hpp"

namespace speccompact {

struct TestOrdering {
  enum class Kind { FixedList, MarginalScore };
  Kind kind = Kind::MarginalScore;
  std::vector<std::string> names;  // FixedList only

  static TestOrdering fixed(std::vector<std::string> names) {
    return {Kind::FixedList, std::move(names)};
  }
  static TestOrdering marginal() { return {Kind::MarginalScore, {}}; }
};

struct CompactionConfig {
  /// Tolerance on the prediction error e_p, as a fraction of test instances.
  double e_T = 0.02;
  /// Guard-band half-width in normalized units.
  double delta = 0.01;
  Hyperparams hp;
  TestOrdering ordering = TestOrdering::marginal();
  /// Optional training-data compaction grid; its dims are replaced by the
  /// retained specs at every step (bins/bounds of the first dim are reused).
  std::optional<GridSpec> grid;
  std::uint64_t seed = 0;
};

void validate(const CompactionConfig& cfg, std::span<const std::string> spec_names);

/// Loss/escape/guard tallies over an evaluation set. Guard-band predictions
/// are excluded from the loss and escape numerators; every percentage uses
/// the full evaluation-set size as denominator.
struct PredictionMetrics {
  std::size_t n_total = 0;
  std::size_t n_correct = 0;        // confident and right
  std::size_t n_yield_loss = 0;     // truth Pass, predicted Bad
  std::size_t n_defect_escape = 0;  // truth Fail, predicted Good
  std::size_t n_guard = 0;
  double e_p = 0.0;
  double yield_loss_pct = 0.0;
  double defect_escape_pct = 0.0;
  double guard_pct = 0.0;
};

PredictionMetrics compute_metrics(const LabelVector& truth, std::span<const TriState> predictions);

/// "DE 0.2% YL 0.1% GB 8.4%"
std::string format_metrics_line(const PredictionMetrics& m);

struct StepMetrics {
  std::string candidate;
  PredictionMetrics metrics;
  bool accepted = false;
  /// Retained-feature count the candidate's model was trained on.
  std::size_t feature_dim = 0;
  /// Why a candidate was rejected without a usable model; empty otherwise.
  std::string note;

  double e_p() const { return metrics.e_p; }
};

struct CompactionResult {
  std::vector<std::string> order;
  std::vector<std::string> retained;
  std::vector<std::string> eliminated;  // in elimination order
  std::optional<GuardBandModel> final_model;
  std::vector<StepMetrics> history;
};

struct OrderScore {
  std::string spec;
  double heldout_error = 0.0;
};

/// Held-out error of predicting each spec's pass/fail from all the others
/// with a plain classifier (70/30 seeded split of `train`).
std::vector<OrderScore> marginal_scores(const Dataset& train, const Hyperparams& hp,
                                        std::uint64_t seed);

/// FixedList: the list verbatim. MarginalScore: ascending held-out error,
/// ties in spec-list order.
std::vector<std::string> order_tests(const Dataset& train, const TestOrdering& strategy,
                                     const Hyperparams& hp, std::uint64_t seed);

/// Trains a guard-band model of the joint pass/fail of `s_red` from the
/// `retained` features and scores it on `test`. `accepted` is e_p <= e_T.
std::pair<GuardBandModel, StepMetrics> evaluate_candidate(const Dataset& train, const Dataset& test,
                                                          std::span<const std::string> retained,
                                                          std::span<const std::string> s_red,
                                                          const CompactionConfig& cfg);

using StepCallback = std::function<void(const StepMetrics&)>;

/// Greedy single-pass elimination: every candidate in the configured order
/// is examined once against the accumulated eliminated set.
CompactionResult compact(const Dataset& train, const Dataset& test, const CompactionConfig& cfg,
                         const StepCallback& on_step = {});

struct CostReport {
  double baseline_cost = 0.0;
  double compacted_cost = 0.0;
  double savings_pct = 0.0;
};

/// Staged test-cost comparison: the baseline runs stage 1 on every device
/// and the remaining stages on devices that passed stage 1; the compacted
/// flow runs one stage per device plus all stages for guard-band devices.
CostReport cost_savings(std::uint64_t n_devices, std::uint64_t n_guard,
                        std::uint64_t n_pass_stage1, std::uint64_t stages, double per_stage_cost);

/// "$2548 → $1168 (54.2% saved)"
std::string format_cost_line(const CostReport& r);

void to_json(nlohmann::json& j, const CompactionConfig& cfg);
void from_json(const nlohmann::json& j, CompactionConfig& cfg);
void to_json(nlohmann::json& j, const PredictionMetrics& m);
void to_json(nlohmann::json& j, const StepMetrics& s);
void to_json(nlohmann::json& j, const CostReport& r);

/// Report document: config echo, step series, final partition, optional cost block.
nlohmann::json compaction_report(const CompactionConfig& cfg, const CompactionResult& result,
                                 const std::optional<CostReport>& cost);

/// CSV step series: candidate,accepted,e_p,yield_loss_pct,defect_escape_pct,guard_pct
std::string step_series_csv(std::span<const StepMetrics> history);

}  // namespace speccompact
