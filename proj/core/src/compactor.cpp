#include "speccompact/compactor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "speccompact/error.hpp"
#include "speccompact/seed.hpp"

namespace speccompact {

void validate(const CompactionConfig& cfg, std::span<const std::string> spec_names) {
  if (!(cfg.e_T >= 0.0 && cfg.e_T <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "e_T must lie in [0, 1]");
  }
  if (!(cfg.delta >= 0.0 && cfg.delta < 0.5)) {
    throw Error(ErrorCode::InvalidConfig, "delta must lie in [0, 0.5)");
  }
  validate(cfg.hp);
  if (cfg.ordering.kind == TestOrdering::Kind::FixedList) {
    std::unordered_set<std::string> known(spec_names.begin(), spec_names.end());
    std::unordered_set<std::string> seen;
    for (const auto& n : cfg.ordering.names) {
      if (!known.contains(n)) {
        throw Error(ErrorCode::UnknownSpecName, "ordering names unknown spec '" + n + "'");
      }
      if (!seen.insert(n).second) {
        throw Error(ErrorCode::InvalidConfig, "ordering lists '" + n + "' twice");
      }
    }
  }
  if (cfg.grid) {
    if (cfg.grid->bins_per_dim.empty() || cfg.grid->bounds_per_dim.empty()) {
      throw Error(ErrorCode::InvalidConfig, "training grid needs bins and bounds");
    }
    if (cfg.grid->bins_per_dim[0] < 1 ||
        !(cfg.grid->bounds_per_dim[0].first < cfg.grid->bounds_per_dim[0].second)) {
      throw Error(ErrorCode::InvalidConfig, "training grid bins/bounds are malformed");
    }
  }
}

PredictionMetrics compute_metrics(const LabelVector& truth, std::span<const TriState> predictions) {
  if (truth.size() != predictions.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(truth.size()) + " truth labels but " +
                                               std::to_string(predictions.size()) + " predictions");
  }
  PredictionMetrics m;
  m.n_total = predictions.size();
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const bool pass = truth.labels[k] == Label::Pass;
    switch (predictions[k]) {
      case TriState::GuardBand: ++m.n_guard; break;
      case TriState::Good: pass ? ++m.n_correct : ++m.n_defect_escape; break;
      case TriState::Bad: pass ? ++m.n_yield_loss : ++m.n_correct; break;
    }
  }
  if (m.n_total > 0) {
    const double n = static_cast<double>(m.n_total);
    m.e_p = static_cast<double>(m.n_yield_loss + m.n_defect_escape) / n;
    m.yield_loss_pct = 100.0 * static_cast<double>(m.n_yield_loss) / n;
    m.defect_escape_pct = 100.0 * static_cast<double>(m.n_defect_escape) / n;
    m.guard_pct = 100.0 * static_cast<double>(m.n_guard) / n;
  }
  return m;
}

std::string format_metrics_line(const PredictionMetrics& m) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "DE %.1f%% YL %.1f%% GB %.1f%%", m.defect_escape_pct,
                m.yield_loss_pct, m.guard_pct);
  return buf;
}

std::vector<OrderScore> marginal_scores(const Dataset& train, const Hyperparams& hp,
                                        std::uint64_t seed) {
  const auto names = train.spec_names();
  std::vector<OrderScore> scores;
  if (names.size() < 2 || train.size() < 4) {
    for (const auto& n : names) scores.push_back({n, 0.0});
    return scores;
  }
  const auto [fit, holdout] = split(train, 0.7, derive_seed(seed, "order-split"));
  for (std::size_t i = 0; i < names.size(); ++i) {
    std::vector<std::string> others;
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (j != i) others.push_back(names[j]);
    }
    const std::vector<std::string> target{names[i]};
    const auto fit_labels = label_pass_fail(fit, target);
    const auto hold_labels = label_pass_fail(holdout, target);
    std::size_t wrong = 0;
    const auto n_pass = fit_labels.count(Label::Pass);
    if (n_pass == 0 || n_pass == fit_labels.size()) {
      // Constant predictor.
      const Label constant = n_pass == 0 ? Label::Fail : Label::Pass;
      wrong = hold_labels.size() - hold_labels.count(constant);
    } else {
      const auto model = train_svc(fit.features(others), fit_labels.labels, hp,
                                   derive_seed(seed, "order", i));
      const auto x = holdout.features(others);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        if (predict(model, x.row(r)) != hold_labels.labels[r]) ++wrong;
      }
    }
    const double err = holdout.empty() ? 0.0
                                       : static_cast<double>(wrong) / static_cast<double>(holdout.size());
    scores.push_back({names[i], err});
  }
  return scores;
}

std::vector<std::string> order_tests(const Dataset& train, const TestOrdering& strategy,
                                     const Hyperparams& hp, std::uint64_t seed) {
  if (strategy.kind == TestOrdering::Kind::FixedList) {
    for (const auto& n : strategy.names) train.spec_index(n);
    return strategy.names;
  }
  auto scores = marginal_scores(train, hp, seed);
  std::stable_sort(scores.begin(), scores.end(), [](const OrderScore& a, const OrderScore& b) {
    return a.heldout_error < b.heldout_error;
  });
  std::vector<std::string> order;
  for (const auto& s : scores) order.push_back(s.spec);
  return order;
}

std::pair<GuardBandModel, StepMetrics> evaluate_candidate(const Dataset& train, const Dataset& test,
                                                          std::span<const std::string> retained,
                                                          std::span<const std::string> s_red,
                                                          const CompactionConfig& cfg) {
  if (retained.empty()) throw Error(ErrorCode::EmptyRetainedSet, "no retained specs remain");
  if (s_red.empty()) throw Error(ErrorCode::InvalidConfig, "eliminated set is empty");
  if (!train.normalized() || !test.normalized()) {
    throw Error(ErrorCode::InvalidConfig, "candidate evaluation needs normalized datasets");
  }
  auto gb = train_guard_band(train, retained, s_red, cfg.delta, cfg.hp,
                             derive_seed(cfg.seed, "candidate", s_red.size()),
                             cfg.grid ? &*cfg.grid : nullptr);
  const auto truth = label_pass_fail(test, s_red);
  const auto predictions = classify_all(gb, test.features(retained));

  StepMetrics step;
  step.candidate = s_red.back();
  step.metrics = compute_metrics(truth, predictions);
  step.accepted = step.metrics.e_p <= cfg.e_T;
  step.feature_dim = retained.size();
  return {std::move(gb), std::move(step)};
}

CompactionResult compact(const Dataset& train, const Dataset& test, const CompactionConfig& cfg,
                         const StepCallback& on_step) {
  const auto names = train.spec_names();
  validate(cfg, names);
  if (test.spec_names() != names) {
    throw Error(ErrorCode::InvalidConfig, "train and test datasets use different spec sets");
  }
  if (!train.normalized() || !test.normalized()) {
    throw Error(ErrorCode::InvalidConfig, "compaction needs normalized datasets");
  }

  CompactionResult result;
  result.order = order_tests(train, cfg.ordering, cfg.hp, derive_seed(cfg.seed, "ordering"));
  result.retained = names;

  for (const auto& candidate : result.order) {
    std::vector<std::string> trial_retained;
    for (const auto& n : result.retained) {
      if (n != candidate) trial_retained.push_back(n);
    }
    std::vector<std::string> trial_red = result.eliminated;
    trial_red.push_back(candidate);

    StepMetrics step;
    step.candidate = candidate;
    step.feature_dim = trial_retained.size();
    if (trial_retained.empty()) {
      step.metrics.e_p = std::numeric_limits<double>::quiet_NaN();
      step.note = "last remaining test";
    } else {
      try {
        auto [gb, evaluated] = evaluate_candidate(train, test, trial_retained, trial_red, cfg);
        step = std::move(evaluated);
        if (step.accepted) {
          result.retained = std::move(trial_retained);
          result.eliminated = std::move(trial_red);
          result.final_model = std::move(gb);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateLabels) throw;
        step.metrics.e_p = std::numeric_limits<double>::quiet_NaN();
        step.note = e.what();
      }
    }
    result.history.push_back(step);
    if (on_step) on_step(result.history.back());
  }
  return result;
}

CostReport cost_savings(std::uint64_t n_devices, std::uint64_t n_guard,
                        std::uint64_t n_pass_stage1, std::uint64_t stages, double per_stage_cost) {
  if (n_guard > n_devices) throw Error(ErrorCode::InvalidCounts, "more guard-band devices than devices");
  if (n_pass_stage1 > n_devices) {
    throw Error(ErrorCode::InvalidCounts, "more stage-1 passes than devices");
  }
  if (stages == 0) throw Error(ErrorCode::InvalidCounts, "at least one test stage is required");
  if (!(per_stage_cost >= 0.0)) throw Error(ErrorCode::InvalidCounts, "stage cost must be nonnegative");
  const auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  CostReport r;
  r.compacted_cost = d(n_devices - n_guard) * per_stage_cost + d(n_guard) * d(stages) * per_stage_cost;
  r.baseline_cost = d(n_devices) * per_stage_cost + d(n_pass_stage1) * d(stages - 1) * per_stage_cost;
  r.savings_pct = r.baseline_cost > 0.0 ? 100.0 * (1.0 - r.compacted_cost / r.baseline_cost) : 0.0;
  return r;
}

namespace {

std::string money(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return "$" + s;
}

}  // namespace

std::string format_cost_line(const CostReport& r) {
  char pct[32];
  std::snprintf(pct, sizeof pct, "%.1f", r.savings_pct);
  return money(r.baseline_cost) + " → " + money(r.compacted_cost) + " (" + pct + "% saved)";
}

void to_json(nlohmann::json& j, const CompactionConfig& cfg) {
  j = {{"e_T", cfg.e_T}, {"delta", cfg.delta}, {"hyperparams", cfg.hp}, {"seed", cfg.seed}};
  if (cfg.ordering.kind == TestOrdering::Kind::FixedList) {
    j["ordering"] = {{"fixed", cfg.ordering.names}};
  } else {
    j["ordering"] = "marginal";
  }
  if (cfg.grid) {
    j["grid"] = {{"bins", cfg.grid->bins_per_dim.at(0)},
                 {"lo", cfg.grid->bounds_per_dim.at(0).first},
                 {"hi", cfg.grid->bounds_per_dim.at(0).second}};
  } else {
    j["grid"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, CompactionConfig& cfg) {
  try {
    cfg = CompactionConfig{};
    cfg.e_T = j.value("e_T", cfg.e_T);
    cfg.delta = j.value("delta", cfg.delta);
    if (j.contains("hyperparams")) cfg.hp = j["hyperparams"].get<Hyperparams>();
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("ordering")) {
      const auto& o = j["ordering"];
      if (o.is_string() && o.get<std::string>() == "marginal") {
        cfg.ordering = TestOrdering::marginal();
      } else if (o.is_object() && o.contains("fixed")) {
        cfg.ordering = TestOrdering::fixed(o["fixed"].get<std::vector<std::string>>());
      } else if (o.is_array()) {
        cfg.ordering = TestOrdering::fixed(o.get<std::vector<std::string>>());
      } else {
        throw Error(ErrorCode::InvalidConfig, "ordering must be \"marginal\" or {\"fixed\": [...]}");
      }
    }
    if (j.contains("grid") && !j["grid"].is_null()) {
      const auto& g = j["grid"];
      cfg.grid = GridSpec::uniform({"*"}, g.value("bins", std::size_t{10}), g.value("lo", -0.25),
                                   g.value("hi", 1.25), std::numeric_limits<std::uint64_t>::max());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("compaction config: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const PredictionMetrics& m) {
  j = {{"n_total", m.n_total},
       {"n_correct", m.n_correct},
       {"n_yield_loss", m.n_yield_loss},
       {"n_defect_escape", m.n_defect_escape},
       {"n_guard", m.n_guard},
       {"e_p", m.e_p},
       {"yield_loss_pct", m.yield_loss_pct},
       {"defect_escape_pct", m.defect_escape_pct},
       {"guard_pct", m.guard_pct}};
}

void to_json(nlohmann::json& j, const StepMetrics& s) {
  j = {{"candidate", s.candidate},
       {"accepted", s.accepted},
       {"feature_dim", s.feature_dim},
       {"metrics", s.metrics}};
  if (!s.note.empty()) j["note"] = s.note;
}

void to_json(nlohmann::json& j, const CostReport& r) {
  j = {{"baseline_cost", r.baseline_cost},
       {"compacted_cost", r.compacted_cost},
       {"savings_pct", r.savings_pct}};
}

nlohmann::json compaction_report(const CompactionConfig& cfg, const CompactionResult& result,
                                 const std::optional<CostReport>& cost) {
  nlohmann::json j = {{"config", cfg},
                      {"order", result.order},
                      {"steps", result.history},
                      {"retained", result.retained},
                      {"eliminated", result.eliminated},
                      {"has_model", result.final_model.has_value()}};
  j["cost"] = cost ? nlohmann::json(*cost) : nlohmann::json(nullptr);
  return j;
}

std::string step_series_csv(std::span<const StepMetrics> history) {
  std::ostringstream out;
  out << "candidate,accepted,e_p,yield_loss_pct,defect_escape_pct,guard_pct\n";
  char buf[160];
  for (const auto& s : history) {
    std::snprintf(buf, sizeof buf, ",%d,%.6f,%.4f,%.4f,%.4f\n", s.accepted ? 1 : 0, s.metrics.e_p,
                  s.metrics.yield_loss_pct, s.metrics.defect_escape_pct, s.metrics.guard_pct);
    out << s.candidate << buf;
  }
  return out.str();
}

}  // namespace speccompact
