#include <gtest/gtest.h>

#include <functional>

#include <cmath>

#include <nlohmann/json.hpp>

#include "populations.hpp"
#include "speccompact/compactor.hpp"
#include "speccompact/error.hpp"

using namespace speccompact;

namespace {

const sctest::TrainTest& planted_pop() {
  static const auto pop = sctest::draw(sctest::planted(4), 1500, 800);
  return pop;
}

LabelVector truth_of(std::initializer_list<std::pair<Label, std::size_t>> runs) {
  LabelVector l{{"x"}, {}};
  for (auto [label, n] : runs) l.labels.insert(l.labels.end(), n, label);
  return l;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no speccompact::Error thrown";
  return ErrorCode::IoError;
}

}  // namespace

TEST(ComputeMetrics, TableStyleCounts) {
  // 1000 devices: 2 defect escapes, 1 yield loss, 84 guard band, rest correct
  LabelVector truth = truth_of({{Label::Fail, 2}, {Label::Pass, 1}, {Label::Pass, 84}, {Label::Pass, 913}});
  std::vector<TriState> preds;
  preds.insert(preds.end(), 2, TriState::Good);
  preds.insert(preds.end(), 1, TriState::Bad);
  preds.insert(preds.end(), 84, TriState::GuardBand);
  preds.insert(preds.end(), 913, TriState::Good);
  const auto m = compute_metrics(truth, preds);
  EXPECT_DOUBLE_EQ(m.defect_escape_pct, 0.2);
  EXPECT_DOUBLE_EQ(m.yield_loss_pct, 0.1);
  EXPECT_DOUBLE_EQ(m.guard_pct, 8.4);
  EXPECT_DOUBLE_EQ(m.e_p, 0.003);
  EXPECT_EQ(m.n_correct + m.n_defect_escape + m.n_yield_loss + m.n_guard, 1000u);
  EXPECT_EQ(format_metrics_line(m), "DE 0.2% YL 0.1% GB 8.4%");
}

TEST(ComputeMetrics, PerfectAndAllGuard) {
  const auto truth = truth_of({{Label::Pass, 5}, {Label::Fail, 5}});
  std::vector<TriState> perfect(5, TriState::Good);
  perfect.insert(perfect.end(), 5, TriState::Bad);
  const auto m = compute_metrics(truth, perfect);
  EXPECT_EQ(m.e_p, 0.0);
  EXPECT_EQ(m.guard_pct, 0.0);
  const auto g = compute_metrics(truth, std::vector<TriState>(10, TriState::GuardBand));
  EXPECT_EQ(g.defect_escape_pct, 0.0);
  EXPECT_EQ(g.yield_loss_pct, 0.0);
  EXPECT_EQ(g.guard_pct, 100.0);
  EXPECT_EQ(code_of([&] { compute_metrics(truth, std::span(perfect).subspan(0, 3)); }), ErrorCode::LengthMismatch);
}

TEST(CostSavings, ThreeStageExample) {
  const auto r = cost_savings(1000, 84, 774, 3, 1.0);
  EXPECT_EQ(r.baseline_cost, 1000.0 + 774.0 * 2.0);
  EXPECT_EQ(r.compacted_cost, 916.0 + 84.0 * 3.0);
  EXPECT_NEAR(r.savings_pct, 100.0 * (1.0 - 1168.0 / 2548.0), 1e-12);
  EXPECT_NEAR(r.savings_pct, 54.16, 0.01);
  EXPECT_EQ(format_cost_line(r), "$2548 → $1168 (54.2% saved)");
}

TEST(CostSavings, DegenerateCases) {
  const auto same = cost_savings(500, 0, 400, 1, 2.5);
  EXPECT_EQ(same.baseline_cost, same.compacted_cost);
  EXPECT_EQ(same.savings_pct, 0.0);
  const auto free = cost_savings(1000, 84, 774, 3, 0.0);
  EXPECT_EQ(free.baseline_cost, 0.0);
  EXPECT_EQ(free.compacted_cost, 0.0);
  EXPECT_EQ(free.savings_pct, 0.0);
  EXPECT_EQ(code_of([] { cost_savings(10, 11, 5, 3, 1.0); }), ErrorCode::InvalidCounts);
  EXPECT_EQ(code_of([] { cost_savings(10, 1, 11, 3, 1.0); }), ErrorCode::InvalidCounts);
  EXPECT_EQ(code_of([] { cost_savings(10, 1, 5, 3, -1.0); }), ErrorCode::InvalidCounts);
  EXPECT_EQ(format_cost_line(cost_savings(3, 1, 2, 3, 0.25)), "$1.75 → $1.25 (28.6% saved)");
}

TEST(OrderTests, FixedListIsVerbatim) {
  GeneratorConfig cfg;
  cfg.n = 20;
  const auto ds = normalize(generate(cfg));
  const std::vector<std::string> want{"gain", "overshoot"};
  EXPECT_EQ(order_tests(ds, TestOrdering::fixed(want), Hyperparams{}, 0), want);
  EXPECT_EQ(code_of([&] { order_tests(ds, TestOrdering::fixed({"nope"}), Hyperparams{}, 0); }),
            ErrorCode::UnknownSpecName);
}

TEST(OrderTests, MarginalScorePutsPlantedSpecBeforeIndependentOne) {
  const auto order = order_tests(planted_pop().train, TestOrdering::marginal(), Hyperparams{}, 1);
  ASSERT_EQ(order.size(), 4u);
  const auto pos = [&](const std::string& s) { return std::find(order.begin(), order.end(), s) - order.begin(); };
  EXPECT_LT(pos("s3"), pos("s4"));
  EXPECT_EQ(order.back(), "s4");
}

TEST(OrderTests, TiesFollowSpecListPosition) {
  // t1 and t2 are the same function of s1, s2 with no noise: both perfectly predictable
  GeneratorConfig cfg = sctest::planted(3, 0.0);
  cfg.n = 300;
  cfg.planted_specs = {{{"s1", "-", 0.5, 0.0, 1.0, 1.0}, -0.15, 1.15},
                       {{"s2", "-", 0.5, 0.0, 1.0, 1.0}, -0.15, 1.15},
                       {{"t2", "-", 0.5, 0.2, 0.8, 1.0}, 0.2, 0.8},
                       {{"t1", "-", 0.5, 0.2, 0.8, 1.0}, 0.2, 0.8}};
  cfg.dependence = {parse_dependence("t2=mean(s1,s2)"), parse_dependence("t1=mean(s1,s2)")};
  const auto ds = normalize(generate(cfg));
  const auto scores = marginal_scores(ds, Hyperparams{}, 1);
  ASSERT_EQ(scores.size(), 4u);
  EXPECT_EQ(scores[2].heldout_error, scores[3].heldout_error);
  const auto order = order_tests(ds, TestOrdering::marginal(), Hyperparams{}, 1);
  EXPECT_EQ(order[0], "t2");
  EXPECT_EQ(order[1], "t1");
}

TEST(EvaluateCandidate, PlantedSpecIsLearnable) {
  CompactionConfig cfg;
  const std::vector<std::string> retained{"s1", "s2", "s4"}, red{"s3"};
  const auto [gb, step] = evaluate_candidate(planted_pop().train, planted_pop().test, retained, red, cfg);
  EXPECT_LE(step.metrics.e_p, 0.01);
  EXPECT_TRUE(step.accepted);
  EXPECT_EQ(step.candidate, "s3");
  EXPECT_EQ(step.feature_dim, 3u);
  EXPECT_EQ(gb.retained_specs, retained);
}

TEST(EvaluateCandidate, IndependentSpecIsRejected) {
  CompactionConfig cfg;
  const std::vector<std::string> retained{"s1", "s2", "s3"}, red{"s4"};
  const auto step = evaluate_candidate(planted_pop().train, planted_pop().test, retained, red, cfg).second;
  EXPECT_GT(step.metrics.e_p, 0.02);
  EXPECT_FALSE(step.accepted);
}

TEST(EvaluateCandidate, Preconditions) {
  CompactionConfig cfg;
  const auto& p = planted_pop();
  const std::vector<std::string> none, red{"s3"}, all{"s1", "s2", "s4"};
  EXPECT_EQ(code_of([&] { evaluate_candidate(p.train, p.test, none, red, cfg); }), ErrorCode::EmptyRetainedSet);
  EXPECT_EQ(code_of([&] { evaluate_candidate(denormalize(p.train), p.test, all, red, cfg); }),
            ErrorCode::InvalidConfig);
}

TEST(Compact, PlantedEliminatesOnlyTheDependentSpec) {
  CompactionConfig cfg;
  cfg.ordering = TestOrdering::fixed({"s3", "s4"});
  std::vector<std::string> seen;
  const auto res = compact(planted_pop().train, planted_pop().test, cfg,
                           [&](const StepMetrics& s) { seen.push_back(s.candidate); });
  EXPECT_EQ(res.eliminated, std::vector<std::string>{"s3"});
  EXPECT_NE(std::find(res.retained.begin(), res.retained.end(), "s4"), res.retained.end());
  ASSERT_EQ(res.history.size(), 2u);
  EXPECT_TRUE(res.history[0].accepted);
  EXPECT_FALSE(res.history[1].accepted);
  EXPECT_EQ(seen, (std::vector<std::string>{"s3", "s4"}));
  ASSERT_TRUE(res.final_model.has_value());
  EXPECT_EQ(res.final_model->eliminated_specs, res.eliminated);
}

TEST(Compact, ZeroToleranceRejectsAnyMisprediction) {
  const auto pop = sctest::draw([] {
    GeneratorConfig g;
    g.noise_scale = 0.005;
    return g;
  }(), 600, 400);
  CompactionConfig cfg;
  cfg.e_T = 0.0;
  cfg.ordering = TestOrdering::fixed({"gain", "slew_rate", "overshoot", "short_circuit_current"});
  const auto res = compact(pop.train, pop.test, cfg);
  bool any_miss = false;
  for (const auto& s : res.history) {
    if (s.metrics.e_p > 0.0) {
      any_miss = true;
      EXPECT_FALSE(s.accepted) << s.candidate;
    }
    if (s.accepted) EXPECT_EQ(s.metrics.e_p, 0.0);
  }
  EXPECT_TRUE(any_miss);
}

TEST(Compact, LastRemainingTestIsNeverEliminated) {
  const auto pop = sctest::draw(sctest::planted(6), 200, 100);
  CompactionConfig cfg;
  cfg.e_T = 1.0;
  cfg.ordering = TestOrdering::fixed({"s1", "s2", "s3", "s4"});
  const auto res = compact(pop.train, pop.test, cfg);
  EXPECT_EQ(res.retained, std::vector<std::string>{"s4"});
  EXPECT_EQ(res.eliminated, (std::vector<std::string>{"s1", "s2", "s3"}));
  ASSERT_EQ(res.history.size(), 4u);
  EXPECT_FALSE(res.history.back().accepted);
  EXPECT_EQ(res.history.back().note, "last remaining test");
  EXPECT_TRUE(std::isnan(res.history.back().metrics.e_p));
}

TEST(Compact, SingleClassCandidateIsRejectedNotFatal) {
  // s4 never leaves its range here, so every label over {s4} is Pass
  GeneratorConfig g = sctest::planted(8, 0.0);
  g.planted_specs = default_planted_specs();
  g.planted_specs[3].sample_lo = 0.4;
  g.planted_specs[3].sample_hi = 0.6;
  g.dependence = default_planted_dependence();
  const auto pop = sctest::draw(g, 200, 100);
  CompactionConfig cfg;
  cfg.ordering = TestOrdering::fixed({"s4"});
  const auto res = compact(pop.train, pop.test, cfg);
  ASSERT_EQ(res.history.size(), 1u);
  EXPECT_FALSE(res.history[0].accepted);
  EXPECT_NE(res.history[0].note.find("DegenerateLabels"), std::string::npos) << res.history[0].note;
  EXPECT_TRUE(res.eliminated.empty());
  EXPECT_FALSE(res.final_model.has_value());
}

TEST(Compact, DeterministicForFixedSeed) {
  const auto pop = sctest::draw(sctest::planted(5), 300, 200);
  CompactionConfig cfg;
  cfg.seed = 77;
  const auto a = compact(pop.train, pop.test, cfg);
  const auto b = compact(pop.train, pop.test, cfg);
  EXPECT_EQ(a.order, b.order);
  EXPECT_EQ(a.eliminated, b.eliminated);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].metrics.n_correct, b.history[k].metrics.n_correct);
    EXPECT_EQ(a.history[k].metrics.n_guard, b.history[k].metrics.n_guard);
  }
  ASSERT_TRUE(a.final_model && b.final_model);
  EXPECT_EQ(a.final_model->tight.coefficients, b.final_model->tight.coefficients);
}

TEST(Compact, GridCompactedTrainingStillFindsPlantedSpec) {
  CompactionConfig cfg;
  cfg.ordering = TestOrdering::fixed({"s3", "s4"});
  cfg.grid = GridSpec::uniform({"s1"}, 12);
  const auto res = compact(planted_pop().train, planted_pop().test, cfg);
  EXPECT_EQ(res.eliminated, std::vector<std::string>{"s3"});
}

TEST(CompactionConfig, Validation) {
  const std::vector<std::string> names{"a", "b"};
  CompactionConfig cfg;
  EXPECT_NO_THROW(validate(cfg, names));
  cfg.e_T = 1.5;
  EXPECT_EQ(code_of([&] { validate(cfg, names); }), ErrorCode::InvalidConfig);
  cfg = CompactionConfig{};
  cfg.delta = -0.01;
  EXPECT_EQ(code_of([&] { validate(cfg, names); }), ErrorCode::InvalidConfig);
  cfg = CompactionConfig{};
  cfg.ordering = TestOrdering::fixed({"a", "a"});
  EXPECT_EQ(code_of([&] { validate(cfg, names); }), ErrorCode::InvalidConfig);
  cfg.ordering = TestOrdering::fixed({"c"});
  EXPECT_EQ(code_of([&] { validate(cfg, names); }), ErrorCode::UnknownSpecName);
}

TEST(CompactionConfig, JsonRoundTrip) {
  CompactionConfig cfg;
  cfg.e_T = 0.05;
  cfg.delta = 0.025;
  cfg.seed = 9;
  cfg.hp.c = 3.0;
  cfg.hp.kernel = KernelSpec::rbf(2.0);
  cfg.ordering = TestOrdering::fixed({"x", "y"});
  cfg.grid = GridSpec::uniform({"x"}, 20);
  const nlohmann::json j = cfg;
  const auto back = nlohmann::json::parse(j.dump()).get<CompactionConfig>();
  EXPECT_EQ(back.e_T, cfg.e_T);
  EXPECT_EQ(back.delta, cfg.delta);
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_EQ(back.hp, cfg.hp);
  EXPECT_EQ(back.ordering.names, cfg.ordering.names);
  ASSERT_TRUE(back.grid.has_value());
  EXPECT_EQ(back.grid->bins_per_dim[0], 20u);

  const auto minimal = nlohmann::json::parse(R"({"e_T": 0.1, "ordering": "marginal"})").get<CompactionConfig>();
  EXPECT_EQ(minimal.e_T, 0.1);
  EXPECT_EQ(minimal.ordering.kind, TestOrdering::Kind::MarginalScore);
  EXPECT_THROW(nlohmann::json::parse(R"({"ordering": 3})").get<CompactionConfig>(), Error);
}

TEST(Report, ContainsConfigStepsAndCost) {
  CompactionConfig cfg;
  cfg.ordering = TestOrdering::fixed({"s3", "s4"});
  const auto res = compact(planted_pop().train, planted_pop().test, cfg);
  const auto report = compaction_report(cfg, res, cost_savings(1000, 84, 774, 3, 1.0));
  EXPECT_TRUE(report.contains("config"));
  EXPECT_EQ(report.at("steps").size(), 2u);
  EXPECT_EQ(report.at("eliminated"), nlohmann::json({"s3"}));
  EXPECT_EQ(report.at("cost").at("baseline_cost"), 2548.0);
  const auto csv = step_series_csv(res.history);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "candidate,accepted,e_p,yield_loss_pct,defect_escape_pct,guard_pct");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
