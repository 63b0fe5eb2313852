#include "properties.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "speccompact/compactor.hpp"
#include "speccompact/error.hpp"
#include "speccompact/guardband.hpp"
#include "speccompact/syngen.hpp"

namespace sctest {

using namespace speccompact;

namespace {

using Rng = std::mt19937_64;

double uni(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<SpecificationDef> random_specs(Rng& rng, std::size_t m) {
  std::vector<SpecificationDef> specs;
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = uni(rng, -1e3, 1e3);
    const double width = std::pow(10.0, uni(rng, -3.0, 4.0));
    specs.push_back({"p" + std::to_string(i), "u", lo + width / 2, lo, lo + width, uni(rng, 0.0, 5.0)});
  }
  return specs;
}

double random_value(Rng& rng, const SpecificationDef& s) {
  switch (pick(rng, 0, 5)) {
    case 0: return s.range_lo;
    case 1: return s.range_hi;
    case 2: return s.range_lo - uni(rng, 0.0, 2.0) * s.width();
    case 3: return s.range_hi + uni(rng, 0.0, 2.0) * s.width();
    default: return uni(rng, s.range_lo, s.range_hi);
  }
}

Dataset random_dataset(Rng& rng, std::size_t m, std::size_t n) {
  auto specs = random_specs(rng, m);
  std::vector<DeviceRecord> records;
  for (std::size_t k = 0; k < n; ++k) {
    DeviceRecord r{"r" + std::to_string(k), {}};
    for (const auto& s : specs) r.values.push_back(random_value(rng, s));
    records.push_back(std::move(r));
  }
  return Dataset(specs, records);
}

std::vector<std::string> random_subset(Rng& rng, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (rng() & 1) out.push_back(n);
  }
  return out;
}

// Normalized dataset with values spread over the default grid bounds.
Dataset random_normalized(Rng& rng, std::size_t m, std::size_t n) {
  std::vector<SpecificationDef> specs;
  for (std::size_t i = 0; i < m; ++i) specs.push_back({"x" + std::to_string(i), "", 0.5, 0.0, 1.0, 1.0});
  std::vector<DeviceRecord> records;
  for (std::size_t k = 0; k < n; ++k) {
    DeviceRecord r{"r" + std::to_string(k), {}};
    for (std::size_t i = 0; i < m; ++i) r.values.push_back(uni(rng, -0.25, 1.25));
    records.push_back(std::move(r));
  }
  return Dataset(specs, records, true);
}

}  // namespace

PropertyReport datamodel_roundtrip_properties(std::size_t cases, std::uint64_t seed) {
  PropertyReport rep{"datamodel round-trip/normalization"};
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++rep.cases) {
    const std::size_t m = pick(rng, 1, 5);
    const auto ds = random_dataset(rng, m, pick(rng, 0, 20));

    std::stringstream csv;
    write_dataset(csv, ds);
    if (parse_dataset(csv, ds.specs()) != ds) rep.fail(c, "CSV save/load not bit-identical");
    if (parse_spec_set(spec_set_to_json(ds.specs())) != ds.specs()) rep.fail(c, "spec-set JSON round trip");

    const auto norm = normalize(ds);
    if (!norm.normalized() || ds.normalized()) rep.fail(c, "normalized flag");
    const auto back = denormalize(norm);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        const auto& s = ds.specs()[i];
        const double v = ds.records()[k].values[i];
        const double u = norm.records()[k].values[i];
        if (u != (v - s.range_lo) / (s.range_hi - s.range_lo)) rep.fail(c, "affine map");
        const double scale = std::max({std::abs(v), std::abs(s.range_lo), std::abs(s.range_hi)});
        if (std::abs(back.records()[k].values[i] - v) > 1e-12 * scale) rep.fail(c, "denormalize(normalize(v)) != v");
      }
    }

    const auto names = ds.spec_names();
    const auto a = random_subset(rng, names);
    const auto b = random_subset(rng, names);
    std::vector<std::string> ab = a;
    for (const auto& n : b) {
      if (std::find(ab.begin(), ab.end(), n) == ab.end()) ab.push_back(n);
    }
    const auto la = label_pass_fail(ds, a);
    const auto lb = label_pass_fail(ds, b);
    const auto lab = label_pass_fail(ds, ab);
    const auto lab_norm = label_pass_fail(norm, ab);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const bool both = la.labels[k] == Label::Pass && lb.labels[k] == Label::Pass;
      if (both != (lab.labels[k] == Label::Pass)) rep.fail(c, "label(A u B) != label(A) and label(B)");
      if (lab.labels[k] != lab_norm.labels[k]) rep.fail(c, "labels differ between raw and normalized");
      bool truth = true;
      for (const auto& n : ab) truth = truth && ds.spec(n).in_range(ds.records()[k].values[ds.spec_index(n)]);
      if (truth != (lab.labels[k] == Label::Pass)) rep.fail(c, "label disagrees with recomputation");
    }
  }
  return rep;
}

PropertyReport svc_kkt_properties(std::size_t cases, std::uint64_t seed) {
  PropertyReport rep{"SVC KKT feasibility"};
  Rng rng(seed);
  const double cs[] = {0.1, 1.0, 10.0};
  for (std::size_t c = 0; c < cases; ++c, ++rep.cases) {
    const std::size_t n = pick(rng, 2, 30);
    const std::size_t dim = pick(rng, 1, 4);
    std::vector<double> values;
    for (std::size_t k = 0; k < n * dim; ++k) values.push_back(uni(rng, -1.0, 1.0));
    FeatureMatrix x(dim, values);
    std::vector<Label> y;
    for (std::size_t k = 0; k < n; ++k) y.push_back(rng() & 1 ? Label::Pass : Label::Fail);
    y[0] = Label::Pass;
    y[1] = Label::Fail;

    Hyperparams hp;
    hp.c = cs[pick(rng, 0, 2)];
    hp.kernel = (rng() & 1) ? KernelSpec::linear() : KernelSpec::rbf(uni(rng, 0.2, 5.0));
    hp.max_passes = 10000;
    const auto st = solve_dual(x, y, hp);
    if (!st.converged) {
      rep.fail(c, "solver hit the iteration budget");
      continue;
    }
    double balance = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (st.alphas[k] < 0.0 || st.alphas[k] > hp.c) rep.fail(c, "alpha outside [0, c]");
      if (st.slacks[k] < 0.0) rep.fail(c, "negative slack");
      balance += st.alphas[k] * to_sign(y[k]);
    }
    if (std::abs(balance) > hp.kkt_tol) rep.fail(c, "sum alpha y != 0");

    const auto model = train_svc(x, y, hp, c);
    const double tol = 2.0 * hp.kkt_tol + 1e-9;
    for (std::size_t k = 0; k < n; ++k) {
      const double margin = to_sign(y[k]) * decision_value(model, x.row(k));
      if (st.alphas[k] == 0.0 && margin < 1.0 - tol) rep.fail(c, "alpha = 0 but y f < 1");
      if (st.alphas[k] == hp.c && margin > 1.0 + tol) rep.fail(c, "alpha = c but y f > 1");
      if (st.alphas[k] > 0.0 && st.alphas[k] < hp.c && std::abs(margin - 1.0) > tol) {
        rep.fail(c, "free alpha off the margin");
      }
      if (std::abs(st.slacks[k] - std::max(0.0, 1.0 - margin)) > 1e-9) rep.fail(c, "slack != hinge");
    }
    const double recomputed = dual_objective(x, y, st.kernel, st.alphas);
    if (std::abs(recomputed - st.objective) > 1e-8 * std::max(1.0, std::abs(recomputed))) {
      rep.fail(c, "reported objective differs from recomputation");
    }
    if (model.coefficients.size() != model.support_vectors.rows()) rep.fail(c, "sv/coef length");
    const auto again = train_svc(x, y, hp, c);
    if (again.coefficients != model.coefficients || again.bias != model.bias) rep.fail(c, "not deterministic");
  }
  return rep;
}

PropertyReport guard_band_nesting_properties(std::size_t cases, std::uint64_t seed) {
  PropertyReport rep{"guard-band label nesting"};
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++rep.cases) {
    const std::size_t n_ret = pick(rng, 1, 3);
    const std::size_t n_elim = pick(rng, 1, 2);
    const auto ds = random_normalized(rng, n_ret + n_elim, pick(rng, 10, 40));
    const auto names = ds.spec_names();
    const std::vector<std::string> retained(names.begin(), names.begin() + static_cast<long>(n_ret));
    const std::vector<std::string> eliminated(names.begin() + static_cast<long>(n_ret), names.end());
    const double delta = (c % 5 == 0) ? 0.0 : uni(rng, 0.0, 0.2);

    const auto labels = guard_band_labels(ds, eliminated, delta);
    const auto expect_tight = label_pass_fail(ds, eliminated, -delta);
    const auto expect_loose = label_pass_fail(ds, eliminated, delta);
    if (labels.tight != expect_tight || labels.loose != expect_loose) rep.fail(c, "labels differ from shrunk/widened ranges");
    for (std::size_t k = 0; k < ds.size(); ++k) {
      if (labels.tight.labels[k] == Label::Pass && labels.loose.labels[k] != Label::Pass) {
        rep.fail(c, "tight Pass but loose Fail");
      }
    }

    const auto count_pass = [](const LabelVector& l) { return l.count(Label::Pass); };
    const bool trainable = count_pass(labels.tight) > 0 && count_pass(labels.tight) < ds.size() &&
                           count_pass(labels.loose) > 0 && count_pass(labels.loose) < ds.size();
    if (!trainable) continue;
    Hyperparams hp;
    const auto gb = train_guard_band(ds, retained, eliminated, delta, hp, c);
    if (gb.tight.kernel != gb.loose.kernel && delta == 0.0) rep.fail(c, "delta 0 but different kernels");
    if (gb.tight.dim() != n_ret || gb.loose.dim() != n_ret) rep.fail(c, "model input dimension");
    std::vector<double> probe(n_ret);
    for (int p = 0; p < 20; ++p) {
      for (auto& v : probe) v = uni(rng, -0.3, 1.3);
      const bool t = predict(gb.tight, probe) == Label::Pass;
      const bool l = predict(gb.loose, probe) == Label::Pass;
      const auto got = classify(gb, probe);
      const auto want = t == l ? (t ? TriState::Good : TriState::Bad) : TriState::GuardBand;
      if (got != want) rep.fail(c, "classify disagrees with sub-model predictions");
      if (delta == 0.0 && got == TriState::GuardBand) rep.fail(c, "guard band with delta 0");
    }
  }
  return rep;
}

PropertyReport compactor_partition_properties(std::size_t cases, std::uint64_t seed) {
  PropertyReport rep{"compactor partition/acceptance soundness"};
  Rng rng(seed);
  const double tolerances[] = {0.0, 0.01, 0.02, 0.05, 0.2, 1.0};
  const double deltas[] = {0.0, 0.01, 0.05};
  for (std::size_t c = 0; c < cases; ++c, ++rep.cases) {
    GeneratorConfig g;
    g.kind = PopulationKind::PlantedRedundancy;
    g.noise_scale = uni(rng, 0.0, 0.02);
    g.seed = rng();
    g.n = pick(rng, 30, 60);
    const auto train = normalize(generate(g));
    g.seed = rng();
    g.n = 30;
    const auto test = normalize(generate(g));
    const auto names = train.spec_names();

    CompactionConfig cfg;
    cfg.e_T = tolerances[pick(rng, 0, 5)];
    cfg.delta = deltas[pick(rng, 0, 2)];
    cfg.seed = rng();
    if (rng() & 1) {
      auto perm = names;
      std::shuffle(perm.begin(), perm.end(), rng);
      perm.resize(pick(rng, 1, perm.size()));
      cfg.ordering = TestOrdering::fixed(perm);
    }

    const auto res = compact(train, test, cfg);
    std::set<std::string> all(names.begin(), names.end());
    std::set<std::string> ret(res.retained.begin(), res.retained.end());
    std::set<std::string> eli(res.eliminated.begin(), res.eliminated.end());
    std::set<std::string> both;
    std::set_union(ret.begin(), ret.end(), eli.begin(), eli.end(), std::inserter(both, both.end()));
    if (both != all || ret.size() + eli.size() != all.size()) rep.fail(c, "retained/eliminated not a partition");
    if (ret.size() != res.retained.size() || eli.size() != res.eliminated.size()) rep.fail(c, "duplicate names");
    if (res.retained.empty()) rep.fail(c, "every test eliminated");
    if (res.history.size() != res.order.size()) rep.fail(c, "history skips a candidate");

    std::vector<std::string> accepted;
    for (std::size_t k = 0; k < res.history.size(); ++k) {
      const auto& s = res.history[k];
      if (s.candidate != res.order[k]) rep.fail(c, "history out of order");
      if (s.accepted) {
        accepted.push_back(s.candidate);
        if (!(s.metrics.e_p <= cfg.e_T)) rep.fail(c, "accepted step with e_p > e_T");
      }
      if (s.metrics.n_total > 0 &&
          s.metrics.n_correct + s.metrics.n_yield_loss + s.metrics.n_defect_escape + s.metrics.n_guard !=
              s.metrics.n_total) {
        rep.fail(c, "step counts do not sum to N");
      }
      if (k + 1 < res.history.size()) {
        const auto next = res.history[k + 1].feature_dim;
        const auto expect = s.accepted ? s.feature_dim - 1 : s.feature_dim;
        if (next != expect) rep.fail(c, "feature dimension not monotone");
      }
    }
    if (accepted != res.eliminated) rep.fail(c, "eliminated differs from accepted steps");
    if (res.final_model.has_value() != !res.eliminated.empty()) rep.fail(c, "final model presence");
    if (res.final_model && (res.final_model->eliminated_specs != res.eliminated ||
                            res.final_model->retained_specs != res.retained)) {
      rep.fail(c, "final model specs");
    }
    if (cfg.delta == 0.0) {
      for (const auto& s : res.history) {
        if (s.metrics.n_guard != 0) rep.fail(c, "guard band with delta 0");
      }
    }
    if (c % 25 == 0) {
      const auto again = compact(train, test, cfg);
      if (again.eliminated != res.eliminated || again.history.size() != res.history.size()) {
        rep.fail(c, "not deterministic");
      }
      for (std::size_t k = 0; k < std::min(again.history.size(), res.history.size()); ++k) {
        const auto& a = again.history[k].metrics;
        const auto& b = res.history[k].metrics;
        if (a.n_correct != b.n_correct || a.n_guard != b.n_guard || a.n_yield_loss != b.n_yield_loss) {
          rep.fail(c, "step metrics not deterministic");
        }
      }
    }
  }
  return rep;
}

PropertyReport metrics_count_properties(std::size_t cases, std::uint64_t seed) {
  PropertyReport rep{"metrics count-sum"};
  Rng rng(seed);
  for (std::size_t c = 0; c < cases; ++c, ++rep.cases) {
    const std::size_t n = pick(rng, 1, 500);
    const double p_pass = uni(rng, 0.0, 1.0);
    const double p_guard = uni(rng, 0.0, 0.5);
    LabelVector truth{{"s"}, {}};
    std::vector<TriState> preds;
    std::size_t good_ok = 0, bad_ok = 0, yl = 0, de = 0, gb = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const bool pass = uni(rng, 0.0, 1.0) < p_pass;
      truth.labels.push_back(pass ? Label::Pass : Label::Fail);
      TriState t = uni(rng, 0.0, 1.0) < p_guard ? TriState::GuardBand
                   : (rng() & 1)                ? TriState::Good
                                                : TriState::Bad;
      preds.push_back(t);
      if (t == TriState::GuardBand) ++gb;
      else if (t == TriState::Good) (pass ? good_ok : de)++;
      else (pass ? yl : bad_ok)++;
    }
    const auto m = compute_metrics(truth, preds);
    if (m.n_correct + m.n_yield_loss + m.n_defect_escape + m.n_guard != n) rep.fail(c, "counts do not sum to N");
    if (m.n_correct != good_ok + bad_ok || m.n_yield_loss != yl || m.n_defect_escape != de || m.n_guard != gb) {
      rep.fail(c, "counts differ from direct tally");
    }
    const double N = static_cast<double>(n);
    if (std::abs(m.yield_loss_pct - 100.0 * yl / N) > 1e-9 || std::abs(m.defect_escape_pct - 100.0 * de / N) > 1e-9 ||
        std::abs(m.guard_pct - 100.0 * gb / N) > 1e-9 || std::abs(m.e_p - (yl + de) / N) > 1e-12) {
      rep.fail(c, "percentages differ from direct tally");
    }
  }
  return rep;
}

}  // namespace sctest
