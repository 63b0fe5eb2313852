#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

#include "manifest.hpp"
#include "speccompact/compactor.hpp"
#include "speccompact/datamodel.hpp"
#include "speccompact/error.hpp"
#include "speccompact/grid.hpp"
#include "speccompact/guardband.hpp"
#include "speccompact/seed.hpp"
#include "speccompact/syngen.hpp"

namespace speccompact::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const json& Globals::section(const std::string& name) const {
  static const json empty = json::object();
  auto it = config.find(name);
  return it != config.end() && it->is_object() ? *it : empty;
}

namespace {

template <class T>
T pick(const std::optional<T>& flag, const json& sec, const char* key, T fallback) {
  if (flag) return *flag;
  auto it = sec.find(key);
  if (it == sec.end() || it->is_null()) return fallback;
  try {
    return it->template get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "': " + e.what());
  }
}

template <class T>
std::optional<T> pick_opt(const std::optional<T>& flag, const json& sec, const char* key) {
  if (flag) return flag;
  auto it = sec.find(key);
  if (it == sec.end() || it->is_null()) return std::nullopt;
  return pick<T>(std::nullopt, sec, key, T{});
}

template <class T>
std::vector<T> pick_list(const std::vector<T>& flag, const json& sec, const char* key) {
  if (!flag.empty()) return flag;
  return pick<std::vector<T>>(std::nullopt, sec, key, {});
}

std::string require(const std::optional<std::string>& v, const char* what) {
  if (!v || v->empty()) throw Error(ErrorCode::InvalidConfig, std::string("missing required ") + what);
  return *v;
}

void prepare_out(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

fs::path specs_path_for(const fs::path& data, const std::optional<std::string>& specs) {
  if (specs && !specs->empty()) return *specs;
  return data.parent_path() / "specs.json";
}

// Loads a CSV whose columns may be any subset of the spec set, in any order.
Dataset load_measured(const fs::path& data, const fs::path& specs_path, RunManifest& manifest,
                      const std::string& role) {
  const auto specs = load_spec_set(specs_path);
  const auto header = read_dataset_header(data);
  std::vector<SpecificationDef> ordered;
  for (const auto& name : header) {
    auto it = std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.name == name; });
    if (it == specs.end()) {
      throw Error(ErrorCode::UnknownSpecName,
                  "column '" + name + "' of " + data.string() + " is not in " + specs_path.string());
    }
    ordered.push_back(*it);
  }
  auto ds = load_dataset(data, std::move(ordered));
  manifest.add_input(role, data);
  manifest.add_input(role + "-specs", specs_path);
  return ds;
}

void require_columns(const Dataset& ds, std::span<const std::string> names, const std::string& what) {
  const auto have = ds.spec_names();
  for (const auto& n : names) {
    if (std::find(have.begin(), have.end(), n) == have.end()) {
      throw Error(ErrorCode::MissingColumn, "dataset is missing " + what + " spec '" + n + "'");
    }
  }
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * fraction);
  return buf;
}

std::string join(std::span<const std::string> items) {
  std::string s;
  for (const auto& x : items) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    auto item = text.substr(start, comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
    start = comma + 1;
  }
  return out;
}

CostReport staged_cost(const Dataset& ds, std::span<const std::string> retained, std::size_t n_guard,
                       std::uint64_t stages, double per_stage) {
  const auto stage1 = label_pass_fail(ds, retained);
  return cost_savings(ds.size(), n_guard, stage1.count(Label::Pass), stages, per_stage);
}

void finish(const Globals& g, RunManifest& manifest) { manifest.write(g.out / "manifest.json"); }

}  // namespace

int run_generate(const Globals& g, const GenerateOptions& o) {
  const auto& sec = g.section("generate");
  GeneratorConfig cfg;
  cfg.kind = population_kind_from_string(pick(o.kind, sec, "kind", std::string("opamp")));
  cfg.n = pick(o.n, sec, "n", std::size_t{1000});
  cfg.seed = g.seed;
  cfg.param_variation = pick(o.variation, sec, "variation", 0.10);
  const double default_noise = cfg.kind == PopulationKind::AccelTriTemp ? 0.002 : 0.005;
  cfg.noise_scale = pick(o.noise, sec, "noise", default_noise);
  for (const auto& d : pick_list(o.dependence, sec, "dependence")) cfg.dependence.push_back(parse_dependence(d));
  validate(cfg);

  prepare_out(g.out);
  RunManifest manifest("generate", g.seed, g.config_path);
  Dataset ds;
  std::optional<PlantedTruth> truth;
  {
    PhaseTimer t(manifest, "generate");
    if (cfg.kind == PopulationKind::PlantedRedundancy) {
      auto [pop, planted] = generate_planted(cfg);
      ds = std::move(pop);
      truth = std::move(planted);
    } else {
      ds = generate(cfg);
    }
  }
  {
    PhaseTimer t(manifest, "write");
    save_dataset(g.out / "population.csv", ds);
    save_spec_set(g.out / "specs.json", ds.specs());
    manifest.add_output("population", g.out / "population.csv");
    manifest.add_output("specs", g.out / "specs.json");
    if (truth) {
      json deps = json::array();
      for (const auto& d : truth->dependence) deps.push_back(to_string(d));
      write_text(g.out / "truth.json", json{{"redundant", truth->redundant}, {"dependence", deps}}.dump(2) + "\n");
      manifest.add_output("truth", g.out / "truth.json");
    }
  }
  finish(g, manifest);

  const double y = yield(label_pass_fail(ds, ds.spec_names()));
  if (!g.quiet) {
    std::cout << "generated " << ds.size() << " " << to_string(cfg.kind) << " records, yield " << percent(y)
              << '\n';
  }
  return 0;
}

int run_compact(const Globals& g, const CompactOptions& o) {
  const auto& sec = g.section("compact");
  CompactionConfig cfg;
  if (!sec.empty()) from_json(sec, cfg);
  cfg.seed = g.seed;
  if (o.e_T) cfg.e_T = *o.e_T;
  if (o.delta) cfg.delta = *o.delta;
  if (o.c) cfg.hp.c = *o.c;
  if (o.kernel) {
    if (*o.kernel == "linear") {
      cfg.hp.kernel = KernelSpec::linear();
    } else if (*o.kernel == "rbf") {
      cfg.hp.kernel = KernelSpec::rbf(cfg.hp.kernel.gamma);
    } else {
      throw Error(ErrorCode::InvalidConfig, "kernel must be 'rbf' or 'linear'");
    }
  }
  if (o.gamma) cfg.hp.kernel.gamma = *o.gamma;
  if (o.order) {
    cfg.ordering = *o.order == "marginal" ? TestOrdering::marginal() : TestOrdering::fixed(split_list(*o.order));
  }
  if (o.grid_bins) {
    cfg.grid = GridSpec::uniform({"*"}, *o.grid_bins, -0.25, 1.25, std::numeric_limits<std::uint64_t>::max());
  }
  const auto sizes = pick_list(o.train_sizes, sec, "train_sizes");
  const auto cost = pick_opt(o.cost, sec, "cost");
  const auto stages = pick(o.stages, sec, "stages", std::uint64_t{3});

  prepare_out(g.out);
  RunManifest manifest("compact", g.seed, g.config_path);

  Dataset train, test;
  {
    PhaseTimer t(manifest, "load");
    const auto data = pick_opt(o.data, sec, "data");
    if (data) {
      const auto fraction = pick(o.split, sec, "split", 0.5);
      auto ds = load_measured(*data, specs_path_for(*data, pick_opt(o.specs, sec, "specs")), manifest, "data");
      std::tie(train, test) = split(ds, fraction, derive_seed(g.seed, "split"));
    } else {
      const fs::path train_path = require(pick_opt(o.train, sec, "train"), "--train (or --data)");
      const fs::path test_path = require(pick_opt(o.test, sec, "test"), "--test");
      const auto specs = pick_opt(o.specs, sec, "specs");
      train = load_measured(train_path, specs_path_for(train_path, specs), manifest, "train");
      test = load_measured(test_path, specs_path_for(test_path, specs), manifest, "test");
    }
    train = normalize(train);
    test = normalize(test);
  }
  validate(cfg, train.spec_names());
  for (auto s : sizes) {
    if (s < 2 || s > train.size()) {
      throw Error(ErrorCode::InvalidConfig, "train size " + std::to_string(s) + " outside [2, " +
                                                std::to_string(train.size()) + "]");
    }
  }

  const bool sweep = !sizes.empty();
  const auto run_sizes = sweep ? sizes : std::vector<std::size_t>{train.size()};
  json sweep_reports = json::array();
  std::string sweep_csv = "train_size," + step_series_csv({});
  CompactionResult last;
  std::optional<CostReport> last_cost;

  for (auto size : run_sizes) {
    const std::string tag = sweep ? "_n" + std::to_string(size) : "";
    std::vector<StepMetrics> partial;
    try {
      PhaseTimer t(manifest, "compact" + tag);
      last = compact(train.head(size), test, cfg, [&](const StepMetrics& s) { partial.push_back(s); });
    } catch (const Error& e) {
      write_text(g.out / ("steps" + tag + ".csv"), step_series_csv(partial));
      write_text(g.out / "FAILED", std::string(to_string(e.code())) + ": " + e.what() + "\n");
      manifest.add_output("partial-steps", g.out / ("steps" + tag + ".csv"));
      manifest.add_output("failure-marker", g.out / "FAILED");
      manifest.set_status("failed");
      finish(g, manifest);
      throw;
    }

    last_cost.reset();
    if (cost) {
      std::size_t n_guard = 0;
      if (last.final_model) {
        for (auto p : classify_all(*last.final_model, test.features(last.retained))) n_guard += p == TriState::GuardBand;
      }
      last_cost = staged_cost(test, last.retained, n_guard, stages, *cost);
    }

    const auto steps = step_series_csv(last.history);
    write_text(g.out / ("steps" + tag + ".csv"), steps);
    manifest.add_output("steps" + tag, g.out / ("steps" + tag + ".csv"));
    if (sweep) {
      auto report = compaction_report(cfg, last, last_cost);
      report["train_size"] = size;
      sweep_reports.push_back(std::move(report));
      // Prefix every data row with the training size.
      std::size_t pos = steps.find('\n') + 1;
      while (pos < steps.size()) {
        const auto nl = steps.find('\n', pos);
        sweep_csv += std::to_string(size) + "," + steps.substr(pos, nl - pos + 1);
        pos = nl + 1;
      }
    }
    if (!g.quiet) {
      std::cout << (sweep ? "n=" + std::to_string(size) + " " : "") << "eliminated "
                << last.eliminated.size() << " of " << last.order.size() << ": "
                << (last.eliminated.empty() ? "(none)" : join(last.eliminated)) << '\n';
      for (auto it = last.history.rbegin(); it != last.history.rend(); ++it) {
        if (it->accepted) {
          std::cout << "  final model: " << format_metrics_line(it->metrics) << '\n';
          break;
        }
      }
      if (last_cost) std::cout << "  cost: " << format_cost_line(*last_cost) << '\n';
    }
  }

  json report = sweep ? json{{"sweep", sweep_reports}} : compaction_report(cfg, last, last_cost);
  write_text(g.out / "report.json", report.dump(2) + "\n");
  manifest.add_output("report", g.out / "report.json");
  if (sweep) {
    write_text(g.out / "sweep.csv", sweep_csv);
    manifest.add_output("sweep", g.out / "sweep.csv");
  }
  if (last.final_model) {
    save_guard_band((g.out / "model.json").string(), *last.final_model);
    manifest.add_output("model", g.out / "model.json");
  } else if (!g.quiet) {
    std::cout << "no spec eliminated; model.json not written\n";
  }
  finish(g, manifest);
  return 0;
}

int run_classify(const Globals& g, const ClassifyOptions& o) {
  const auto& sec = g.section("classify");
  const auto model_path = pick_opt(o.model, sec, "model");
  const auto lut_path = pick_opt(o.lut, sec, "lut");
  if (model_path.has_value() == lut_path.has_value()) {
    throw Error(ErrorCode::InvalidConfig, "give exactly one of --model or --lut");
  }
  const fs::path data = require(pick_opt(o.data, sec, "data"), "--data");
  auto truth_specs = pick_list(o.truth, sec, "truth");
  const auto cost = pick_opt(o.cost, sec, "cost");
  const auto stages = pick(o.stages, sec, "stages", std::uint64_t{3});

  prepare_out(g.out);
  RunManifest manifest("classify", g.seed, g.config_path);

  std::optional<GuardBandModel> model;
  std::optional<LookupTable> lut;
  std::vector<std::string> retained;
  {
    PhaseTimer t(manifest, "load");
    if (model_path) {
      model = load_guard_band(*model_path);
      retained = model->retained_specs;
      if (truth_specs.empty()) truth_specs = model->eliminated_specs;
      manifest.add_input("model", *model_path);
    } else {
      lut = load_lut(*lut_path);
      retained = lut->grid.dims;
      manifest.add_input("lut", *lut_path);
    }
  }
  const auto raw = load_measured(data, specs_path_for(data, pick_opt(o.specs, sec, "specs")), manifest, "data");
  require_columns(raw, retained, "retained");
  const auto ds = normalize(raw);

  std::vector<TriState> predictions;
  {
    PhaseTimer t(manifest, "classify");
    const auto x = ds.features(retained);
    if (model) {
      predictions = classify_all(*model, x);
    } else {
      for (std::size_t k = 0; k < x.rows(); ++k) predictions.push_back(lut_classify(*lut, x.row(k)));
    }
  }

  std::string csv = "id,disposition\n";
  std::size_t n_guard = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    csv += ds.records()[k].id + "," + std::string(to_string(predictions[k])) + "\n";
    n_guard += predictions[k] == TriState::GuardBand;
  }
  write_text(g.out / "dispositions.csv", csv);
  manifest.add_output("dispositions", g.out / "dispositions.csv");

  json summary = {{"n_devices", ds.size()}, {"retained", retained}};
  const auto have = ds.spec_names();
  const bool has_truth = !truth_specs.empty() && std::all_of(truth_specs.begin(), truth_specs.end(), [&](const auto& s) {
    return std::find(have.begin(), have.end(), s) != have.end();
  });
  if (has_truth) {
    const auto m = compute_metrics(label_pass_fail(ds, truth_specs), predictions);
    summary["truth_specs"] = truth_specs;
    summary["metrics"] = m;
    if (!g.quiet) std::cout << format_metrics_line(m) << '\n';
  } else {
    summary["metrics"] = nullptr;
    std::map<TriState, std::size_t> hist;
    for (auto p : predictions) ++hist[p];
    if (!g.quiet) {
      std::cout << "Good " << hist[TriState::Good] << " Bad " << hist[TriState::Bad] << " GuardBand "
                << hist[TriState::GuardBand] << " (no ground-truth columns)\n";
    }
  }
  if (cost) {
    const auto r = staged_cost(ds, retained, n_guard, stages, *cost);
    summary["cost"] = r;
    if (!g.quiet) std::cout << format_cost_line(r) << '\n';
  }
  write_text(g.out / "summary.json", summary.dump(2) + "\n");
  manifest.add_output("summary", g.out / "summary.json");
  finish(g, manifest);
  return 0;
}

int run_export_lut(const Globals& g, const ExportLutOptions& o) {
  const auto& sec = g.section("export_lut");
  const std::string model_path = require(pick_opt(o.model, sec, "model"), "--model");
  const auto bins = pick(o.bins, sec, "bins", std::size_t{50});
  const auto lo = pick(o.lo, sec, "lo", -0.25);
  const auto hi = pick(o.hi, sec, "hi", 1.25);
  const auto limit = pick(o.cell_limit, sec, "cell_limit", kDefaultCellLimit);

  RunManifest manifest("export-lut", g.seed, g.config_path);
  const auto model = load_guard_band(model_path);
  const auto grid = GridSpec::uniform(model.retained_specs, bins, lo, hi, limit);
  grid.validate();

  prepare_out(g.out);
  manifest.add_input("model", model_path);
  LookupTable lut;
  {
    PhaseTimer t(manifest, "build");
    lut = build_lookup_table(model, grid);
  }
  save_lut(g.out / "table.lut", lut);
  manifest.add_output("lut", g.out / "table.lut");
  finish(g, manifest);

  if (!g.quiet) {
    std::map<TriState, std::size_t> hist;
    for (auto t : lut.attributes) ++hist[t];
    std::cout << lut.attributes.size() << " cells over " << join(grid.dims) << ": G " << hist[TriState::Good]
              << " B " << hist[TriState::Bad] << " U " << hist[TriState::GuardBand] << '\n';
  }
  return 0;
}

}  // namespace speccompact::cli
