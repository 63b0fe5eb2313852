#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "speccompact/error.hpp"

using namespace speccompact;
using namespace speccompact::cli;

namespace {

// I/O failures exit 1; everything else the user can fix in the inputs exits 2.
int exit_code(ErrorCode code) { return code == ErrorCode::IoError ? 1 : 2; }

void load_config(Globals& g) {
  if (g.config_path.empty()) return;
  std::ifstream in(g.config_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + g.config_path);
  try {
    g.config = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config " + g.config_path + ": " + e.what());
  }
  if (!g.config.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  for (const char* key : {"seed", "out"}) {
    if (!g.config.contains(key)) continue;
    const auto& v = g.config[key];
    if (key[0] == 's' ? !v.is_number_unsigned() : !v.is_string()) {
      throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' has the wrong type");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Specification test compaction with guard-banded classifiers"};
  app.set_version_flag("--version", SPECCOMPACT_VERSION);
  app.require_subcommand(1);

  Globals g;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  app.add_option("--seed", seed, "master seed (default 1)");
  app.add_option("--config", g.config_path, "JSON config with per-subcommand sections");
  app.add_option("--out", out, "output directory (default $SPECCOMPACT_OUT or .)");
  app.add_flag("--quiet", g.quiet, "suppress summary output");

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "write a synthetic device population");
  generate->add_option("--kind", gen.kind, "opamp, accel or planted");
  generate->add_option("--n", gen.n, "number of devices");
  generate->add_option("--noise", gen.noise, "measurement noise scale");
  generate->add_option("--variation", gen.variation, "latent parameter variation (fraction)");
  generate->add_option("--dependence", gen.dependence, "planted dependence, e.g. s3=mean(s1,s2)");

  CompactOptions cmp;
  auto* compact = app.add_subcommand("compact", "eliminate redundant specification tests");
  compact->add_option("--train", cmp.train, "training population CSV");
  compact->add_option("--test", cmp.test, "evaluation population CSV");
  compact->add_option("--data", cmp.data, "single population CSV to split into train/test");
  compact->add_option("--split", cmp.split, "training fraction for --data (default 0.5)");
  compact->add_option("--specs", cmp.specs, "spec-set JSON (default: specs.json beside the data)");
  compact->add_option("--e-t", cmp.e_T, "tolerated prediction error");
  compact->add_option("--delta", cmp.delta, "guard-band half-width, normalized units");
  compact->add_option("--c", cmp.c, "box constraint");
  compact->add_option("--kernel", cmp.kernel, "rbf or linear");
  compact->add_option("--gamma", cmp.gamma, "RBF width");
  compact->add_option("--order", cmp.order, "'marginal' or a comma list of spec names");
  compact->add_option("--grid-bins", cmp.grid_bins, "compact training data on a grid with this many bins");
  compact->add_option("--train-sizes", cmp.train_sizes, "comma list of training-set sizes to sweep")
      ->delimiter(',');
  compact->add_option("--cost", cmp.cost, "per-stage test cost for the savings estimate");
  compact->add_option("--stages", cmp.stages, "number of test stages (default 3)");

  ClassifyOptions cls;
  auto* classify = app.add_subcommand("classify", "sort devices into Good/Bad/GuardBand");
  classify->add_option("--model", cls.model, "guard-band model JSON");
  classify->add_option("--lut", cls.lut, "lookup table file");
  classify->add_option("--data", cls.data, "device measurements CSV");
  classify->add_option("--specs", cls.specs, "spec-set JSON (default: specs.json beside the data)");
  classify->add_option("--truth", cls.truth, "specs whose pass/fail is the ground truth")->delimiter(',');
  classify->add_option("--cost", cls.cost, "per-stage test cost for the savings estimate");
  classify->add_option("--stages", cls.stages, "number of test stages (default 3)");

  ExportLutOptions lut;
  auto* export_lut = app.add_subcommand("export-lut", "tabulate a guard-band model on a grid");
  export_lut->add_option("--model", lut.model, "guard-band model JSON");
  export_lut->add_option("--bins", lut.bins, "bins per retained spec (default 50)");
  export_lut->add_option("--lo", lut.lo, "lower grid bound, normalized");
  export_lut->add_option("--hi", lut.hi, "upper grid bound, normalized");
  export_lut->add_option("--cell-limit", lut.cell_limit, "largest allowed cell count");

  for (auto* sub : {generate, compact, classify, export_lut}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    load_config(g);
    g.seed = seed ? *seed : g.config.value("seed", std::uint64_t{1});
    if (out) {
      g.out = *out;
    } else if (const char* env = std::getenv("SPECCOMPACT_OUT"); env != nullptr && *env != '\0') {
      g.out = env;
    } else {
      g.out = g.config.value("out", std::string("."));
    }

    if (generate->parsed()) return run_generate(g, gen);
    if (compact->parsed()) return run_compact(g, cmp);
    if (classify->parsed()) return run_classify(g, cls);
    return run_export_lut(g, lut);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.message() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
