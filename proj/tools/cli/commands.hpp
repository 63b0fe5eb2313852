#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace speccompact::cli {

// Flags left unset fall back to the matching key of the config file's
// subcommand section, then to the built-in default.
struct Globals {
  std::uint64_t seed = 1;
  std::string config_path;
  nlohmann::json config = nlohmann::json::object();
  std::filesystem::path out = ".";
  bool quiet = false;

  /// Section of the config file for one subcommand (empty object if absent).
  const nlohmann::json& section(const std::string& name) const;
};

struct GenerateOptions {
  std::optional<std::string> kind;
  std::optional<std::size_t> n;
  std::optional<double> noise;
  std::optional<double> variation;
  std::vector<std::string> dependence;
};

struct CompactOptions {
  std::optional<std::string> train, test, data, specs;
  std::optional<double> split;
  std::optional<double> e_T, delta, c, gamma;
  std::optional<std::string> kernel;
  std::optional<std::string> order;
  std::optional<std::size_t> grid_bins;
  std::vector<std::size_t> train_sizes;
  std::optional<double> cost;
  std::optional<std::uint64_t> stages;
};

struct ClassifyOptions {
  std::optional<std::string> model, lut, data, specs;
  std::vector<std::string> truth;
  std::optional<double> cost;
  std::optional<std::uint64_t> stages;
};

struct ExportLutOptions {
  std::optional<std::string> model;
  std::optional<std::size_t> bins;
  std::optional<double> lo, hi;
  std::optional<std::uint64_t> cell_limit;
};

int run_generate(const Globals& g, const GenerateOptions& o);
int run_compact(const Globals& g, const CompactOptions& o);
int run_classify(const Globals& g, const ClassifyOptions& o);
int run_export_lut(const Globals& g, const ExportLutOptions& o);

}  // namespace speccompact::cli
