#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "speccompact/datamodel.hpp"

namespace speccompact {

enum class PopulationKind { OpAmpLike, AccelTriTemp, PlantedRedundancy };

std::string_view to_string(PopulationKind k);
PopulationKind population_kind_from_string(std::string_view s);

enum class Combiner {
  Mean,             // mean of the source values
  AbsDeviationSum,  // sum of |source - source nominal|
};

/// target = combiner(sources), in raw units.
struct PlantedDependence {
  std::string target;
  std::vector<std::string> sources;
  Combiner combiner = Combiner::Mean;

  friend bool operator==(const PlantedDependence&, const PlantedDependence&) = default;
};

/// Parses "s3=mean(s1,s2)" or "s3=absdev(s1,s2)".
PlantedDependence parse_dependence(std::string_view text);
std::string to_string(const PlantedDependence& d);

/// An independent planted spec is sampled uniformly from [sample_lo, sample_hi].
struct PlantedSpec {
  SpecificationDef def;
  double sample_lo = 0.0;
  double sample_hi = 1.0;
};

struct GeneratorConfig {
  PopulationKind kind = PopulationKind::OpAmpLike;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  /// Latent parameters vary uniformly within +/- this fraction of nominal.
  double param_variation = 0.10;
  /// Measurement noise. OpAmp/Accel: relative (log-domain) half-width;
  /// Planted: half-width on each dependent spec as a fraction of its range.
  double noise_scale = 0.0;
  std::vector<PlantedDependence> dependence;  // planted only
  std::vector<PlantedSpec> planted_specs;     // planted only; empty = s1..s4 defaults
};

void validate(const GeneratorConfig& cfg);

struct PlantedTruth {
  std::vector<std::string> redundant;
  std::vector<PlantedDependence> dependence;
};

/// Op-amp specification set (11 specs).
std::vector<SpecificationDef> opamp_specs();
/// Accelerometer specs at room temperature (5 specs).
std::vector<SpecificationDef> accel_base_specs();
/// All 15 accelerometer columns: each base spec at 14.85 C, 80 C and -40 C.
std::vector<SpecificationDef> accel_specs();
std::vector<std::string> accel_column_names(std::string_view temperature_suffix);

inline constexpr std::string_view kRoomSuffix = "_14p85C";
inline constexpr std::string_view kHotSuffix = "_80C";
inline constexpr std::string_view kColdSuffix = "_m40C";

/// Default planted population: s1, s2 wide-spread independent specs, s3 =
/// mean(s1, s2) on a narrower range, s4 independent with ~9% fall-out.
std::vector<PlantedSpec> default_planted_specs();
std::vector<PlantedDependence> default_planted_dependence();
std::vector<SpecificationDef> spec_defs(std::span<const PlantedSpec> specs);

/// Value of the combiner applied to the given source values.
double combine(Combiner c, std::span<const double> values, std::span<const SpecificationDef> sources);

/// Record k draws from its own generator seeded with
/// derive_seed(cfg.seed, "record", k), so output is independent of the order
/// in which records are produced.
Dataset generate(const GeneratorConfig& cfg);
std::pair<Dataset, PlantedTruth> generate_planted(const GeneratorConfig& cfg);

inline constexpr std::size_t kOpAmpLatentCount = 10;
inline constexpr std::size_t kAccelLatentCount = 7;

/// Noise-free spec values for one latent perturbation vector; each entry is
/// a relative deviation from its parameter's nominal, within +/- variation.
std::vector<double> opamp_response(std::span<const double> latent);
/// All 15 accelerometer columns (room, hot, cold) for one latent vector.
std::vector<double> accel_response(std::span<const double> latent, double param_variation);

}  // namespace speccompact
