#include "speccompact/syngen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "rng.hpp"
#include "speccompact/error.hpp"
#include "speccompact/seed.hpp"

namespace speccompact {

using detail::UniformSource;

std::string_view to_string(PopulationKind k) {
  switch (k) {
    case PopulationKind::OpAmpLike: return "opamp";
    case PopulationKind::AccelTriTemp: return "accel";
    case PopulationKind::PlantedRedundancy: return "planted";
  }
  return "?";
}

PopulationKind population_kind_from_string(std::string_view s) {
  if (s == "opamp") return PopulationKind::OpAmpLike;
  if (s == "accel") return PopulationKind::AccelTriTemp;
  if (s == "planted") return PopulationKind::PlantedRedundancy;
  throw Error(ErrorCode::InvalidConfig, "unknown population kind '" + std::string(s) + "'");
}

namespace {

std::string strip(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

PlantedDependence parse_dependence(std::string_view text) {
  const auto eq = text.find('=');
  const auto open = text.find('(');
  const auto close = text.rfind(')');
  if (eq == std::string_view::npos || open == std::string_view::npos ||
      close == std::string_view::npos || !(eq < open && open < close)) {
    throw Error(ErrorCode::InvalidConfig,
                "dependence must look like 'target=mean(a,b)': '" + std::string(text) + "'");
  }
  PlantedDependence d;
  d.target = strip(text.substr(0, eq));
  const auto fn = strip(text.substr(eq + 1, open - eq - 1));
  if (fn == "mean") d.combiner = Combiner::Mean;
  else if (fn == "absdev") d.combiner = Combiner::AbsDeviationSum;
  else throw Error(ErrorCode::InvalidConfig, "unknown combiner '" + fn + "'");
  auto args = text.substr(open + 1, close - open - 1);
  while (!args.empty()) {
    const auto comma = args.find(',');
    d.sources.push_back(strip(args.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    args.remove_prefix(comma + 1);
  }
  if (d.target.empty() || d.sources.empty() ||
      std::any_of(d.sources.begin(), d.sources.end(), [](const auto& s) { return s.empty(); })) {
    throw Error(ErrorCode::InvalidConfig, "malformed dependence '" + std::string(text) + "'");
  }
  return d;
}

std::string to_string(const PlantedDependence& d) {
  std::string out = d.target + "=" + (d.combiner == Combiner::Mean ? "mean(" : "absdev(");
  for (std::size_t i = 0; i < d.sources.size(); ++i) out += (i ? "," : "") + d.sources[i];
  return out + ")";
}

void validate(const GeneratorConfig& cfg) {
  if (cfg.n < 1) throw Error(ErrorCode::InvalidConfig, "n must be ≥ 1");
  if (!(cfg.param_variation >= 0.0 && cfg.param_variation < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "param_variation must lie in [0, 1)");
  }
  if (!(cfg.noise_scale >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise_scale must be ≥ 0");
  if (cfg.kind != PopulationKind::PlantedRedundancy && !cfg.dependence.empty()) {
    throw Error(ErrorCode::InvalidConfig, "dependence applies to planted populations only");
  }
}

// ---------------------------------------------------------------------------
// Op-amp-like population.
//
// Ten latent device parameters (input pair W/L, load W/L, tail W/L,
// compensation cap, output stage W/L, load cap) are perturbed uniformly by
// +/- param_variation. Small-signal quantities are formed in the log domain
// (a = log(1 + u)), and each spec is nominal * exp(s * z) for a log-domain
// combination z. The scales s were fitted once by Monte Carlo so that each
// spec fails 3-5% of a +/-10% population and the joint yield is ~75%.

std::vector<SpecificationDef> opamp_specs() {
  return {
      {"gain", "-", 14000, 1000, 20000, 1.0},
      {"bandwidth_3db", "Hz", 200, 130, 10000, 1.0},
      {"unity_gain_freq", "MHz", 2.1, 1.7, 5, 1.0},
      {"slew_rate", "V/us", 0.44, 0.35, 0.55, 1.0},
      {"rise_time", "us", 8.5, 0.01, 10.5, 1.0},
      {"overshoot", "-", 0.0001, -0.00026, 0.00026, 1.0},
      {"settling_time", "ns", 895, 1, 1070, 1.0},
      {"quiescent_current", "uA", 105, 70, 125, 1.0},
      {"common_mode_gain", "-", 0.08, 0, 0.48, 1.0},
      {"power_supply_gain", "-", 0.4, 0, 0.95, 1.0},
      {"short_circuit_current", "mA", 0.5, 0, 4.2, 1.0},
  };
}

namespace {

constexpr std::size_t kOpAmpLatents = 10;
static_assert(kOpAmpLatents == kOpAmpLatentCount);
constexpr std::array<double, 11> kOpAmpScale = {2.145, 2.128, 1.512,  1.16,  1.483, 0.0009145,
                                                1.352, 1.59,  6.45,   5.476, 9.786};
constexpr std::size_t kOvershoot = 5;

std::array<double, 11> opamp_log_terms(const std::array<double, kOpAmpLatents>& a) {
  const double log_i = a[4] - a[5];
  const double gm1 = 0.5 * (a[0] - a[1] + log_i);
  const double ro = a[3] - log_i + 0.3 * a[1];
  const double gm2 = 0.5 * (a[7] - a[8] + log_i);
  const double cc = a[6];
  const double cl = a[9];

  const double gain = gm1 + ro + gm2 + 0.5 * a[3];
  const double ugf = gm1 - cc;
  const double slew = log_i - cc;
  const double overshoot = ugf - (gm2 - cl);
  return {
      gain,
      ugf - gain,                                   // 3-dB bandwidth
      ugf,                                          // unity-gain frequency
      slew,                                         // slew rate
      -ugf + 0.3 * cl,                              // rise time
      overshoot,                                    // overshoot
      -0.5 * ugf - 0.5 * slew + 0.5 * overshoot,    // settling time
      0.7 * log_i + 0.3 * (a[7] - a[8]),            // quiescent current
      a[2] - a[3] - ro + 0.5 * (a[0] - a[2]),       // common-mode gain
      cc - gm2 + 0.5 * cl,                          // power-supply gain
      a[7] - a[8] + log_i,                          // short-circuit current
  };
}

std::vector<double> opamp_values(std::span<const double> u, std::span<const double> noise,
                                 const std::vector<SpecificationDef>& specs) {
  std::array<double, kOpAmpLatents> a{};
  for (std::size_t k = 0; k < kOpAmpLatents; ++k) a[k] = std::log1p(u[k]);
  const auto z = opamp_log_terms(a);
  std::vector<double> values(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i == kOvershoot) {
      values[i] = specs[i].nominal + kOpAmpScale[i] * z[i] + noise[i] * specs[i].width();
    } else {
      values[i] = specs[i].nominal * std::exp(kOpAmpScale[i] * z[i] + noise[i]);
    }
  }
  return values;
}

std::vector<double> opamp_record(UniformSource& rng, const GeneratorConfig& cfg,
                                 const std::vector<SpecificationDef>& specs) {
  std::array<double, kOpAmpLatents> u{};
  for (auto& x : u) x = rng.symmetric(cfg.param_variation);
  std::vector<double> noise(specs.size());
  for (auto& e : noise) e = rng.symmetric(cfg.noise_scale);
  return opamp_values(u, noise, specs);
}

// ---------------------------------------------------------------------------
// Tri-temperature accelerometer-like population.
//
// Latents: beam width, beam length, proof-mass plate size, sense gap,
// relative angle, finger overlap, anchor stress coefficient. Stiffness
// k ~ w^3 / L^3, mass m ~ plate^2, damping b ~ overlap * plate / gap^3.
// Temperature enters only as an anchor shift s_T (+1 hot: anchors move
// outward, -1 cold: inward) that stiffens/softens the suspension, opens or
// closes the gap, and changes gas damping.

constexpr std::size_t kAccelLatents = 7;
static_assert(kAccelLatents == kAccelLatentCount);
constexpr double kAnchorStiffening = 0.04;
constexpr double kAnchorGapShift = 0.01;
constexpr double kDampingTempCoeff = 0.05;

struct AccelScale {
  double scale_factor = 1.0;
  double cross_axis = 3.1;
  double peak_freq = 0.58;
  double quality = 0.72;
  double bandwidth = 1.12;
};

constexpr std::array<std::string_view, 5> kAccelBaseNames = {
    "scale_factor", "cross_axis_sensitivity", "peak_frequency", "quality_factor",
    "bandwidth_3db"};

std::array<double, 5> accel_values(const std::array<double, kAccelLatents>& u,
                                   const std::array<double, kAccelLatents>& a, double variation,
                                   double shift) {
  constexpr AccelScale s{};
  const double lk = 3.0 * a[0] - 3.0 * a[1] + std::log1p(kAnchorStiffening * shift * (1.0 + 0.5 * u[6]));
  const double lm = 2.0 * a[2];
  const double lg = a[3] - kAnchorGapShift * shift;
  const double lb = a[5] - 3.0 * lg + a[2] + kDampingTempCoeff * shift;
  const double lf = 0.5 * (lk - lm);
  const double lq = 0.5 * (lk + lm) - lb;
  const double lsf = lm - lk - 2.0 * lg;
  const double angle = variation > 0.0 ? u[4] / variation : 0.0;
  return {
      9.5 * std::exp(s.scale_factor * lsf),
      s.cross_axis * angle * std::exp(lsf),
      5.6 * std::exp(s.peak_freq * lf),
      2.1 * std::exp(s.quality * lq),
      2.7 * std::exp(s.bandwidth * (lf - 0.5 * lq)),
  };
}

std::vector<double> accel_values_all(std::span<const double> u, double variation) {
  std::array<double, kAccelLatents> uu{}, a{};
  for (std::size_t k = 0; k < kAccelLatents; ++k) {
    uu[k] = u[k];
    a[k] = std::log1p(u[k]);
  }
  std::vector<double> values;
  values.reserve(15);
  for (double shift : {0.0, 1.0, -1.0}) {
    for (double v : accel_values(uu, a, variation, shift)) values.push_back(v);
  }
  return values;
}

std::vector<double> accel_record(UniformSource& rng, const GeneratorConfig& cfg,
                                 const std::vector<SpecificationDef>& specs) {
  std::array<double, kAccelLatents> u{};
  for (auto& x : u) x = rng.symmetric(cfg.param_variation);
  auto values = accel_values_all(u, cfg.param_variation);
  for (std::size_t c = 0; c < values.size(); ++c) {
    const double noise = rng.symmetric(cfg.noise_scale);
    values[c] = c % 5 == 1 ? values[c] + noise * specs[c].width() : values[c] * std::exp(noise);
  }
  return values;
}

}  // namespace

std::vector<SpecificationDef> accel_base_specs() {
  return {
      {"scale_factor", "mV/V", 9.5, 5, 30, 1.0},
      {"cross_axis_sensitivity", "mV/V", 0.0, -6, 4, 1.0},
      {"peak_frequency", "kHz", 5.6, 4, 6.2, 1.0},
      {"quality_factor", "-", 2.1, 1, 2.8, 1.0},
      {"bandwidth_3db", "kHz", 2.7, 2, 3.8, 1.0},
  };
}

std::vector<std::string> accel_column_names(std::string_view suffix) {
  std::vector<std::string> names;
  for (auto base : kAccelBaseNames) names.push_back(std::string(base) + std::string(suffix));
  return names;
}

std::vector<SpecificationDef> accel_specs() {
  std::vector<SpecificationDef> out;
  for (auto suffix : {kRoomSuffix, kHotSuffix, kColdSuffix}) {
    for (auto s : accel_base_specs()) {
      s.name += std::string(suffix);
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planted-redundancy population.

std::vector<PlantedSpec> default_planted_specs() {
  return {
      {{"s1", "-", 0.5, 0.0, 1.0, 1.0}, -0.15, 1.15},
      {{"s2", "-", 0.5, 0.0, 1.0, 1.0}, -0.15, 1.15},
      {{"s3", "-", 0.5, 0.2, 0.8, 1.0}, 0.2, 0.8},
      {{"s4", "-", 0.5, 0.0, 1.0, 1.0}, -0.05, 1.05},
  };
}

std::vector<PlantedDependence> default_planted_dependence() {
  return {{"s3", {"s1", "s2"}, Combiner::Mean}};
}

std::vector<SpecificationDef> spec_defs(std::span<const PlantedSpec> specs) {
  std::vector<SpecificationDef> out;
  for (const auto& s : specs) out.push_back(s.def);
  return out;
}

double combine(Combiner c, std::span<const double> values, std::span<const SpecificationDef> sources) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += c == Combiner::Mean ? values[i] : std::abs(values[i] - sources[i].nominal);
  }
  if (c == Combiner::Mean && !values.empty()) acc /= static_cast<double>(values.size());
  return acc;
}

namespace {

struct ResolvedDependence {
  std::size_t target;
  std::vector<std::size_t> sources;
  Combiner combiner;
};

std::vector<ResolvedDependence> resolve_dependences(const std::vector<SpecificationDef>& specs,
                                                    const std::vector<PlantedDependence>& deps) {
  auto index_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].name == name) return i;
    }
    throw Error(ErrorCode::UnknownSpecName, "dependence names unknown spec '" + name + "'");
  };
  std::unordered_set<std::string> targets;
  for (const auto& d : deps) {
    if (!targets.insert(d.target).second) {
      throw Error(ErrorCode::InvalidConfig, "spec '" + d.target + "' has two dependences");
    }
  }
  std::vector<ResolvedDependence> out;
  for (const auto& d : deps) {
    ResolvedDependence r{index_of(d.target), {}, d.combiner};
    for (const auto& s : d.sources) {
      if (targets.contains(s)) {
        throw Error(ErrorCode::CyclicDependence,
                    "'" + d.target + "' depends on dependent spec '" + s + "'");
      }
      r.sources.push_back(index_of(s));
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::pair<Dataset, PlantedTruth> generate_planted(const GeneratorConfig& cfg) {
  validate(cfg);
  const auto planted = cfg.planted_specs.empty() ? default_planted_specs() : cfg.planted_specs;
  const auto deps = cfg.dependence.empty() && cfg.planted_specs.empty() ? default_planted_dependence()
                                                                       : cfg.dependence;
  auto specs = spec_defs(planted);
  validate_spec_set(specs);
  const auto resolved = resolve_dependences(specs, deps);
  std::vector<bool> dependent(specs.size(), false);
  for (const auto& r : resolved) dependent[r.target] = true;

  std::vector<DeviceRecord> records(cfg.n);
  std::vector<double> src_values;
  std::vector<SpecificationDef> src_specs;
  for (std::size_t k = 0; k < cfg.n; ++k) {
    UniformSource rng(derive_seed(cfg.seed, "record", k));
    auto& rec = records[k];
    rec.id = "d" + std::to_string(k + 1);
    rec.values.assign(specs.size(), 0.0);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (!dependent[i]) rec.values[i] = rng.uniform(planted[i].sample_lo, planted[i].sample_hi);
    }
    for (const auto& r : resolved) {
      src_values.clear();
      src_specs.clear();
      for (auto s : r.sources) {
        src_values.push_back(rec.values[s]);
        src_specs.push_back(specs[s]);
      }
      const double noise = rng.symmetric(cfg.noise_scale) * specs[r.target].width();
      rec.values[r.target] = combine(r.combiner, src_values, src_specs) + noise;
    }
  }
  PlantedTruth truth;
  truth.dependence = deps;
  for (const auto& d : deps) truth.redundant.push_back(d.target);
  return {Dataset(std::move(specs), std::move(records)), std::move(truth)};
}

Dataset generate(const GeneratorConfig& cfg) {
  validate(cfg);
  if (cfg.kind == PopulationKind::PlantedRedundancy) return generate_planted(cfg).first;

  const bool opamp = cfg.kind == PopulationKind::OpAmpLike;
  auto specs = opamp ? opamp_specs() : accel_specs();
  std::vector<DeviceRecord> records(cfg.n);
  for (std::size_t k = 0; k < cfg.n; ++k) {
    UniformSource rng(derive_seed(cfg.seed, "record", k));
    records[k].id = "d" + std::to_string(k + 1);
    records[k].values = opamp ? opamp_record(rng, cfg, specs) : accel_record(rng, cfg, specs);
  }
  return Dataset(std::move(specs), std::move(records));
}

std::vector<double> opamp_response(std::span<const double> latent) {
  if (latent.size() != kOpAmpLatentCount) {
    throw Error(ErrorCode::DimensionMismatch, "op-amp response needs " + std::to_string(kOpAmpLatentCount) +
                                                  " latent values");
  }
  const std::vector<double> noise(opamp_specs().size(), 0.0);
  return opamp_values(latent, noise, opamp_specs());
}

std::vector<double> accel_response(std::span<const double> latent, double param_variation) {
  if (latent.size() != kAccelLatentCount) {
    throw Error(ErrorCode::DimensionMismatch, "accelerometer response needs " +
                                                  std::to_string(kAccelLatentCount) + " latent values");
  }
  return accel_values_all(latent, param_variation);
}

}  // namespace speccompact
