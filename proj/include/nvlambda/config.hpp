#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvlambda/fitting.hpp"
#include "nvlambda/lambda_model.hpp"
#include "nvlambda/pulse.hpp"
#include "nvlambda/quantum.hpp"
#include "nvlambda/tomography.hpp"

namespace nvlambda {

// Raised on any configuration problem: bad syntax, unknown keys, missing or
// malformed unit suffixes, values out of range.  The CLI maps it to exit 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension of a config value; decides how a unit suffix converts to the
// internal units (angular rad/us for frequencies, plain 1/us for rates,
// us for times, rad for angles).
enum class Quantity { Frequency, Rate, Time, Angle, Dimensionless };

// Parses "NUMBER UNIT" (space optional), e.g. "-0.684 MHz", "0.5us",
// "30 deg".  Dimensioned kinds require a suffix; dimensionless values must
// not carry one.
double parse_quantity(const std::string& text, Quantity kind);

// Bloch-polar description of a ground-manifold state.
struct StateSpec {
  double r = 0.0;
  double theta = 0.0;  // rad
  double phi = 0.0;    // rad
};

struct CptSettings {
  double drive_time = 0.5;      // us
  double relax_time = 0.45;     // us
  int trace_points = 201;
  std::string state = "mixed";  // mixed | zero | plus | a named state
};

struct RotationSettings {
  double duration = 0.2;  // us
  int trace_points = 201;
  std::string state = "A";
};

struct SpectrumSettings {
  double start = 0.0;  // two-photon offset, rad/us (default set in ctor)
  double stop = 0.0;
  int points = 201;
  SpectrumSettings();
};

struct RamseySettings {
  RamseyParams params;     // defaults follow the reference optical dataset
  double tau_start = 0.02; // us
  double tau_stop = 3.0;
  double tau_step = 0.01;
  long long shots = 1;
  SynthOptions synth;
  RamseySettings();
};

struct HahnSettings {
  HahnParams params;
  double tau_start = 10.0;  // us
  double tau_stop = 2000.0;
  double tau_step = 10.0;
  long long shots = 1;
  SynthOptions synth;
  HahnSettings();
};

struct TomoSettings {
  std::string data_path;
  SamplerOptions sampler;
  double hpd_mass = 0.682;
};

struct FitSettings {
  std::string data_path;
  bool fix_background = false;
  FitOptions options;
  int grid_points = 400;  // dense model-curve output
};

struct RunConfig {
  std::uint64_t seed = 0;
  LambdaParams model;
  DecayRates rates;
  std::map<std::string, StateSpec> states;
  CptSettings cpt;
  RotationSettings rotation;
  SpectrumSettings spectrum;
  RamseySettings ramsey;
  HahnSettings hahn;
  TomoSettings tomo;
  FitSettings fit;

  // FNV-1a 64 over the canonical resolved key=value listing, 16 hex chars.
  std::string hash;

  // Canonical text the hash is computed from (stable order and formatting).
  std::string canonical_text() const;

  // "mixed", "zero", "plus", or the name of an entry in `states`.
  DensityMatrix resolve_state(const std::string& name) const;
};

// Preset discovery.  The directory defaults to the compiled-in data path and
// can be overridden with the NVLAMBDA_PRESET_DIR environment variable.
std::vector<std::string> available_presets();
std::string preset_path(const std::string& name);  // throws with the list

// Loads and resolves a run configuration.  Sources merge in order: built-in
// defaults, then the preset (if any), then the config file (if any), then
// dotted-path overrides from the command line, then the seed override.
RunConfig load_config(
    const std::optional<std::string>& config_path,
    const std::optional<std::string>& preset_name,
    const std::vector<std::pair<std::string, std::string>>& overrides = {},
    std::optional<std::uint64_t> seed_override = std::nullopt);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace nvlambda
