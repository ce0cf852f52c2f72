#include "nvlambda/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace nvlambda {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// ---------------------------------------------------------------------------
// Quantity parsing.
// ---------------------------------------------------------------------------

struct UnitEntry {
  const char* suffix;
  double factor;
};

// Frequencies become angular (x 2*pi) internally; rates stay as plain
// inverse time.  Both are written with hertz suffixes in config files.
const UnitEntry kFrequencyUnits[] = {
    {"MHz", kTwoPi}, {"kHz", kTwoPi * 1e-3}, {"GHz", kTwoPi * 1e3}};
const UnitEntry kRateUnits[] = {{"MHz", 1.0}, {"kHz", 1e-3}, {"GHz", 1e3}};
const UnitEntry kTimeUnits[] = {
    {"us", 1.0}, {"ns", 1e-3}, {"ms", 1e3}, {"s", 1e6}};
const UnitEntry kAngleUnits[] = {
    {"rad", 1.0}, {"mrad", 1e-3}, {"deg", 0.017453292519943295}};

const char* quantity_name(Quantity kind) {
  switch (kind) {
    case Quantity::Frequency: return "frequency";
    case Quantity::Rate: return "rate";
    case Quantity::Time: return "time";
    case Quantity::Angle: return "angle";
    case Quantity::Dimensionless: return "dimensionless";
  }
  return "?";
}

std::pair<const UnitEntry*, std::size_t> unit_table(Quantity kind) {
  switch (kind) {
    case Quantity::Frequency:
      return {kFrequencyUnits, std::size(kFrequencyUnits)};
    case Quantity::Rate: return {kRateUnits, std::size(kRateUnits)};
    case Quantity::Time: return {kTimeUnits, std::size(kTimeUnits)};
    case Quantity::Angle: return {kAngleUnits, std::size(kAngleUnits)};
    case Quantity::Dimensionless: return {nullptr, 0};
  }
  return {nullptr, 0};
}

}  // namespace

double parse_quantity(const std::string& text, Quantity kind) {
  const std::string body = trim(text);
  if (body.empty()) {
    throw ConfigError("empty value where a " +
                      std::string(quantity_name(kind)) + " was expected");
  }
  const char* start = body.c_str();
  char* after = nullptr;
  const double value = std::strtod(start, &after);
  if (after == start || !std::isfinite(value)) {
    throw ConfigError("cannot parse number in '" + body + "'");
  }
  const std::string suffix = trim(std::string(after));

  if (kind == Quantity::Dimensionless) {
    if (!suffix.empty()) {
      throw ConfigError("'" + body +
                        "': unexpected unit on a dimensionless value");
    }
    return value;
  }

  const auto [table, count] = unit_table(kind);
  for (std::size_t i = 0; i < count; ++i) {
    if (suffix == table[i].suffix) return value * table[i].factor;
  }
  std::string expected;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) expected += ", ";
    expected += table[i].suffix;
  }
  if (suffix.empty()) {
    throw ConfigError("'" + body + "': missing unit suffix for a " +
                      quantity_name(kind) + " (expected one of: " + expected +
                      ")");
  }
  throw ConfigError("'" + body + "': unknown unit '" + suffix + "' for a " +
                    quantity_name(kind) + " (expected one of: " + expected +
                    ")");
}

// ---------------------------------------------------------------------------
// Defaults.
// ---------------------------------------------------------------------------

SpectrumSettings::SpectrumSettings()
    : start(-15.0 * kTwoPi), stop(15.0 * kTwoPi) {}

RamseySettings::RamseySettings() {
  // Reference all-optical Ramsey dataset parameters.
  params.amplitude = 253.0;
  params.t2_star = 1.13;
  params.delta_omega = 7.52 * kTwoPi;
  params.omega_hf = 2.19 * kTwoPi;
  params.tau0 = 0.013;
  params.c1 = 1.36;
  params.c2 = 0.64;
  params.background = 0.0;
  synth.paired = true;
}

HahnSettings::HahnSettings() {
  params.amplitude = 538.0;
  params.t2 = 893.0;
  params.background = 0.0;
  synth.paired = true;
}

// ---------------------------------------------------------------------------
// Schema.
// ---------------------------------------------------------------------------

namespace {

enum class FieldType { Double, Int, Long, Bool, String, Seed };

struct FieldSpec {
  FieldType type = FieldType::Double;
  Quantity kind = Quantity::Dimensionless;
};

using Schema = std::map<std::string, FieldSpec>;

const Schema& schema() {
  static const Schema table = {
      {"seed", {FieldType::Seed}},
      {"model.laser_detuning", {FieldType::Double, Quantity::Frequency}},
      {"model.excited_splitting", {FieldType::Double, Quantity::Frequency}},
      {"model.rabi_amplitude", {FieldType::Double, Quantity::Frequency}},
      {"model.drive_theta", {FieldType::Double, Quantity::Angle}},
      {"model.drive_phi", {FieldType::Double, Quantity::Angle}},
      {"model.singlet_shift", {FieldType::Double, Quantity::Frequency}},
      {"model.two_photon_offset", {FieldType::Double, Quantity::Frequency}},
      {"model.branch", {FieldType::String}},
      {"model.radiative", {FieldType::Double, Quantity::Rate}},
      {"model.isc", {FieldType::Double, Quantity::Rate}},
      {"model.singlet_decay", {FieldType::Double, Quantity::Rate}},
      {"model.singlet_to_0g", {FieldType::Double}},
      {"model.singlet_to_plus1g", {FieldType::Double}},
      {"model.ground_flip", {FieldType::Double, Quantity::Rate}},
      {"model.dephasing", {FieldType::Double, Quantity::Rate}},
      {"cpt.drive_time", {FieldType::Double, Quantity::Time}},
      {"cpt.relax_time", {FieldType::Double, Quantity::Time}},
      {"cpt.trace_points", {FieldType::Int}},
      {"cpt.state", {FieldType::String}},
      {"rotation.duration", {FieldType::Double, Quantity::Time}},
      {"rotation.trace_points", {FieldType::Int}},
      {"rotation.state", {FieldType::String}},
      {"spectrum.start", {FieldType::Double, Quantity::Frequency}},
      {"spectrum.stop", {FieldType::Double, Quantity::Frequency}},
      {"spectrum.points", {FieldType::Int}},
      {"ramsey.amplitude", {FieldType::Double}},
      {"ramsey.t2_star", {FieldType::Double, Quantity::Time}},
      {"ramsey.delta_omega", {FieldType::Double, Quantity::Frequency}},
      {"ramsey.omega_hf", {FieldType::Double, Quantity::Frequency}},
      {"ramsey.tau0", {FieldType::Double, Quantity::Time}},
      {"ramsey.c1", {FieldType::Double}},
      {"ramsey.c2", {FieldType::Double}},
      {"ramsey.background", {FieldType::Double}},
      {"ramsey.tau_start", {FieldType::Double, Quantity::Time}},
      {"ramsey.tau_stop", {FieldType::Double, Quantity::Time}},
      {"ramsey.tau_step", {FieldType::Double, Quantity::Time}},
      {"ramsey.shots", {FieldType::Long}},
      {"ramsey.paired", {FieldType::Bool}},
      {"ramsey.isc_background", {FieldType::Double}},
      {"ramsey.isc_rate", {FieldType::Double, Quantity::Rate}},
      {"hahn.amplitude", {FieldType::Double}},
      {"hahn.t2", {FieldType::Double, Quantity::Time}},
      {"hahn.background", {FieldType::Double}},
      {"hahn.tau_start", {FieldType::Double, Quantity::Time}},
      {"hahn.tau_stop", {FieldType::Double, Quantity::Time}},
      {"hahn.tau_step", {FieldType::Double, Quantity::Time}},
      {"hahn.shots", {FieldType::Long}},
      {"hahn.paired", {FieldType::Bool}},
      {"tomo.data", {FieldType::String}},
      {"tomo.chains", {FieldType::Int}},
      {"tomo.tries", {FieldType::Int}},
      {"tomo.iterations", {FieldType::Int}},
      {"tomo.burn_in", {FieldType::Int}},
      {"tomo.thin", {FieldType::Int}},
      {"tomo.f0_max", {FieldType::Double}},
      {"tomo.rhat_threshold", {FieldType::Double}},
      {"tomo.hpd_mass", {FieldType::Double}},
      {"fit.data", {FieldType::String}},
      {"fit.fix_background", {FieldType::Bool}},
      {"fit.scale_errors", {FieldType::Bool}},
      {"fit.max_iterations", {FieldType::Int}},
      {"fit.grid_points", {FieldType::Int}},
  };
  return table;
}

bool is_state_key(const std::string& key, std::string* name,
                  std::string* field) {
  if (key.rfind("states.", 0) != 0) return false;
  const std::string rest = key.substr(7);
  const auto dot = rest.find('.');
  if (dot == std::string::npos || dot == 0) return false;
  const std::string f = rest.substr(dot + 1);
  if (f != "r" && f != "theta" && f != "phi") return false;
  if (name) *name = rest.substr(0, dot);
  if (field) *field = f;
  return true;
}

// Flattens a YAML mapping tree into dotted-path -> scalar text.
void flatten(const YAML::Node& node, const std::string& prefix,
             std::map<std::string, std::string>* out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      const std::string path = prefix.empty() ? key : prefix + "." + key;
      flatten(kv.second, path, out);
    }
    return;
  }
  if (node.IsScalar()) {
    (*out)[prefix] = node.as<std::string>();
    return;
  }
  if (node.IsNull()) {
    throw ConfigError("key '" + prefix + "' has no value");
  }
  throw ConfigError("key '" + prefix +
                    "' must be a scalar or a nested mapping");
}

long long parse_integer(const std::string& key, const std::string& text) {
  const std::string body = trim(text);
  char* after = nullptr;
  const long long v = std::strtoll(body.c_str(), &after, 10);
  if (after == body.c_str() || *after != '\0') {
    throw ConfigError("key '" + key + "': expected an integer, got '" + body +
                      "'");
  }
  return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const std::string body = trim(text);
  if (!body.empty() && body[0] == '-') {
    throw ConfigError("key '" + key + "': expected a nonnegative integer");
  }
  char* after = nullptr;
  const unsigned long long v = std::strtoull(body.c_str(), &after, 10);
  if (after == body.c_str() || *after != '\0') {
    throw ConfigError("key '" + key + "': expected an integer, got '" + body +
                      "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string body = trim(text);
  if (body == "true" || body == "1" || body == "yes" || body == "on")
    return true;
  if (body == "false" || body == "0" || body == "no" || body == "off")
    return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + body +
                    "'");
}

DriveBranch parse_branch(const std::string& text) {
  if (text == "both" || text == "Both") return DriveBranch::Both;
  if (text == "R" || text == "r") return DriveBranch::R;
  if (text == "L" || text == "l") return DriveBranch::L;
  throw ConfigError("model.branch must be one of: both, R, L (got '" + text +
                    "')");
}

const char* branch_name(DriveBranch b) {
  switch (b) {
    case DriveBranch::Both: return "both";
    case DriveBranch::R: return "R";
    case DriveBranch::L: return "L";
  }
  return "?";
}

void apply_field(RunConfig* cfg, const std::string& key,
                 const std::string& text, const FieldSpec& spec) {
  auto number = [&]() {
    try {
      return parse_quantity(text, spec.kind);
    } catch (const ConfigError& e) {
      throw ConfigError("key '" + key + "': " + e.what());
    }
  };
  auto integer = [&]() { return parse_integer(key, text); };
  auto clamp_int = [&](long long v) {
    if (v < -2000000000LL || v > 2000000000LL) {
      throw ConfigError("key '" + key + "': integer out of range");
    }
    return static_cast<int>(v);
  };

  if (key == "seed") { cfg->seed = parse_unsigned(key, text); return; }

  if (key == "model.laser_detuning") { cfg->model.laser_detuning = number(); return; }
  if (key == "model.excited_splitting") { cfg->model.excited_splitting = number(); return; }
  if (key == "model.rabi_amplitude") { cfg->model.rabi_amplitude = number(); return; }
  if (key == "model.drive_theta") { cfg->model.drive_theta = number(); return; }
  if (key == "model.drive_phi") { cfg->model.drive_phi = number(); return; }
  if (key == "model.singlet_shift") { cfg->model.singlet_shift = number(); return; }
  if (key == "model.two_photon_offset") { cfg->model.two_photon_offset = number(); return; }
  if (key == "model.branch") { cfg->model.branch = parse_branch(trim(text)); return; }
  if (key == "model.radiative") { cfg->rates.radiative = number(); return; }
  if (key == "model.isc") { cfg->rates.isc = number(); return; }
  if (key == "model.singlet_decay") { cfg->rates.singlet_decay = number(); return; }
  if (key == "model.singlet_to_0g") { cfg->rates.singlet_to_0g = number(); return; }
  if (key == "model.singlet_to_plus1g") { cfg->rates.singlet_to_plus1g = number(); return; }
  if (key == "model.ground_flip") { cfg->rates.ground_flip = number(); return; }
  if (key == "model.dephasing") { cfg->rates.dephasing = number(); return; }

  if (key == "cpt.drive_time") { cfg->cpt.drive_time = number(); return; }
  if (key == "cpt.relax_time") { cfg->cpt.relax_time = number(); return; }
  if (key == "cpt.trace_points") { cfg->cpt.trace_points = clamp_int(integer()); return; }
  if (key == "cpt.state") { cfg->cpt.state = trim(text); return; }
  if (key == "rotation.duration") { cfg->rotation.duration = number(); return; }
  if (key == "rotation.trace_points") { cfg->rotation.trace_points = clamp_int(integer()); return; }
  if (key == "rotation.state") { cfg->rotation.state = trim(text); return; }
  if (key == "spectrum.start") { cfg->spectrum.start = number(); return; }
  if (key == "spectrum.stop") { cfg->spectrum.stop = number(); return; }
  if (key == "spectrum.points") { cfg->spectrum.points = clamp_int(integer()); return; }

  if (key == "ramsey.amplitude") { cfg->ramsey.params.amplitude = number(); return; }
  if (key == "ramsey.t2_star") { cfg->ramsey.params.t2_star = number(); return; }
  if (key == "ramsey.delta_omega") { cfg->ramsey.params.delta_omega = number(); return; }
  if (key == "ramsey.omega_hf") { cfg->ramsey.params.omega_hf = number(); return; }
  if (key == "ramsey.tau0") { cfg->ramsey.params.tau0 = number(); return; }
  if (key == "ramsey.c1") { cfg->ramsey.params.c1 = number(); return; }
  if (key == "ramsey.c2") { cfg->ramsey.params.c2 = number(); return; }
  if (key == "ramsey.background") { cfg->ramsey.params.background = number(); return; }
  if (key == "ramsey.tau_start") { cfg->ramsey.tau_start = number(); return; }
  if (key == "ramsey.tau_stop") { cfg->ramsey.tau_stop = number(); return; }
  if (key == "ramsey.tau_step") { cfg->ramsey.tau_step = number(); return; }
  if (key == "ramsey.shots") { cfg->ramsey.shots = integer(); return; }
  if (key == "ramsey.paired") { cfg->ramsey.synth.paired = parse_bool(key, text); return; }
  if (key == "ramsey.isc_background") { cfg->ramsey.synth.isc_background = number(); return; }
  if (key == "ramsey.isc_rate") { cfg->ramsey.synth.isc_rate = number(); return; }

  if (key == "hahn.amplitude") { cfg->hahn.params.amplitude = number(); return; }
  if (key == "hahn.t2") { cfg->hahn.params.t2 = number(); return; }
  if (key == "hahn.background") { cfg->hahn.params.background = number(); return; }
  if (key == "hahn.tau_start") { cfg->hahn.tau_start = number(); return; }
  if (key == "hahn.tau_stop") { cfg->hahn.tau_stop = number(); return; }
  if (key == "hahn.tau_step") { cfg->hahn.tau_step = number(); return; }
  if (key == "hahn.shots") { cfg->hahn.shots = integer(); return; }
  if (key == "hahn.paired") { cfg->hahn.synth.paired = parse_bool(key, text); return; }

  if (key == "tomo.data") { cfg->tomo.data_path = trim(text); return; }
  if (key == "tomo.chains") { cfg->tomo.sampler.chains = clamp_int(integer()); return; }
  if (key == "tomo.tries") { cfg->tomo.sampler.tries = clamp_int(integer()); return; }
  if (key == "tomo.iterations") { cfg->tomo.sampler.iterations = clamp_int(integer()); return; }
  if (key == "tomo.burn_in") { cfg->tomo.sampler.burn_in = clamp_int(integer()); return; }
  if (key == "tomo.thin") { cfg->tomo.sampler.thin = clamp_int(integer()); return; }
  if (key == "tomo.f0_max") { cfg->tomo.sampler.f0_max = number(); return; }
  if (key == "tomo.rhat_threshold") { cfg->tomo.sampler.rhat_threshold = number(); return; }
  if (key == "tomo.hpd_mass") { cfg->tomo.hpd_mass = number(); return; }

  if (key == "fit.data") { cfg->fit.data_path = trim(text); return; }
  if (key == "fit.fix_background") { cfg->fit.fix_background = parse_bool(key, text); return; }
  if (key == "fit.scale_errors") { cfg->fit.options.scale_errors = parse_bool(key, text); return; }
  if (key == "fit.max_iterations") { cfg->fit.options.max_iterations = clamp_int(integer()); return; }
  if (key == "fit.grid_points") { cfg->fit.grid_points = clamp_int(integer()); return; }

  throw ConfigError("unhandled schema key '" + key + "'");
}

void validate_config(const RunConfig& cfg) {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) {
      throw ConfigError(std::string(what) + " must be positive");
    }
  };
  auto nonneg = [](double v, const char* what) {
    if (v < 0.0) {
      throw ConfigError(std::string(what) + " must be nonnegative");
    }
  };
  nonneg(cfg.cpt.drive_time, "cpt.drive_time");
  nonneg(cfg.cpt.relax_time, "cpt.relax_time");
  if (cfg.cpt.trace_points < 2) {
    throw ConfigError("cpt.trace_points must be >= 2");
  }
  nonneg(cfg.rotation.duration, "rotation.duration");
  if (cfg.rotation.trace_points < 2) {
    throw ConfigError("rotation.trace_points must be >= 2");
  }
  if (cfg.spectrum.points < 2) {
    throw ConfigError("spectrum.points must be >= 2");
  }
  if (!(cfg.spectrum.stop > cfg.spectrum.start)) {
    throw ConfigError("spectrum.stop must exceed spectrum.start");
  }
  for (const auto* grid_name : {"ramsey", "hahn"}) {
    const bool is_ramsey = std::string(grid_name) == "ramsey";
    const double start = is_ramsey ? cfg.ramsey.tau_start : cfg.hahn.tau_start;
    const double stop = is_ramsey ? cfg.ramsey.tau_stop : cfg.hahn.tau_stop;
    const double step = is_ramsey ? cfg.ramsey.tau_step : cfg.hahn.tau_step;
    const long long shots = is_ramsey ? cfg.ramsey.shots : cfg.hahn.shots;
    nonneg(start, (std::string(grid_name) + ".tau_start").c_str());
    positive(step, (std::string(grid_name) + ".tau_step").c_str());
    if (!(stop >= start)) {
      throw ConfigError(std::string(grid_name) +
                        ".tau_stop must be >= tau_start");
    }
    if (shots < 1) {
      throw ConfigError(std::string(grid_name) + ".shots must be >= 1");
    }
  }
  positive(cfg.ramsey.params.t2_star, "ramsey.t2_star");
  positive(cfg.hahn.params.t2, "hahn.t2");
  if (cfg.tomo.hpd_mass <= 0.0 || cfg.tomo.hpd_mass >= 1.0) {
    throw ConfigError("tomo.hpd_mass must lie in (0, 1)");
  }
  if (cfg.fit.grid_points < 2) {
    throw ConfigError("fit.grid_points must be >= 2");
  }
  for (const auto& [name, st] : cfg.states) {
    if (st.r < 0.0 || st.r > 1.0) {
      throw ConfigError("states." + name + ".r must lie in [0, 1]");
    }
  }
}

YAML::Node load_yaml_file(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open config file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

std::string preset_directory() {
  if (const char* env = std::getenv("NVLAMBDA_PRESET_DIR")) {
    if (*env) return env;
  }
#ifdef NVLAMBDA_PRESET_DIR
  return NVLAMBDA_PRESET_DIR;
#else
  return "presets";
#endif
}

}  // namespace

std::vector<std::string> available_presets() {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  const fs::path dir = preset_directory();
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".yaml") {
      names.push_back(entry.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::string preset_path(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path candidate =
      fs::path(preset_directory()) / (name + ".yaml");
  std::error_code ec;
  if (!fs::exists(candidate, ec)) {
    std::string msg = "unknown preset '" + name + "'; available presets:";
    const auto names = available_presets();
    if (names.empty()) {
      msg += " (none found in " + preset_directory() + ")";
    } else {
      for (const auto& n : names) msg += " " + n;
    }
    throw ConfigError(msg);
  }
  return candidate.string();
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string RunConfig::canonical_text() const {
  std::ostringstream out;
  auto emit = [&](const std::string& key, const std::string& value) {
    out << key << "=" << value << "\n";
  };
  auto num = [&](const std::string& key, double v) {
    emit(key, format_number(v));
  };

  emit("seed", std::to_string(seed));

  num("model.laser_detuning", model.laser_detuning);
  num("model.excited_splitting", model.excited_splitting);
  num("model.rabi_amplitude", model.rabi_amplitude);
  num("model.drive_theta", model.drive_theta);
  num("model.drive_phi", model.drive_phi);
  num("model.singlet_shift", model.singlet_shift);
  num("model.two_photon_offset", model.two_photon_offset);
  emit("model.branch", branch_name(model.branch));
  num("model.radiative", rates.radiative);
  num("model.isc", rates.isc);
  num("model.singlet_decay", rates.singlet_decay);
  num("model.singlet_to_0g", rates.singlet_to_0g);
  num("model.singlet_to_plus1g", rates.singlet_to_plus1g);
  num("model.ground_flip", rates.ground_flip);
  num("model.dephasing", rates.dephasing);

  for (const auto& [name, st] : states) {  // std::map: sorted by name
    num("states." + name + ".r", st.r);
    num("states." + name + ".theta", st.theta);
    num("states." + name + ".phi", st.phi);
  }

  num("cpt.drive_time", cpt.drive_time);
  num("cpt.relax_time", cpt.relax_time);
  emit("cpt.trace_points", std::to_string(cpt.trace_points));
  emit("cpt.state", cpt.state);
  num("rotation.duration", rotation.duration);
  emit("rotation.trace_points", std::to_string(rotation.trace_points));
  emit("rotation.state", rotation.state);
  num("spectrum.start", spectrum.start);
  num("spectrum.stop", spectrum.stop);
  emit("spectrum.points", std::to_string(spectrum.points));

  num("ramsey.amplitude", ramsey.params.amplitude);
  num("ramsey.t2_star", ramsey.params.t2_star);
  num("ramsey.delta_omega", ramsey.params.delta_omega);
  num("ramsey.omega_hf", ramsey.params.omega_hf);
  num("ramsey.tau0", ramsey.params.tau0);
  num("ramsey.c1", ramsey.params.c1);
  num("ramsey.c2", ramsey.params.c2);
  num("ramsey.background", ramsey.params.background);
  num("ramsey.tau_start", ramsey.tau_start);
  num("ramsey.tau_stop", ramsey.tau_stop);
  num("ramsey.tau_step", ramsey.tau_step);
  emit("ramsey.shots", std::to_string(ramsey.shots));
  emit("ramsey.paired", ramsey.synth.paired ? "true" : "false");
  num("ramsey.isc_background", ramsey.synth.isc_background);
  num("ramsey.isc_rate", ramsey.synth.isc_rate);

  num("hahn.amplitude", hahn.params.amplitude);
  num("hahn.t2", hahn.params.t2);
  num("hahn.background", hahn.params.background);
  num("hahn.tau_start", hahn.tau_start);
  num("hahn.tau_stop", hahn.tau_stop);
  num("hahn.tau_step", hahn.tau_step);
  emit("hahn.shots", std::to_string(hahn.shots));
  emit("hahn.paired", hahn.synth.paired ? "true" : "false");

  emit("tomo.data", tomo.data_path);
  emit("tomo.chains", std::to_string(tomo.sampler.chains));
  emit("tomo.tries", std::to_string(tomo.sampler.tries));
  emit("tomo.iterations", std::to_string(tomo.sampler.iterations));
  emit("tomo.burn_in", std::to_string(tomo.sampler.burn_in));
  emit("tomo.thin", std::to_string(tomo.sampler.thin));
  num("tomo.f0_max", tomo.sampler.f0_max);
  num("tomo.rhat_threshold", tomo.sampler.rhat_threshold);
  num("tomo.hpd_mass", tomo.hpd_mass);

  emit("fit.data", fit.data_path);
  emit("fit.fix_background", fit.fix_background ? "true" : "false");
  emit("fit.scale_errors", fit.options.scale_errors ? "true" : "false");
  emit("fit.max_iterations", std::to_string(fit.options.max_iterations));
  emit("fit.grid_points", std::to_string(fit.grid_points));

  return out.str();
}

DensityMatrix RunConfig::resolve_state(const std::string& name) const {
  if (name == "mixed") return DensityMatrix::maximally_mixed_ground();
  if (name == "zero") {
    return DensityMatrix::pure(StateVector::basis(kIdx0g));
  }
  if (name == "plus") {
    return DensityMatrix::pure(StateVector::basis(kIdxPlus1g));
  }
  const auto it = states.find(name);
  if (it == states.end()) {
    std::string msg = "unknown state '" + name +
                      "'; expected mixed, zero, plus, or one of:";
    if (states.empty()) {
      msg += " (no named states configured)";
    } else {
      for (const auto& [n, s] : states) msg += " " + n;
    }
    throw ConfigError(msg);
  }
  return from_bloch(it->second.r, it->second.theta, it->second.phi);
}

RunConfig load_config(
    const std::optional<std::string>& config_path,
    const std::optional<std::string>& preset_name,
    const std::vector<std::pair<std::string, std::string>>& overrides,
    std::optional<std::uint64_t> seed_override) {
  // Merge scalar leaves in precedence order; later sources win.
  std::map<std::string, std::string> merged;
  if (preset_name) {
    std::map<std::string, std::string> flat;
    flatten(load_yaml_file(preset_path(*preset_name)), "", &flat);
    for (auto& [k, v] : flat) merged[k] = v;
  }
  if (config_path) {
    std::map<std::string, std::string> flat;
    flatten(load_yaml_file(*config_path), "", &flat);
    for (auto& [k, v] : flat) merged[k] = v;
  }
  for (const auto& [k, v] : overrides) merged[k] = v;

  RunConfig cfg;
  const Schema& table = schema();
  for (const auto& [key, text] : merged) {
    std::string state_name, state_field;
    if (is_state_key(key, &state_name, &state_field)) {
      StateSpec& st = cfg.states[state_name];
      const Quantity kind =
          state_field == "r" ? Quantity::Dimensionless : Quantity::Angle;
      double value;
      try {
        value = parse_quantity(text, kind);
      } catch (const ConfigError& e) {
        throw ConfigError("key '" + key + "': " + e.what());
      }
      if (state_field == "r") st.r = value;
      else if (state_field == "theta") st.theta = value;
      else st.phi = value;
      continue;
    }
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    apply_field(&cfg, key, text, it->second);
  }

  if (seed_override) cfg.seed = *seed_override;
  validate_config(cfg);

  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg.canonical_text())));
  cfg.hash = hex;
  return cfg;
}

}  // namespace nvlambda
