#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvlambda/config.hpp"
#include "nvlambda/fitting.hpp"
#include "nvlambda/io.hpp"
#include "nvlambda/pulse.hpp"
#include "nvlambda/tomography.hpp"

namespace {

using nlohmann::ordered_json;
using namespace nvlambda;

constexpr const char* kArtifactVersion = "0.1.0";
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Solver-stage failures (optimizer breakdown, sampler stuck): exit code 2.
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonArgs {
  std::optional<std::string> config;
  std::optional<std::string> preset;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config, "Run configuration file (YAML)");
  cmd->add_option("--preset", args->preset,
                  "Named model preset (see presets/)");
  cmd->add_option("--out", args->out, "Output directory")
      ->default_val(".");
  cmd->add_option("--seed", args->seed, "Random seed (overrides config)");
}

RunConfig resolve_config(const CommonArgs& args) {
  return load_config(args.config, args.preset, args.overrides, args.seed);
}

std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const RunConfig& cfg,
                    const std::vector<std::string>& outputs) {
  ordered_json manifest;
  manifest["command"] = command;
  manifest["config_hash"] = cfg.hash;
  manifest["seed"] = cfg.seed;
  ordered_json versions;
  versions["artifact"] = kArtifactVersion;
  versions["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION);
  versions["json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                     std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                     std::to_string(NLOHMANN_JSON_VERSION_PATCH);
  versions["compiler"] = __VERSION__;
  manifest["versions"] = versions;
  manifest["generated_at"] = iso_utc_now();  // timestamps live only here
  manifest["outputs"] = outputs;
  write_json_file(out_dir + "/manifest.json", manifest);
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  std::filesystem::create_directories(args.out);
  return args.out + "/" + name;
}

std::vector<double> linspace(double start, double stop, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = start + (stop - start) * static_cast<double>(i) /
                        static_cast<double>(n - 1);
  }
  return xs;
}

std::vector<double> tau_grid(double start, double stop, double step) {
  std::vector<double> taus;
  for (int i = 0;; ++i) {
    const double tau = start + step * static_cast<double>(i);
    if (tau > stop + 0.5 * step) break;
    taus.push_back(tau);
  }
  return taus;
}

// --- simulate subcommands --------------------------------------------------

int run_simulate_cpt(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const DensityMatrix rho0 = cfg.resolve_state(cfg.cpt.state);

  PulseSequence seq;
  seq.segments.push_back(OpticalDrive{cfg.model, cfg.rates,
                                      cfg.cpt.drive_time,
                                      cfg.cpt.trace_points});
  const SignalTrace trace = run_sequence(seq, rho0, cfg.seed);
  write_trace_csv(out_path(args, "trace.csv"), trace, cfg.hash);
  write_json_file(out_path(args, "trace.json"), trace_json(trace, cfg.hash));

  const std::vector<double> times =
      linspace(0.0, cfg.cpt.drive_time, cfg.cpt.trace_points);
  const std::vector<double> fidelity = initialization_fidelity_curve(
      cfg.model, cfg.rates, rho0, times, cfg.cpt.relax_time);
  write_xy_csv(out_path(args, "fidelity.csv"), "t_us", "fidelity", times,
               fidelity, cfg.hash);

  write_manifest(args.out, "simulate cpt", cfg,
                 {"trace.csv", "trace.json", "fidelity.csv"});
  return 0;
}

int run_simulate_rotation(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const DensityMatrix rho0 = cfg.resolve_state(cfg.rotation.state);

  PulseSequence seq;
  seq.segments.push_back(OpticalDrive{cfg.model, cfg.rates,
                                      cfg.rotation.duration,
                                      cfg.rotation.trace_points});
  const SignalTrace trace = run_sequence(seq, rho0, cfg.seed);
  write_trace_csv(out_path(args, "trace.csv"), trace, cfg.hash);
  write_json_file(out_path(args, "trace.json"), trace_json(trace, cfg.hash));
  write_manifest(args.out, "simulate rotation", cfg,
                 {"trace.csv", "trace.json"});
  return 0;
}

int run_simulate_spectrum(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<double> detunings =
      linspace(cfg.spectrum.start, cfg.spectrum.stop, cfg.spectrum.points);
  const std::vector<double> rates =
      simulate_cpt_spectrum(cfg.model, cfg.rates, detunings);
  std::vector<double> mhz(detunings.size());
  for (std::size_t i = 0; i < detunings.size(); ++i) {
    mhz[i] = detunings[i] / kTwoPi;
  }
  write_xy_csv(out_path(args, "spectrum.csv"), "two_photon_mhz", "pl_rate",
               mhz, rates, cfg.hash);
  write_manifest(args.out, "simulate spectrum", cfg, {"spectrum.csv"});
  return 0;
}

int run_simulate_ramsey(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  CurveData data;
  data.tau = tau_grid(cfg.ramsey.tau_start, cfg.ramsey.tau_stop,
                      cfg.ramsey.tau_step);
  data.counts = synthesize_ramsey(cfg.ramsey.params, data.tau,
                                  cfg.ramsey.shots, cfg.seed,
                                  cfg.ramsey.synth);
  data.weight.assign(data.tau.size(), 1.0);
  write_curve_csv(out_path(args, "data.csv"), data, cfg.hash);
  write_manifest(args.out, "simulate ramsey", cfg, {"data.csv"});
  return 0;
}

int run_simulate_hahn(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  CurveData data;
  data.tau =
      tau_grid(cfg.hahn.tau_start, cfg.hahn.tau_stop, cfg.hahn.tau_step);
  data.counts = synthesize_hahn(cfg.hahn.params, data.tau, cfg.hahn.shots,
                                cfg.seed, cfg.hahn.synth);
  data.weight.assign(data.tau.size(), 1.0);
  write_curve_csv(out_path(args, "data.csv"), data, cfg.hash);
  write_manifest(args.out, "simulate hahn", cfg, {"data.csv"});
  return 0;
}

// --- tomo ------------------------------------------------------------------

ordered_json interval_json(const std::vector<double>& samples, double mass) {
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= static_cast<double>(samples.size());
  const auto [lo, hi] = hpd_interval(samples, mass);
  ordered_json j;
  j["mean"] = mean;
  j["hpd"] = {lo, hi};
  return j;
}

int run_tomo(const CommonArgs& args, const std::string& data_flag) {
  const RunConfig cfg = resolve_config(args);
  const std::string data_path =
      !data_flag.empty() ? data_flag : cfg.tomo.data_path;
  if (data_path.empty()) {
    throw ConfigError("no input data: set tomo.data or pass --data");
  }
  const std::vector<TomoRecord> records = read_tomo_csv(data_path);

  PosteriorArchive archive;
  try {
    archive = sample_posterior(records, cfg.tomo.sampler, cfg.seed);
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw SolverFailure(std::string("sampler failure: ") + e.what());
  }

  write_posterior_csv(out_path(args, "posterior.csv"), archive, cfg.hash);

  static const char* kNames[kTomoDim] = {
      "r",   "theta", "phi", "f0",      "contrast",  "eps_y",
      "eps_z", "v_x", "v_z", "phi_err", "theta_err"};
  ordered_json summary;
  summary["config_hash"] = cfg.hash;
  summary["seed"] = cfg.seed;
  summary["converged"] = archive.converged;
  summary["acceptance_rate"] = archive.acceptance_rate;
  summary["f0_max"] = archive.f0_max;
  summary["hpd_mass"] = cfg.tomo.hpd_mass;
  ordered_json rhat;
  for (int j = 0; j < kTomoDim; ++j) rhat[kNames[j]] = archive.r_hat[j];
  summary["r_hat"] = rhat;
  ordered_json params;
  for (int j = 0; j < kTomoDim; ++j) {
    params[kNames[j]] = interval_json(archive.pooled(j), cfg.tomo.hpd_mass);
  }
  summary["parameters"] = params;
  ordered_json bloch;
  const char* axes[3] = {"x", "y", "z"};
  for (int a = 0; a < 3; ++a) {
    bloch[axes[a]] = interval_json(archive.pooled_bloch(a), cfg.tomo.hpd_mass);
  }
  summary["bloch"] = bloch;
  summary["fidelity"] = {{"posterior_mean", archive.mean_bloch_fidelity()}};
  write_json_file(out_path(args, "summary.json"), summary);

  write_manifest(args.out, "tomo", cfg, {"posterior.csv", "summary.json"});

  if (!archive.converged) {
    std::cerr << "tomo: chains did not converge (split-Rhat above "
              << cfg.tomo.sampler.rhat_threshold << ")\n";
    return 2;
  }
  return 0;
}

// --- fit -------------------------------------------------------------------

ordered_json fit_report(const FitResult& raw,
                        const std::vector<std::string>& names,
                        const RunConfig& cfg) {
  ordered_json report;
  report["config_hash"] = cfg.hash;
  report["seed"] = cfg.seed;
  report["converged"] = raw.converged;
  report["chi_square"] = raw.chi2;
  report["dof"] = raw.dof;
  report["iterations"] = raw.iterations;
  ordered_json estimates, errors;
  for (std::size_t i = 0; i < names.size(); ++i) {
    estimates[names[i]] = raw.parameters[i];
    errors[names[i]] = raw.std_errors[i];
  }
  report["estimates"] = estimates;
  report["std_errors"] = errors;
  report["parameter_order"] = names;
  ordered_json cov = ordered_json::array();
  for (int i = 0; i < raw.covariance.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < raw.covariance.cols(); ++j) {
      row.push_back(raw.covariance(i, j));
    }
    cov.push_back(row);
  }
  report["covariance"] = cov;
  return report;
}

int run_fit(const CommonArgs& args, const std::string& model,
            const std::string& data_arg) {
  const RunConfig cfg = resolve_config(args);
  const std::string data_path =
      !data_arg.empty() ? data_arg : cfg.fit.data_path;
  if (data_path.empty()) {
    throw ConfigError("no input data: set fit.data or pass a data path");
  }
  const CurveData data = read_curve_csv(data_path);

  ordered_json report;
  std::vector<double> grid =
      linspace(*std::min_element(data.tau.begin(), data.tau.end()),
               *std::max_element(data.tau.begin(), data.tau.end()),
               cfg.fit.grid_points);
  std::vector<double> curve(grid.size());
  bool converged = false;

  try {
    if (model == "ramsey") {
      const RamseyFit fit =
          fit_ramsey(data, cfg.fit.fix_background, cfg.fit.options);
      report = fit_report(fit.raw,
                          {"amplitude", "t2_star_us", "delta_omega_rad_per_us",
                           "omega_hf_rad_per_us", "tau0_us", "c1", "c2",
                           "background"},
                          cfg);
      report["derived"] = {
          {"delta_omega_mhz", fit.params.delta_omega / kTwoPi},
          {"omega_hf_mhz", fit.params.omega_hf / kTwoPi},
          {"delta_omega_mhz_error", fit.errors.delta_omega / kTwoPi},
          {"omega_hf_mhz_error", fit.errors.omega_hf / kTwoPi}};
      for (std::size_t i = 0; i < grid.size(); ++i) {
        curve[i] = ramsey_model(grid[i], fit.params);
      }
      converged = fit.raw.converged;
    } else {
      const HahnFit fit =
          fit_hahn(data, cfg.fit.fix_background, cfg.fit.options);
      report =
          fit_report(fit.raw, {"amplitude", "t2_us", "background"}, cfg);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        curve[i] = hahn_model(grid[i], fit.params);
      }
      converged = fit.raw.converged;
    }
  } catch (const std::invalid_argument&) {
    throw;  // validation problems (e.g. too few points) exit with 1
  } catch (const std::exception& e) {
    throw SolverFailure(std::string("fit failure: ") + e.what());
  }

  write_json_file(out_path(args, "report.json"), report);
  write_xy_csv(out_path(args, "curve.csv"), "tau_us", "model", grid, curve,
               cfg.hash);
  write_manifest(args.out, "fit " + model, cfg, {"report.json", "curve.csv"});

  if (!converged) {
    std::cerr << "fit: optimizer did not converge\n";
    return 2;
  }
  return 0;
}

// --- snr -------------------------------------------------------------------

int run_snr(double bright, double dark, double n) {
  ReadoutLevels levels;
  levels.bright = bright;
  levels.dark = dark;
  levels.shots = n;
  const double readouts = required_readouts(levels);
  std::printf("%.4g\n", readouts);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lambda-system spin control: simulation, tomography, fitting"};
  app.require_subcommand(1);

  int rc = 0;

  // simulate
  CLI::App* simulate =
      app.add_subcommand("simulate", "Generate traces and synthetic datasets");
  simulate->require_subcommand(1);

  CommonArgs cpt_args;
  std::string cpt_t;
  CLI::App* cpt = simulate->add_subcommand(
      "cpt", "Optical pumping toward the dark state");
  add_common(cpt, &cpt_args);
  cpt->add_option("--t", cpt_t, "Drive duration (e.g. 0.5us)");
  cpt->callback([&] {
    if (!cpt_t.empty()) cpt_args.overrides.emplace_back("cpt.drive_time", cpt_t);
    rc = run_simulate_cpt(cpt_args);
  });

  CommonArgs rot_args;
  std::string rot_t;
  CLI::App* rot = simulate->add_subcommand(
      "rotation", "Detuned Raman rotation of the spin");
  add_common(rot, &rot_args);
  rot->add_option("--t", rot_t, "Pulse duration (e.g. 0.2us)");
  rot->callback([&] {
    if (!rot_t.empty())
      rot_args.overrides.emplace_back("rotation.duration", rot_t);
    rc = run_simulate_rotation(rot_args);
  });

  CommonArgs spec_args;
  std::string spec_start, spec_stop;
  std::optional<int> spec_points;
  CLI::App* spec = simulate->add_subcommand(
      "spectrum", "Steady-state PL vs two-photon detuning");
  add_common(spec, &spec_args);
  spec->add_option("--start", spec_start, "Scan start (e.g. -15MHz)");
  spec->add_option("--stop", spec_stop, "Scan stop (e.g. 15MHz)");
  spec->add_option("--points", spec_points, "Number of scan points");
  spec->callback([&] {
    if (!spec_start.empty())
      spec_args.overrides.emplace_back("spectrum.start", spec_start);
    if (!spec_stop.empty())
      spec_args.overrides.emplace_back("spectrum.stop", spec_stop);
    if (spec_points)
      spec_args.overrides.emplace_back("spectrum.points",
                                       std::to_string(*spec_points));
    rc = run_simulate_spectrum(spec_args);
  });

  CommonArgs ramsey_args;
  std::string ramsey_t2star, ramsey_shots;
  CLI::App* ramsey = simulate->add_subcommand(
      "ramsey", "Synthetic free-precession dataset");
  add_common(ramsey, &ramsey_args);
  ramsey->add_option("--T2star", ramsey_t2star,
                     "Dephasing time (e.g. 1.13us)");
  ramsey->add_option("--shots", ramsey_shots, "Averages per point");
  ramsey->callback([&] {
    if (!ramsey_t2star.empty())
      ramsey_args.overrides.emplace_back("ramsey.t2_star", ramsey_t2star);
    if (!ramsey_shots.empty())
      ramsey_args.overrides.emplace_back("ramsey.shots", ramsey_shots);
    rc = run_simulate_ramsey(ramsey_args);
  });

  CommonArgs hahn_args;
  std::string hahn_t2, hahn_shots;
  CLI::App* hahn =
      simulate->add_subcommand("hahn", "Synthetic echo-decay dataset");
  add_common(hahn, &hahn_args);
  hahn->add_option("--T2", hahn_t2, "Coherence time (e.g. 893us)");
  hahn->add_option("--shots", hahn_shots, "Averages per point");
  hahn->callback([&] {
    if (!hahn_t2.empty())
      hahn_args.overrides.emplace_back("hahn.t2", hahn_t2);
    if (!hahn_shots.empty())
      hahn_args.overrides.emplace_back("hahn.shots", hahn_shots);
    rc = run_simulate_hahn(hahn_args);
  });

  // tomo
  CommonArgs tomo_args;
  std::string tomo_data;
  CLI::App* tomo =
      app.add_subcommand("tomo", "Bayesian state reconstruction from counts");
  add_common(tomo, &tomo_args);
  tomo->add_option("--data", tomo_data, "Input records CSV");
  tomo->callback([&] { rc = run_tomo(tomo_args, tomo_data); });

  // fit
  CommonArgs fit_args;
  std::string fit_model_name;
  std::string fit_data;
  CLI::App* fit = app.add_subcommand("fit", "Weighted least-squares fits");
  fit->add_option("model", fit_model_name, "Model: ramsey or hahn")
      ->required()
      ->check(CLI::IsMember({"ramsey", "hahn"}));
  fit->add_option("data", fit_data, "Input curve CSV");
  add_common(fit, &fit_args);
  fit->callback([&] { rc = run_fit(fit_args, fit_model_name, fit_data); });

  // snr
  double snr_bright = 0.0, snr_dark = 0.0, snr_n = 0.0;
  CLI::App* snr = app.add_subcommand(
      "snr", "Readouts needed to resolve two count levels");
  snr->add_option("bright", snr_bright, "Bright-state counts")->required();
  snr->add_option("dark", snr_dark, "Dark-state counts")->required();
  snr->add_option("n", snr_n, "Photons collected per readout set")->required();
  snr->callback([&] { rc = run_snr(snr_bright, snr_dark, snr_n); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
