// Timing harness for the two OpenMP-parallel kernels against their serial
// reference paths: the steady-state PL spectrum scan and the posterior
// sampler's chain updates.  Both paths produce identical results by
// construction; this tool reports wall-clock speedup only.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nvlambda/lambda_model.hpp"
#include "nvlambda/pulse.hpp"
#include "nvlambda/rng.hpp"
#include "nvlambda/tomography.hpp"

using namespace nvlambda;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

LambdaParams cpt_params() {
  LambdaParams p;
  p.excited_splitting = 180.0 * 2.0 * M_PI;
  p.laser_detuning = -0.684 * 2.0 * M_PI;
  p.rabi_amplitude = 46.507 * 2.0 * M_PI;
  p.drive_theta = 1.708;
  p.drive_phi = 0.395;
  return p;
}

DecayRates cpt_rates() {
  DecayRates r;
  r.radiative = 35.114;
  r.isc = 37.0;
  r.singlet_decay = 2.701;
  r.ground_flip = 0.373;
  return r;
}

void bench_spectrum() {
  const int points = 96;
  std::vector<double> detunings(points);
  for (int i = 0; i < points; ++i) {
    detunings[i] = 2.0 * M_PI * (-15.0 + 30.0 * i / (points - 1.0));
  }
  const LambdaParams p = cpt_params();
  const DecayRates r = cpt_rates();

  auto t0 = std::chrono::steady_clock::now();
  const auto serial = simulate_cpt_spectrum(p, r, detunings, false);
  const double t_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto parallel = simulate_cpt_spectrum(p, r, detunings, true);
  const double t_parallel = seconds_since(t0);

  double max_diff = 0.0;
  for (int i = 0; i < points; ++i) {
    max_diff = std::max(max_diff, std::abs(serial[i] - parallel[i]));
  }
  std::printf("spectrum scan   %4d pts   serial %7.3f s   parallel %7.3f s"
              "   speedup %5.2fx   max |diff| %.3g\n",
              points, t_serial, t_parallel, t_serial / t_parallel, max_diff);
}

void bench_sampler() {
  // Synthetic five-projection dataset around a fixed state.
  std::vector<TomoRecord> records;
  const double f0 = 1e5;
  const double counts[] = {0.72 * f0, 0.55 * f0, 0.91 * f0, f0, 0.35 * f0};
  const Projection projs[] = {Projection::X, Projection::Y, Projection::Z,
                              Projection::Norm0, Projection::Norm1};
  int id = 0;
  for (int rep = 0; rep < 4; ++rep) {
    for (int k = 0; k < 5; ++k) {
      TomoRecord rec;
      rec.id = "rec" + std::to_string(id++);
      rec.projection = projs[k];
      rec.counts = counts[k];
      rec.shots = 1.0;
      records.push_back(rec);
    }
  }

  SamplerOptions opts;
  opts.iterations = 1500;
  opts.burn_in = 500;

  opts.parallel = false;
  auto t0 = std::chrono::steady_clock::now();
  const auto serial = sample_posterior(records, opts, 7);
  const double t_serial = seconds_since(t0);

  opts.parallel = true;
  t0 = std::chrono::steady_clock::now();
  const auto parallel = sample_posterior(records, opts, 7);
  const double t_parallel = seconds_since(t0);

  double max_diff = 0.0;
  for (std::size_t c = 0; c < serial.chains.size(); ++c) {
    for (std::size_t i = 0; i < serial.chains[c].size(); ++i) {
      const TomoVector a = tomo_pack(serial.chains[c][i]);
      const TomoVector b = tomo_pack(parallel.chains[c][i]);
      max_diff = std::max(max_diff, (a - b).cwiseAbs().maxCoeff());
    }
  }
  std::printf("posterior chains %3d iters serial %7.3f s   parallel %7.3f s"
              "   speedup %5.2fx   max |diff| %.3g\n",
              opts.burn_in + opts.iterations, t_serial, t_parallel,
              t_serial / t_parallel, max_diff);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; both paths run serially\n");
#endif
  bench_spectrum();
  bench_sampler();
  return 0;
}
