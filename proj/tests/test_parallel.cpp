// The OpenMP-parallel code paths must produce bit-identical results to their
// serial counterparts: work is partitioned, never reordered.

#include <doctest.h>

#include <cstdint>
#include <vector>

#include "nvlambda/lambda_model.hpp"
#include "nvlambda/pulse.hpp"
#include "nvlambda/tomography.hpp"

using namespace nvlambda;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

LambdaParams cpt_params() {
  LambdaParams p;
  p.laser_detuning = -0.684 * kTwoPi;
  p.excited_splitting = 180.0 * kTwoPi;
  p.rabi_amplitude = 46.507 * kTwoPi;
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

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("spectrum scan is bitwise independent of thread count") {
  const LambdaParams p = cpt_params();
  const DecayRates rates = cpt_rates();

  std::vector<double> detunings;
  for (int i = 0; i < 64; ++i) {
    detunings.push_back(kTwoPi * (-10.0 + 20.0 * i / 63.0));
  }

  const auto serial = simulate_cpt_spectrum(p, rates, detunings, false);
  const auto threaded = simulate_cpt_spectrum(p, rates, detunings, true);

  REQUIRE(serial.size() == detunings.size());
  REQUIRE(threaded.size() == detunings.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CAPTURE(i);
    CHECK(serial[i] == threaded[i]);  // bitwise
    CHECK(serial[i] > 0.0);
  }
}

TEST_CASE("posterior sampling is bitwise independent of thread count") {
  // A small but non-trivial dataset; exact values are irrelevant, only that
  // both schedules walk the identical chain trajectories.
  std::vector<TomoRecord> records;
  auto add = [&](const char* id, Projection proj, double counts) {
    TomoRecord rec;
    rec.id = id;
    rec.projection = proj;
    rec.counts = counts;
    rec.shots = 2.0;
    records.push_back(rec);
  };
  add("x0", Projection::X, 61000.0);
  add("x1", Projection::X, 58000.0);
  add("y0", Projection::Y, 43000.0);
  add("y1", Projection::Y, 45500.0);
  add("z0", Projection::Z, 70500.0);
  add("z1", Projection::Z, 69000.0);
  add("n0", Projection::Norm0, 99000.0);
  add("n1", Projection::Norm1, 30000.0);

  SamplerOptions opts;
  opts.chains = 4;
  opts.tries = 3;
  opts.iterations = 250;
  opts.burn_in = 150;
  opts.archive_stride = 5;
  opts.f0_max = 2.0e5;

  opts.parallel = false;
  const PosteriorArchive serial = sample_posterior(records, opts, 42);
  opts.parallel = true;
  const PosteriorArchive threaded = sample_posterior(records, opts, 42);

  REQUIRE(serial.chains.size() == threaded.chains.size());
  REQUIRE(serial.chains.size() == 4);
  for (std::size_t c = 0; c < serial.chains.size(); ++c) {
    REQUIRE(serial.chains[c].size() == threaded.chains[c].size());
    REQUIRE(serial.chains[c].size() == 250);
    for (std::size_t i = 0; i < serial.chains[c].size(); ++i) {
      const TomoVector a = tomo_pack(serial.chains[c][i]);
      const TomoVector b = tomo_pack(threaded.chains[c][i]);
      for (int j = 0; j < kTomoDim; ++j) {
        CAPTURE(c);
        CAPTURE(i);
        CAPTURE(j);
        REQUIRE(a[j] == b[j]);  // bitwise
      }
      REQUIRE(serial.log_density[c][i] == threaded.log_density[c][i]);
    }
  }
  for (int j = 0; j < kTomoDim; ++j) {
    CHECK(serial.r_hat[j] == threaded.r_hat[j]);
  }
  CHECK(serial.acceptance_rate == threaded.acceptance_rate);
}

}  // TEST_SUITE
