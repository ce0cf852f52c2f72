#include "nvlambda/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <utility>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "nvlambda/rng.hpp"

namespace nvlambda {

namespace {

const cplx kI(0.0, 1.0);

double draw_poisson(std::mt19937_64& engine, double mean) {
  if (!(mean > 0.0)) return 0.0;
  std::poisson_distribution<long long> draw(mean);
  return static_cast<double>(draw(engine));
}

void validate(const PulseSequence& seq) {
  if (seq.shots < 1)
    throw std::invalid_argument("PulseSequence: shots must be >= 1");
  if (!(seq.collection_efficiency > 0.0) || seq.collection_efficiency > 1.0)
    throw std::invalid_argument(
        "PulseSequence: collection_efficiency must be in (0, 1]");
  int measured = 0;
  for (const Segment& seg : seq.segments) {
    std::visit(
        [&measured](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, OpticalDrive> ||
                        std::is_same_v<T, FreePrecession> ||
                        std::is_same_v<T, ReadoutWindow>) {
            if (s.duration < 0.0)
              throw std::invalid_argument("PulseSequence: negative duration");
          }
          if constexpr (std::is_same_v<T, ReadoutWindow>) {
            if (s.measured) ++measured;
          }
        },
        seg);
  }
  if (measured > 1)
    throw std::invalid_argument(
        "PulseSequence: at most one readout window may be measured");
}

// Analytic free-precession map on the ground coherence: detuning rotation,
// Gaussian T2* envelope, and the normalized hyperfine-triplet average.
Mat5 precess(const Mat5& m, const FreePrecession& seg, double tau) {
  const double wsum = seg.c1 + 1.0 + seg.c2;
  cplx factor = 0.0;
  const double dets[3] = {seg.detuning - seg.hyperfine, seg.detuning,
                          seg.detuning + seg.hyperfine};
  const double weights[3] = {seg.c1, 1.0, seg.c2};
  for (int j = 0; j < 3; ++j)
    factor += weights[j] * std::exp(-kI * dets[j] * tau);
  factor /= wsum;
  if (seg.t2_star > 0.0)
    factor *= std::exp(-tau * tau / (2.0 * seg.t2_star * seg.t2_star));
  Mat5 out = m;
  out(kIdx0g, kIdxPlus1g) *= factor;
  out(kIdxPlus1g, kIdx0g) *= std::conj(factor);
  return out;
}

struct TraceBuilder {
  SignalTrace trace;
  double clock = 0.0;

  void point(const DensityMatrix& rho, double rate) {
    trace.t.push_back(clock);
    trace.bloch.push_back(bloch_vector(rho));
    trace.pl.push_back(rate);
  }
};

}  // namespace

double pl_rate(const DensityMatrix& rho, const DecayRates& rates,
               double efficiency) {
  return efficiency * rates.radiative *
         (rho.population(kIdxRe1) + rho.population(kIdxLe1));
}

SignalTrace run_sequence(const PulseSequence& seq, const DensityMatrix& rho0,
                         std::uint64_t rng_seed) {
  (void)rng_seed;  // every segment is deterministic in expectation
  validate(seq);

  const double pool = static_cast<double>(seq.shots) * seq.collection_efficiency;
  TraceBuilder tb;
  DensityMatrix state = rho0;
  tb.point(state, 0.0);

  for (const Segment& seg : seq.segments) {
    if (const auto* reset = std::get_if<GreenReset>(&seg)) {
      state = DensityMatrix::ground_mixture(reset->population,
                                            1.0 - reset->population);
      tb.point(state, 0.0);
    } else if (const auto* rot = std::get_if<EsrRotation>(&seg)) {
      const Mat2 u = ground_unitary(std::cos(rot->axis_azimuth),
                                    std::sin(rot->axis_azimuth), 0.0,
                                    rot->angle);
      state = apply_ground_unitary(state, u);
      tb.point(state, 0.0);
    } else if (const auto* drive = std::get_if<OpticalDrive>(&seg)) {
      const Superoperator w =
          build_lindbladian(build_hamiltonian(drive->params), drive->rates);
      const int npts = std::max(2, drive->trace_points);
      std::vector<double> times(npts);
      for (int j = 0; j < npts; ++j)
        times[j] = drive->duration * j / (npts - 1);
      const std::vector<Mat5> path = w.evolve_raw_many(state, times);
      const double t0 = tb.clock;
      for (int j = 1; j < npts; ++j) {
        const DensityMatrix rho{path[j]};
        tb.clock = t0 + times[j];
        tb.point(rho, pool * pl_rate(rho, drive->rates, 1.0));
      }
      state = DensityMatrix(path.back());
    } else if (const auto* fp = std::get_if<FreePrecession>(&seg)) {
      const Mat5 m0 = state.matrix();
      const int npts = std::max(2, fp->trace_points);
      const double t0 = tb.clock;
      for (int j = 1; j < npts; ++j) {
        const double tau = fp->duration * j / (npts - 1);
        const DensityMatrix rho{precess(m0, *fp, tau)};
        tb.clock = t0 + tau;
        tb.point(rho, 0.0);
        if (j == npts - 1) state = rho;
      }
    } else if (const auto* ro = std::get_if<ReadoutWindow>(&seg)) {
      const int npts = std::max(2, ro->trace_points);
      if (ro->mode == ReadoutMode::Dbp) {
        const Superoperator w =
            build_lindbladian(build_hamiltonian(ro->drive), ro->rates);
        double counts = 0.0;
        if (ro->measured)
          counts = pool * ro->rates.radiative *
                   w.integrate_populations({kIdxRe1, kIdxLe1}, state,
                                           ro->duration);
        std::vector<double> times(npts);
        for (int j = 0; j < npts; ++j)
          times[j] = ro->duration * j / (npts - 1);
        const std::vector<Mat5> path = w.evolve_raw_many(state, times);
        const double t0 = tb.clock;
        for (int j = 1; j < npts; ++j) {
          const DensityMatrix rho{path[j]};
          tb.clock = t0 + times[j];
          tb.point(rho, pool * pl_rate(rho, ro->rates, 1.0));
        }
        state = DensityMatrix(path.back());
        if (ro->measured) {
          tb.trace.integrated_counts = counts;
          tb.trace.has_readout = true;
        }
      } else {
        // Spin-state-dependent flat rate; the spin is idealized as frozen.
        const double rate = pool * (ro->rate_ms0 * state.population(kIdx0g) +
                                    ro->rate_ms1 * state.population(kIdxPlus1g));
        const double t0 = tb.clock;
        for (int j = 1; j < npts; ++j) {
          tb.clock = t0 + ro->duration * j / (npts - 1);
          tb.point(state, rate);
        }
        if (ro->measured) {
          tb.trace.integrated_counts = rate * ro->duration;
          tb.trace.has_readout = true;
        }
      }
    }
  }

  tb.trace.final_state = state;
  return tb.trace;
}

std::vector<double> simulate_cpt_spectrum(
    const LambdaParams& p, const DecayRates& rates,
    const std::vector<double>& two_photon_detunings, bool parallel) {
  const int n = static_cast<int>(two_photon_detunings.size());
  std::vector<double> pl(n, 0.0);
  const DensityMatrix start = DensityMatrix::maximally_mixed_ground();
  std::exception_ptr error;

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    try {
      LambdaParams pi = p;
      pi.two_photon_offset = two_photon_detunings[i];
      const Superoperator w = build_lindbladian(build_hamiltonian(pi), rates);
      const DensityMatrix ss = stationary_state(w, start);
      pl[i] = pl_rate(ss, rates, 1.0);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return pl;
}

double initialization_fidelity(const LambdaParams& p, const DecayRates& rates,
                               const DensityMatrix& rho0, double drive_time,
                               double relax_time) {
  return initialization_fidelity_curve(p, rates, rho0, {drive_time},
                                       relax_time)[0];
}

std::vector<double> initialization_fidelity_curve(
    const LambdaParams& p, const DecayRates& rates, const DensityMatrix& rho0,
    const std::vector<double>& drive_times, double relax_time) {
  const Superoperator w_on = build_lindbladian(build_hamiltonian(p), rates);
  LambdaParams off = p;
  off.rabi_amplitude = 0.0;
  const Superoperator w_off = build_lindbladian(build_hamiltonian(off), rates);

  const std::vector<Mat5> driven = w_on.evolve_raw_many(rho0, drive_times);
  std::vector<double> out;
  out.reserve(driven.size());
  for (const Mat5& m : driven) {
    DensityMatrix rho{m};
    if (relax_time > 0.0) rho = evolve(w_off, rho, relax_time);
    out.push_back(bloch_fidelity(bloch_vector(rho)));
  }
  return out;
}

std::vector<double> synthesize_ramsey(const RamseyParams& p,
                                      const std::vector<double>& taus,
                                      long long shots, std::uint64_t rng_seed,
                                      const SynthOptions& opts) {
  if (taus.empty()) throw std::invalid_argument("synthesize: empty tau grid");
  if (shots < 1) throw std::invalid_argument("synthesize: shots must be >= 1");
  std::vector<double> counts(taus.size());
  const double ns = static_cast<double>(shots);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    const double isc =
        opts.isc_background * (1.0 - std::exp(-opts.isc_rate * tau));
    auto engine = make_engine(rng_seed, 0x52414d53ull, i);
    if (opts.paired) {
      const double signal = ramsey_model(tau, p) - p.background;
      const double base = p.background + isc;
      const double up = draw_poisson(engine, ns * (base + 0.5 * signal));
      const double down = draw_poisson(engine, ns * (base - 0.5 * signal));
      counts[i] = up - down;
    } else {
      counts[i] =
          draw_poisson(engine, ns * (ramsey_model(tau, p) + isc));
    }
  }
  return counts;
}

std::vector<double> synthesize_hahn(const HahnParams& p,
                                    const std::vector<double>& taus,
                                    long long shots, std::uint64_t rng_seed,
                                    const SynthOptions& opts) {
  if (taus.empty()) throw std::invalid_argument("synthesize: empty tau grid");
  if (shots < 1) throw std::invalid_argument("synthesize: shots must be >= 1");
  std::vector<double> counts(taus.size());
  const double ns = static_cast<double>(shots);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    const double isc =
        opts.isc_background * (1.0 - std::exp(-opts.isc_rate * tau));
    auto engine = make_engine(rng_seed, 0x4841484eull, i);
    if (opts.paired) {
      const double signal = hahn_model(tau, p) - p.background;
      const double base = p.background + isc;
      const double up = draw_poisson(engine, ns * (base + 0.5 * signal));
      const double down = draw_poisson(engine, ns * (base - 0.5 * signal));
      counts[i] = up - down;
    } else {
      counts[i] = draw_poisson(engine, ns * (hahn_model(tau, p) + isc));
    }
  }
  return counts;
}

}  // namespace nvlambda
