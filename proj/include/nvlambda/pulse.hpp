#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "nvlambda/fitting.hpp"
#include "nvlambda/lambda_model.hpp"
#include "nvlambda/quantum.hpp"

namespace nvlambda {

// --- Pulse segments -------------------------------------------------------

// Optical pumping reset: replaces any state by the ground mixture
// population |0_g> + (1 - population) |+1_g>, discarding coherences.
struct GreenReset {
  double population = 0.8;
};

// Ideal microwave rotation of the ground qubit about an equatorial axis
// (cos(axis_azimuth), sin(axis_azimuth), 0) by `angle`.
struct EsrRotation {
  double axis_azimuth = 0.0;
  double angle = 0.0;
};

// Lindblad evolution under a constant two-field optical drive.
struct OpticalDrive {
  LambdaParams params;
  DecayRates rates;
  double duration = 0.0;
  int trace_points = 201;  // grid points contributed to the output trace
};

// Coherence evolution with the lasers off: rotation of the ground coherence at
// `detuning`, Gaussian T2* envelope, and an incoherent average over the three
// hyperfine-split detunings {detuning - hyperfine, detuning,
// detuning + hyperfine} weighted (c1, 1, c2). Populations are untouched.
struct FreePrecession {
  double duration = 0.0;
  double detuning = 0.0;   // rad/us
  double t2_star = 1.0;    // us; Gaussian envelope exp(-tau^2 / (2 T2*^2))
  double hyperfine = 0.0;  // rad/us; 0 disables the triplet average
  double c1 = 1.0;
  double c2 = 1.0;
  int trace_points = 2;
};

enum class ReadoutMode { Dbp, CyclingZ };

// Photon-collection window. Dbp drives the transient optical response and
// integrates the radiative emission rate; CyclingZ models an off-resonant
// spin-dependent readout with flat per-state count rates.
struct ReadoutWindow {
  ReadoutMode mode = ReadoutMode::Dbp;
  double duration = 0.4;  // us
  bool measured = true;
  LambdaParams drive;  // Dbp only
  DecayRates rates;    // Dbp only
  double rate_ms0 = 0.020;  // CyclingZ: counts/us/shot when in |0_g>
  double rate_ms1 = 0.014;  // CyclingZ: counts/us/shot when in |+1_g>
  int trace_points = 2001;
};

using Segment =
    std::variant<GreenReset, EsrRotation, OpticalDrive, FreePrecession,
                 ReadoutWindow>;

struct PulseSequence {
  std::vector<Segment> segments;
  long long shots = 1;                 // repetitions pooled into the counts
  double collection_efficiency = 1.0;  // (0, 1]
};

// Time-resolved record of one sequence. pl is the expected detected photon
// rate pooled over all shots; integrated_counts is the expected total count in
// the measured readout window (consistent with quadrature of pl over it).
struct SignalTrace {
  std::vector<double> t;  // us, global time axis
  std::vector<BlochVector> bloch;
  std::vector<double> pl;  // counts/us, pooled over shots
  double integrated_counts = 0.0;
  bool has_readout = false;
  DensityMatrix final_state = DensityMatrix::ground_mixture(1.0, 0.0);
};

// Instantaneous detected emission rate for one shot:
// efficiency * radiative_rate * (excited populations).
double pl_rate(const DensityMatrix& rho, const DecayRates& rates,
               double efficiency);

// Applies the segments in order, sampling the trace as it goes.
// Deterministic; the seed is part of the interface for provenance only (no
// segment draws random numbers).
SignalTrace run_sequence(const PulseSequence& seq, const DensityMatrix& rho0,
                         std::uint64_t rng_seed);

// Steady-state PL rate (efficiency 1, single shot) for each two-photon
// detuning, implemented as an energy offset between the two ground levels.
// `parallel` toggles the OpenMP scan; results are identical either way.
std::vector<double> simulate_cpt_spectrum(
    const LambdaParams& p, const DecayRates& rates,
    const std::vector<double>& two_photon_detunings, bool parallel = true);

// Initialization-fidelity estimate of the CPT drive after time t, following
// the measured recipe: switch the drive off, let the optical populations relax
// for `relax_time`, then score the ground-state Bloch vector as (1 + r)/2.
double initialization_fidelity(const LambdaParams& p, const DecayRates& rates,
                               const DensityMatrix& rho0, double drive_time,
                               double relax_time = 0.45);

// Same estimate at many drive times, reusing the spectral decompositions.
std::vector<double> initialization_fidelity_curve(
    const LambdaParams& p, const DecayRates& rates, const DensityMatrix& rho0,
    const std::vector<double>& drive_times, double relax_time = 0.45);

// --- Synthetic datasets ---------------------------------------------------

struct SynthOptions {
  // Slowly-saturating afterglow from singlet decay added to the mean:
  // isc_background * (1 - exp(-isc_rate * tau)).
  double isc_background = 0.0;
  double isc_rate = 2.701;  // 1/us
  // When true, two traces with opposite signal phase are drawn and
  // differenced, cancelling the backgrounds (counts may then be negative).
  bool paired = false;
};

// Poisson-noisy counts of the Ramsey difference signal plus background.
// Means scale linearly with `shots`.
std::vector<double> synthesize_ramsey(const RamseyParams& p,
                                      const std::vector<double>& taus,
                                      long long shots, std::uint64_t rng_seed,
                                      const SynthOptions& opts = {});

// Poisson-noisy counts of the Hahn-echo decay plus background.
std::vector<double> synthesize_hahn(const HahnParams& p,
                                    const std::vector<double>& taus,
                                    long long shots, std::uint64_t rng_seed,
                                    const SynthOptions& opts = {});

}  // namespace nvlambda
