#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nvlambda/quantum.hpp"

namespace nvlambda {

// The 11 inferred parameters of one tomography run: the Bloch state in
// spherical coordinates, the fluorescence scale and contrast of the readout,
// and six systematic pulse-error angles (radians).
struct TomoParams {
  double r = 0.0;
  double theta = 0.0;
  double phi = 0.0;
  double f0 = 1.0;        // fluorescence of |0_g>, counts
  double contrast = 0.0;  // C in [0, 1]
  double eps_y = 0.0;     // X-pulse axis components (axis (1, eps_y, eps_z))
  double eps_z = 0.0;
  double v_x = 0.0;       // Y-pulse axis components (axis (v_x, 1, v_z))
  double v_z = 0.0;
  double phi_err = 0.0;   // X-pulse angle error
  double theta_err = 0.0; // Y-pulse angle error
};

inline constexpr int kTomoDim = 11;
using TomoVector = Eigen::Matrix<double, kTomoDim, 1>;

// Vector layout: [r, theta, phi, f0, contrast, eps_y, eps_z, v_x, v_z,
// phi_err, theta_err].
TomoVector tomo_pack(const TomoParams& p);
TomoParams tomo_unpack(const TomoVector& v);

enum class Projection { X, Y, Z, Norm0, Norm1 };

// One fluorescence record: a pooled photon count for a projection readout or
// for one of the two normalization references (|0_g> and |+1_g>).
struct TomoRecord {
  std::string id;
  Projection projection = Projection::Z;
  double counts = 0.0;
  double shots = 1.0;
};

// Cartesian Bloch coordinates of the sampled state.
std::array<double, 3> tomo_bloch_xyz(const TomoParams& p);

// The two imperfect tomography pulses (X: nominal +pi/2 about ~x, used to read
// <Y>; Y: nominal -pi/2 about ~y, used to read <X>), including the axis-tilt
// and angle-error parameters.
std::pair<Mat2, Mat2> error_rotation_unitaries(const TomoParams& p);

// (<X>, <Y>, <Z>) as actually measured through the imperfect pulses.
std::array<double, 3> pauli_expectations(const TomoParams& p);

// Expected pooled counts for one record type:
// F0(1 - C/2) + F0(C/2)<P> for projections, F0 and F0(1-C) for the
// normalization references.
double expected_fluorescence(const TomoParams& p, Projection projection);

// Robust marginalized likelihood: per record
// -log(sqrt(2) pi sigma) - log(1 + (D - <F>)^2/(2 sigma^2)) with
// sigma = 2 sqrt(<F>). Throws when any expected fluorescence is <= 0.
double log_likelihood(const std::vector<TomoRecord>& data, const TomoParams& p);

// Reference prior on (r, theta, phi) (the printed density
// 0.00513299 (1-r^2)^{-1/2} log^2[(1-r)/(1+r)] sin(theta), uniform in phi),
// N(0, 5 deg) on the six error angles, uniform F0 on (0, f0_max], uniform C
// on [0, 1]. Returns -inf outside the support.
double log_prior(const TomoParams& p, double f0_max);

// Direct (non-MCMC) draw from the prior, used for archive seeding and for
// calibration tests.
TomoParams sample_prior(std::mt19937_64& engine, double f0_max);

struct SamplerOptions {
  int chains = 4;
  int tries = 7;        // multiple-try proposals per parallel-direction move
  int iterations = 4000;  // iterations per chain after burn-in (every thin-th kept)
  int burn_in = 1000;
  int thin = 1;
  int archive_stride = 10;       // append current states every Nth iteration
  double snooker_probability = 0.3;
  double f0_max = 0.0;  // <= 0: use 10 x the largest observed count
  bool ignore_data = false;  // flat likelihood; posterior = prior
  double rhat_threshold = 1.1;
  bool parallel = true;  // OpenMP over chains; results identical either way
};

struct PosteriorArchive {
  std::vector<std::vector<TomoParams>> chains;      // [chain][draw]
  std::vector<std::vector<double>> log_density;     // matching layout
  TomoVector r_hat = TomoVector::Zero();
  double acceptance_rate = 0.0;
  bool converged = false;
  double f0_max = 0.0;

  // All chains pooled, one scalar per draw.
  std::vector<double> pooled(int dim) const;
  std::vector<double> pooled_bloch(int axis) const;  // 0,1,2 -> x,y,z
  // Posterior mean of (1 + r)/2, the fidelity of each sampled state against
  // the unit vector along its own axis.
  double mean_bloch_fidelity() const;
};

// Multiple-try differential-evolution MCMC with a shared past-state archive.
// Deterministic for a fixed seed, independent of thread scheduling.
PosteriorArchive sample_posterior(const std::vector<TomoRecord>& data,
                                  const SamplerOptions& opts,
                                  std::uint64_t rng_seed);

// Shortest contiguous interval holding ceil(mass * N) of the sorted samples
// (leftmost on ties). Requires at least 100 samples and mass in (0, 1).
std::pair<double, double> hpd_interval(std::vector<double> samples,
                                       double mass);

}  // namespace nvlambda
