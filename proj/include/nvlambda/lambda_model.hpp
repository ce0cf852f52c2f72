#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nvlambda/quantum.hpp"

namespace nvlambda {

using Mat25 = Eigen::Matrix<cplx, 25, 25>;
using Vec25 = Eigen::Matrix<cplx, 25, 1>;

// Column-stacking vectorization of a 5x5 matrix and its inverse.
Vec25 vec5(const Mat5& m);
Mat5 unvec5(const Vec25& v);

// Which optical branch the two-field drive addresses. `Both` is the physical
// configuration; the single-branch settings zero the couplings of the other
// excited level and exist for idealized pumping checks.
enum class DriveBranch { Both, R, L };

// Coherent model parameters. All energies/frequencies are angular (rad/us).
struct LambdaParams {
  double laser_detuning = 0.0;     // common detuning of both ground levels
  double excited_splitting = 0.0;  // energy of |L_e1> below |R_e1> (>= 0)
  double rabi_amplitude = 0.0;     // optical drive strength (>= 0)
  double drive_theta = 0.0;        // amplitude-ratio angle selecting the dark state
  double drive_phi = 0.0;          // relative drive phase
  double singlet_shift = 0.0;      // energy of the metastable singlet
  double two_photon_offset = 0.0;  // extra shift on |+1_g> only (spectrum scans)
  DriveBranch branch = DriveBranch::Both;
};

// Incoherent channels, plain exponential rates (1/us).
struct DecayRates {
  double radiative = 0.0;      // each excited level to each ground level
  double isc = 0.0;            // each excited level to the singlet
  double singlet_decay = 0.0;  // total singlet decay back to the ground manifold
  double singlet_to_0g = 1.0;      // branching weight of singlet decay into |0_g>
  double singlet_to_plus1g = 0.0;  // branching weight into |+1_g>
  double ground_flip = 0.0;    // |+1_g> -> |0_g> relaxation (reverse rate is 0)
  double dephasing = 0.0;      // pure dephasing, jump operator |0_g><0_g|
};

// Rotating-frame Hamiltonian on the basis {|+1_g>,|0_g>,|R_e1>,|L_e1>,|S>}:
// diagonal energies plus the four optical couplings, Hermitian by construction,
// with the singlet uncoupled. Throws on invalid parameters.
Mat5 build_hamiltonian(const LambdaParams& p);

// Generator of the master equation drho/dt = i[rho,H] + dissipators, stored as
// a 25x25 matrix acting on column-stacked density matrices. The spectral
// decomposition is computed once at construction; evolution falls back to
// scaling-and-squaring exponentials when the eigenvector matrix is
// ill-conditioned.
class Superoperator {
 public:
  explicit Superoperator(const Mat25& w);

  const Mat25& matrix() const { return w_; }
  const Vec25& eigenvalues() const { return eivals_; }
  const Mat25& eigenvectors() const { return eivecs_; }
  // True when evolution uses the cached eigendecomposition.
  bool spectral_path() const { return spectral_ok_; }

  // e^{Wt} applied to vec(rho0), returned without any tolerance clamping so
  // callers can measure raw trace/Hermiticity/positivity drift.
  Mat5 evolve_raw(const DensityMatrix& rho0, double t) const;

  // Same states at many times, reusing one spectral projection of rho0.
  std::vector<Mat5> evolve_raw_many(const DensityMatrix& rho0,
                                    const std::vector<double>& times) const;

  // Integral over [0, duration] of the summed populations of `levels` along
  // the trajectory started at rho0 (closed form on the spectral path,
  // fine-grained Simpson quadrature otherwise).
  double integrate_populations(const std::vector<int>& levels,
                               const DensityMatrix& rho0,
                               double duration) const;

 private:
  Mat25 w_;
  Vec25 eivals_;
  Mat25 eivecs_;
  Mat25 eivecs_inv_;
  bool spectral_ok_ = false;
};

Superoperator build_lindbladian(const Mat5& h, const DecayRates& rates);

// e^{Wt} vec(rho0), validated and clamped into a DensityMatrix.
// Throws if the exponentiation produced non-finite entries or the result is
// too far from a physical state.
DensityMatrix evolve(const Superoperator& w, const DensityMatrix& rho0, double t);

// Stationary state of W: the unique null eigenvector (eigenvalue magnitude
// < 1e-8) normalized to unit trace, or, when the kernel is degenerate, the
// long-time limit of rho0 under W. Throws when the residual |W vec(rho)| stays
// above 1e-7.
DensityMatrix stationary_state(const Superoperator& w, const DensityMatrix& rho0);

}  // namespace nvlambda
