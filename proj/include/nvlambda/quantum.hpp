#pragma once
#include <Eigen/Dense>
#include <array>
#include <complex>

// Foundational state/operator types on the 5-level Hilbert space
// {|+1_g>, |0_g>, |R_e1>, |L_e1>, |S>} and Bloch-sphere algebra on the
// {|+1_g>, |0_g>} ground subspace.

namespace nvlambda {

using cplx = std::complex<double>;
using Mat5 = Eigen::Matrix<cplx, 5, 5>;
using Vec5 = Eigen::Matrix<cplx, 5, 1>;
using Mat2 = Eigen::Matrix<cplx, 2, 2>;

// Basis indices, fixed across all modules.
inline constexpr int kIdxPlus1g = 0;
inline constexpr int kIdx0g = 1;
inline constexpr int kIdxRe1 = 2;
inline constexpr int kIdxLe1 = 3;
inline constexpr int kIdxS = 4;

enum class Branch { R, L };

// Ground-subspace Pauli operators embedded in the 5-level space:
//   sigma_x = |+1_g><0_g| + |0_g><+1_g|
//   sigma_y = i(|+1_g><0_g| - |0_g><+1_g|)
//   sigma_z = |0_g><0_g| - |+1_g><+1_g|
Mat5 sigma_x5();
Mat5 sigma_y5();
Mat5 sigma_z5();

struct StateVector {
  Vec5 amp;

  // Normalizes; throws std::invalid_argument on a (near-)zero vector.
  explicit StateVector(const Vec5& a);
  StateVector() : amp(Vec5::Zero()) { amp(kIdx0g) = 1.0; }

  static StateVector basis(int index);
  // Ground-subspace superposition c0|0_g> + c1|+1_g>.
  static StateVector ground(cplx c0, cplx c1);
};

struct BlochVector {
  double x = 0, y = 0, z = 0;
  double r() const { return std::sqrt(x * x + y * y + z * z); }
};

class DensityMatrix {
 public:
  // Validates invariants, with tolerance clamping:
  //   Hermiticity: accepted if max|rho - rho^dag| <= 1e-9, then symmetrized.
  //   Trace:       accepted if |Tr - 1| <= 1e-8, then renormalized.
  //   Positivity:  accepted if min eigenvalue >= -1e-9; negative eigenvalues
  //                within tolerance are clamped to 0 and the trace restored.
  // Violations beyond tolerance throw std::invalid_argument.
  explicit DensityMatrix(const Mat5& m);

  static DensityMatrix pure(const StateVector& psi);
  // Diagonal ground mixture p0|0_g><0_g| + p1|+1_g><+1_g| (p0 + p1 = 1).
  static DensityMatrix ground_mixture(double p0, double p1);
  static DensityMatrix maximally_mixed_ground();

  const Mat5& matrix() const { return m_; }
  double population(int index) const { return m_(index, index).real(); }
  double ground_population() const {
    return population(kIdxPlus1g) + population(kIdx0g);
  }

 private:
  Mat5 m_;
};

// (Tr(sigma_x rho), Tr(sigma_y rho), Tr(sigma_z rho)); population outside the
// ground subspace shortens the vector.
BlochVector bloch_vector(const DensityMatrix& rho);

// Bloch vector of the renormalized ground-subspace qubit, b / p_ground
// (the quantity a ground-subspace tomography reconstructs). Returns the raw
// (zero) vector if the ground population is below `min_population`.
BlochVector bloch_vector_qubit(const DensityMatrix& rho,
                               double min_population = 1e-12);

// Dark state cos(theta/2)|0_g> - e^{-i phi} sin(theta/2)|+1_g> for branch R;
// branch L flips the sign of the |+1_g> amplitude (azimuth shifted by pi),
// which is the unique choice that decouples from the L drive couplings.
StateVector dark_state(double theta, double phi, Branch branch);
// Orthogonal ground-subspace complement of the dark state.
StateVector bright_state(double theta, double phi, Branch branch);

// <psi|rho|psi>, clamped to [0, 1]; throws if the imaginary part exceeds 1e-9.
double fidelity(const DensityMatrix& rho, const StateVector& psi);

// (1 + r)/2: fidelity between the mixed state with Bloch vector b and the unit
// vector along the same axis (0.5 at r = 0 by convention).
double bloch_fidelity(const BlochVector& b);

// exp(-i (n . sigma) angle / 2) on the ground subspace, axis normalized.
// Closed form: cos(a/2) I - i sin(a/2) (n . sigma).
Mat2 ground_unitary(double nx, double ny, double nz, double angle);

// Embed a ground-subspace unitary into the 5-level space (identity elsewhere).
// Row/col 0 of u acts on |0_g>, row/col 1 on |+1_g> (so the 2x2 basis order is
// {|0_g>, |+1_g>}, matching sigma_z = diag(+1, -1)).
Mat5 embed_ground(const Mat2& u);

// Apply a ground-subspace unitary to a state.
DensityMatrix apply_ground_unitary(const DensityMatrix& rho, const Mat2& u);

// Ground-subspace 2x2 Paulis in basis {|0_g>, |+1_g>} (sigma_z = diag(1,-1)).
Mat2 pauli2(int axis);  // 0->x, 1->y, 2->z

// Density matrix of the qubit with Bloch vector (r, theta, phi) embedded in
// the 5-level space (no population outside the ground subspace).
DensityMatrix from_bloch(double r, double theta, double phi);

}  // namespace nvlambda
