#include "nvlambda/quantum.hpp"

#include <cmath>
#include <stdexcept>

namespace nvlambda {

namespace {
constexpr double kHermTol = 1e-9;
constexpr double kTraceTol = 1e-8;
constexpr double kPsdTol = 1e-9;
const cplx kI(0.0, 1.0);
}  // namespace

Mat5 sigma_x5() {
  Mat5 s = Mat5::Zero();
  s(kIdxPlus1g, kIdx0g) = 1.0;
  s(kIdx0g, kIdxPlus1g) = 1.0;
  return s;
}

Mat5 sigma_y5() {
  Mat5 s = Mat5::Zero();
  s(kIdxPlus1g, kIdx0g) = kI;
  s(kIdx0g, kIdxPlus1g) = -kI;
  return s;
}

Mat5 sigma_z5() {
  Mat5 s = Mat5::Zero();
  s(kIdx0g, kIdx0g) = 1.0;
  s(kIdxPlus1g, kIdxPlus1g) = -1.0;
  return s;
}

StateVector::StateVector(const Vec5& a) : amp(a) {
  const double n = amp.norm();
  if (n < 1e-12) throw std::invalid_argument("StateVector: zero vector");
  amp /= n;
}

StateVector StateVector::basis(int index) {
  Vec5 v = Vec5::Zero();
  v(index) = 1.0;
  return StateVector(v);
}

StateVector StateVector::ground(cplx c0, cplx c1) {
  Vec5 v = Vec5::Zero();
  v(kIdx0g) = c0;
  v(kIdxPlus1g) = c1;
  return StateVector(v);
}

DensityMatrix::DensityMatrix(const Mat5& m) : m_(m) {
  const double herm_err = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm_err > kHermTol)
    throw std::invalid_argument("DensityMatrix: not Hermitian");
  m_ = 0.5 * (m_ + m_.adjoint().eval());

  const double tr = m_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol)
    throw std::invalid_argument("DensityMatrix: trace != 1");
  m_ /= tr;

  Eigen::SelfAdjointEigenSolver<Mat5> es(m_);
  const double min_ev = es.eigenvalues().minCoeff();
  if (min_ev < -kPsdTol)
    throw std::invalid_argument("DensityMatrix: not positive semidefinite");
  if (min_ev < 0.0) {
    // Project back: clamp negative eigenvalues, restore unit trace.
    Eigen::Matrix<double, 5, 1> ev = es.eigenvalues().cwiseMax(0.0);
    ev /= ev.sum();
    m_ = es.eigenvectors() * ev.asDiagonal().toDenseMatrix().cast<cplx>() *
         es.eigenvectors().adjoint();
    m_ = 0.5 * (m_ + m_.adjoint().eval());
  }
}

DensityMatrix DensityMatrix::pure(const StateVector& psi) {
  return DensityMatrix(psi.amp * psi.amp.adjoint());
}

DensityMatrix DensityMatrix::ground_mixture(double p0, double p1) {
  if (p0 < 0 || p1 < 0 || std::abs(p0 + p1 - 1.0) > 1e-12)
    throw std::invalid_argument("ground_mixture: weights must be a distribution");
  Mat5 m = Mat5::Zero();
  m(kIdx0g, kIdx0g) = p0;
  m(kIdxPlus1g, kIdxPlus1g) = p1;
  return DensityMatrix(m);
}

DensityMatrix DensityMatrix::maximally_mixed_ground() {
  return ground_mixture(0.5, 0.5);
}

BlochVector bloch_vector(const DensityMatrix& rho) {
  const Mat5& m = rho.matrix();
  // Tr(sigma_x rho) = 2 Re rho_{0g,+1g}; Tr(sigma_y rho) = 2 Im rho_{0g,+1g}
  // with the sign fixed by sigma_y = i(|+1><0| - |0><+1|).
  const cplx c = m(kIdx0g, kIdxPlus1g);
  BlochVector b;
  b.x = 2.0 * c.real();
  b.y = -2.0 * c.imag();
  b.z = m(kIdx0g, kIdx0g).real() - m(kIdxPlus1g, kIdxPlus1g).real();
  return b;
}

BlochVector bloch_vector_qubit(const DensityMatrix& rho, double min_population) {
  BlochVector b = bloch_vector(rho);
  const double pg = rho.ground_population();
  if (pg < min_population) return b;
  b.x /= pg;
  b.y /= pg;
  b.z /= pg;
  return b;
}

StateVector dark_state(double theta, double phi, Branch branch) {
  Vec5 v = Vec5::Zero();
  v(kIdx0g) = std::cos(0.5 * theta);
  const cplx amp = std::exp(-kI * phi) * std::sin(0.5 * theta);
  v(kIdxPlus1g) = (branch == Branch::R) ? -amp : amp;
  return StateVector(v);
}

StateVector bright_state(double theta, double phi, Branch branch) {
  Vec5 v = Vec5::Zero();
  v(kIdx0g) = std::sin(0.5 * theta);
  const cplx amp = std::exp(-kI * phi) * std::cos(0.5 * theta);
  v(kIdxPlus1g) = (branch == Branch::R) ? amp : -amp;
  return StateVector(v);
}

double fidelity(const DensityMatrix& rho, const StateVector& psi) {
  const cplx f = psi.amp.adjoint() * rho.matrix() * psi.amp;
  if (std::abs(f.imag()) > 1e-9)
    throw std::runtime_error("fidelity: non-real overlap (corrupted state)");
  double v = f.real();
  if (v < 0.0 && v > -1e-12) v = 0.0;
  if (v > 1.0 && v < 1.0 + 1e-9) v = 1.0;
  return v;
}

double bloch_fidelity(const BlochVector& b) { return 0.5 * (1.0 + b.r()); }

Mat2 pauli2(int axis) {
  Mat2 s = Mat2::Zero();
  switch (axis) {
    case 0:  // x: couples |0_g> and |+1_g|
      s(0, 1) = 1.0;
      s(1, 0) = 1.0;
      break;
    case 1:  // y: sigma_y in {|0_g>,|+1_g>} order, consistent with sigma_y5
      s(0, 1) = -kI;
      s(1, 0) = kI;
      break;
    case 2:  // z
      s(0, 0) = 1.0;
      s(1, 1) = -1.0;
      break;
    default:
      throw std::invalid_argument("pauli2: axis must be 0, 1, or 2");
  }
  return s;
}

Mat2 ground_unitary(double nx, double ny, double nz, double angle) {
  const double n = std::sqrt(nx * nx + ny * ny + nz * nz);
  if (n < 1e-15) throw std::invalid_argument("ground_unitary: zero axis");
  const Mat2 ns = (nx * pauli2(0) + ny * pauli2(1) + nz * pauli2(2)) / n;
  return std::cos(0.5 * angle) * Mat2::Identity() -
         kI * std::sin(0.5 * angle) * ns;
}

Mat5 embed_ground(const Mat2& u) {
  Mat5 full = Mat5::Identity();
  full(kIdx0g, kIdx0g) = u(0, 0);
  full(kIdx0g, kIdxPlus1g) = u(0, 1);
  full(kIdxPlus1g, kIdx0g) = u(1, 0);
  full(kIdxPlus1g, kIdxPlus1g) = u(1, 1);
  return full;
}

DensityMatrix apply_ground_unitary(const DensityMatrix& rho, const Mat2& u) {
  const Mat5 uu = embed_ground(u);
  return DensityMatrix(uu * rho.matrix() * uu.adjoint());
}

DensityMatrix from_bloch(double r, double theta, double phi) {
  if (r < 0 || r > 1.0 + 1e-9)
    throw std::invalid_argument("from_bloch: r outside [0,1]");
  const double x = r * std::sin(theta) * std::cos(phi);
  const double y = r * std::sin(theta) * std::sin(phi);
  const double z = r * std::cos(theta);
  Mat5 m = Mat5::Zero();
  // Qubit rho = (I + b.sigma)/2 written out on the ground-subspace block.
  m(kIdx0g, kIdx0g) = 0.5 * (1.0 + z);
  m(kIdxPlus1g, kIdxPlus1g) = 0.5 * (1.0 - z);
  m(kIdx0g, kIdxPlus1g) = 0.5 * (x - kI * y);
  m(kIdxPlus1g, kIdx0g) = 0.5 * (x + kI * y);
  return DensityMatrix(m);
}

}  // namespace nvlambda
