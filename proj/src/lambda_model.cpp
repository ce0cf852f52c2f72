#include "nvlambda/lambda_model.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace nvlambda {

namespace {

const cplx kI(0.0, 1.0);

Mat25 kron5(const Mat5& a, const Mat5& b) {
  Mat25 k;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) k.block<5, 5>(5 * i, 5 * j) = a(i, j) * b;
  return k;
}

// Dissipator of a single jump operator, vectorized (column stacking):
// rate * (conj(L) (x) L - 1/2 I (x) L'L - 1/2 (L'L)^T (x) I).
void add_channel(Mat25& w, const Mat5& jump, double rate) {
  if (rate <= 0.0) return;
  const Mat5 ldl = jump.adjoint() * jump;
  w += rate * (kron5(jump.conjugate(), jump) -
               0.5 * kron5(Mat5::Identity(), ldl) -
               0.5 * kron5(ldl.transpose(), Mat5::Identity()));
}

Mat5 lower(int to, int from) {
  Mat5 m = Mat5::Zero();
  m(to, from) = 1.0;
  return m;
}

void validate_rates(const DecayRates& r) {
  const double all[] = {r.radiative,   r.isc,         r.singlet_decay,
                        r.singlet_to_0g, r.singlet_to_plus1g,
                        r.ground_flip, r.dephasing};
  for (double v : all)
    if (!(v >= 0.0)) throw std::invalid_argument("DecayRates: negative rate");
  if (std::abs(r.singlet_to_0g + r.singlet_to_plus1g - 1.0) > 1e-12)
    throw std::invalid_argument("DecayRates: singlet branching must sum to 1");
}

// (e^{z} - 1)/z with a series near zero, where z = lambda * t.
cplx expm1_over(cplx z) {
  if (std::abs(z) < 1e-8) return 1.0 + 0.5 * z + z * z / 6.0;
  return (std::exp(z) - 1.0) / z;
}

}  // namespace

Vec25 vec5(const Mat5& m) {
  Vec25 v;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) v(5 * j + i) = m(i, j);
  return v;
}

Mat5 unvec5(const Vec25& v) {
  Mat5 m;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) m(i, j) = v(5 * j + i);
  return m;
}

Mat5 build_hamiltonian(const LambdaParams& p) {
  if (p.rabi_amplitude < 0.0)
    throw std::invalid_argument("LambdaParams: rabi_amplitude must be >= 0");
  if (p.excited_splitting < 0.0)
    throw std::invalid_argument("LambdaParams: excited_splitting must be >= 0");

  Mat5 h = Mat5::Zero();
  h(kIdxPlus1g, kIdxPlus1g) = p.laser_detuning + p.two_photon_offset;
  h(kIdx0g, kIdx0g) = p.laser_detuning;
  h(kIdxRe1, kIdxRe1) = 0.0;
  h(kIdxLe1, kIdxLe1) = -p.excited_splitting;
  h(kIdxS, kIdxS) = p.singlet_shift;

  const double c = p.rabi_amplitude * std::cos(0.5 * p.drive_theta);
  const cplx s = p.rabi_amplitude * std::sin(0.5 * p.drive_theta) *
                 std::exp(kI * p.drive_phi);
  if (p.branch != DriveBranch::L) {
    h(kIdxPlus1g, kIdxRe1) = c;
    h(kIdx0g, kIdxRe1) = s;
    h(kIdxRe1, kIdxPlus1g) = c;
    h(kIdxRe1, kIdx0g) = std::conj(s);
  }
  if (p.branch != DriveBranch::R) {
    h(kIdxPlus1g, kIdxLe1) = c;
    h(kIdx0g, kIdxLe1) = -s;
    h(kIdxLe1, kIdxPlus1g) = c;
    h(kIdxLe1, kIdx0g) = -std::conj(s);
  }
  return h;
}

Superoperator build_lindbladian(const Mat5& h, const DecayRates& rates) {
  if ((h - h.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("build_lindbladian: H must be Hermitian");
  validate_rates(rates);

  // Coherent part: vec(i[rho, H]) = i (H^T (x) I - I (x) H) vec(rho).
  Mat25 w = kI * (kron5(h.transpose(), Mat5::Identity()) -
                  kron5(Mat5::Identity(), h));

  for (int e : {kIdxRe1, kIdxLe1}) {
    for (int g : {kIdxPlus1g, kIdx0g}) add_channel(w, lower(g, e), rates.radiative);
    add_channel(w, lower(kIdxS, e), rates.isc);
  }
  add_channel(w, lower(kIdx0g, kIdxS), rates.singlet_decay * rates.singlet_to_0g);
  add_channel(w, lower(kIdxPlus1g, kIdxS),
              rates.singlet_decay * rates.singlet_to_plus1g);
  add_channel(w, lower(kIdx0g, kIdxPlus1g), rates.ground_flip);
  add_channel(w, lower(kIdx0g, kIdx0g), rates.dephasing);

  return Superoperator(w);
}

Superoperator::Superoperator(const Mat25& w) : w_(w) {
  eivals_.setConstant(std::numeric_limits<double>::quiet_NaN());
  Eigen::ComplexEigenSolver<Mat25> solver(w_);
  if (solver.info() == Eigen::Success) {
    eivals_ = solver.eigenvalues();
    eivecs_ = solver.eigenvectors();
    Eigen::FullPivLU<Mat25> lu(eivecs_);
    if (lu.isInvertible()) {
      eivecs_inv_ = lu.inverse();
      const double wscale = std::max(1.0, w_.cwiseAbs().maxCoeff());
      const double recon_err =
          (eivecs_ * eivals_.asDiagonal() * eivecs_inv_ - w_)
              .cwiseAbs()
              .maxCoeff();
      const double cond = eivecs_.cwiseAbs().maxCoeff() *
                          eivecs_inv_.cwiseAbs().maxCoeff();
      spectral_ok_ = recon_err < 1e-8 * wscale && cond < 1e8;
    }
  }
}

Mat5 Superoperator::evolve_raw(const DensityMatrix& rho0, double t) const {
  if (t < 0.0) throw std::invalid_argument("evolve: t must be >= 0");
  if (t == 0.0) return rho0.matrix();
  const Vec25 v0 = vec5(rho0.matrix());
  Vec25 vt;
  if (spectral_ok_) {
    Vec25 c = eivecs_inv_ * v0;
    for (int k = 0; k < 25; ++k) c(k) *= std::exp(eivals_(k) * t);
    vt = eivecs_ * c;
  } else {
    const Mat25 propagator = (w_ * t).exp();
    vt = propagator * v0;
  }
  if (!vt.allFinite())
    throw std::runtime_error("evolve: matrix exponential did not converge");
  return unvec5(vt);
}

std::vector<Mat5> Superoperator::evolve_raw_many(
    const DensityMatrix& rho0, const std::vector<double>& times) const {
  std::vector<Mat5> out;
  out.reserve(times.size());
  if (spectral_ok_) {
    const Vec25 c = eivecs_inv_ * vec5(rho0.matrix());
    for (double t : times) {
      if (t < 0.0) throw std::invalid_argument("evolve: t must be >= 0");
      if (t == 0.0) {
        out.push_back(rho0.matrix());
        continue;
      }
      Vec25 ct;
      for (int k = 0; k < 25; ++k) ct(k) = c(k) * std::exp(eivals_(k) * t);
      const Vec25 vt = eivecs_ * ct;
      if (!vt.allFinite())
        throw std::runtime_error("evolve: matrix exponential did not converge");
      out.push_back(unvec5(vt));
    }
  } else {
    for (double t : times) out.push_back(evolve_raw(rho0, t));
  }
  return out;
}

double Superoperator::integrate_populations(const std::vector<int>& levels,
                                            const DensityMatrix& rho0,
                                            double duration) const {
  if (duration < 0.0)
    throw std::invalid_argument("integrate_populations: negative duration");
  if (duration == 0.0) return 0.0;
  // Linear functional picking out the requested diagonal entries of vec(rho).
  Vec25 f = Vec25::Zero();
  for (int lvl : levels) f(5 * lvl + lvl) = 1.0;

  if (spectral_ok_) {
    const Vec25 c = eivecs_inv_ * vec5(rho0.matrix());
    const Eigen::Matrix<cplx, 1, 25> fv = f.transpose() * eivecs_;
    cplx total = 0.0;
    for (int k = 0; k < 25; ++k)
      total += fv(k) * c(k) * duration * expm1_over(eivals_(k) * duration);
    return total.real();
  }

  // Composite Simpson on a fine grid, stepping with a fixed propagator.
  const int n = 2048;  // even panel count
  const double h = duration / n;
  const Mat25 step = (w_ * h).exp();
  Vec25 v = vec5(rho0.matrix());
  auto pick = [&f](const Vec25& x) { return f.dot(x).real(); };
  double sum = pick(v);
  for (int m = 1; m < n; ++m) {
    v = step * v;
    sum += (m % 2 == 1 ? 4.0 : 2.0) * pick(v);
  }
  v = step * v;
  sum += pick(v);
  return sum * h / 3.0;
}

DensityMatrix evolve(const Superoperator& w, const DensityMatrix& rho0,
                     double t) {
  return DensityMatrix(w.evolve_raw(rho0, t));
}

DensityMatrix stationary_state(const Superoperator& w,
                               const DensityMatrix& rho0) {
  const double kNullTol = 1e-8;
  const double kResidualTol = 1e-7;

  auto residual_of = [&w](const DensityMatrix& rho) {
    return (w.matrix() * vec5(rho.matrix())).norm();
  };

  if (w.spectral_path()) {
    int null_index = -1;
    int null_count = 0;
    for (int k = 0; k < 25; ++k) {
      if (std::abs(w.eigenvalues()(k)) < kNullTol) {
        null_index = k;
        ++null_count;
      }
    }
    if (null_count == 1) {
      // Recover the physical normalization: the stationary state has unit
      // trace, so dividing the raw eigenvector by its trace removes the
      // arbitrary complex scale.
      Mat5 m = unvec5(w.eigenvectors().col(null_index));
      const cplx tr = m.trace();
      if (std::abs(tr) > 1e-10) {
        m /= tr;
        m = 0.5 * (m + m.adjoint().eval());
        DensityMatrix rho(m);
        if (residual_of(rho) < kResidualTol) return rho;
      }
    }
  }

  // Degenerate kernel (or untrusted spectrum): relax rho0 until slower than
  // the slowest decaying mode by a wide margin.
  double slowest = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 25; ++k) {
    const double re = w.eigenvalues()(k).real();
    if (re < -1e-10) slowest = std::min(slowest, -re);
  }
  DensityMatrix rho = rho0;
  if (std::isfinite(slowest)) rho = evolve(w, rho0, 50.0 / slowest);
  if (residual_of(rho) < kResidualTol) return rho;

  // Last resort for an untrusted spectrum: keep relaxing geometrically.
  double t = std::isfinite(slowest) ? 100.0 / slowest : 1.0;
  for (int attempt = 0; attempt < 8; ++attempt, t *= 4.0) {
    rho = evolve(w, rho, t);
    if (residual_of(rho) < kResidualTol) return rho;
  }
  throw std::runtime_error(
      "stationary_state: no unique null vector and the long-time limit did "
      "not converge");
}

}  // namespace nvlambda
