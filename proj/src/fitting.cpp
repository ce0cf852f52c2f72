#include "nvlambda/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

namespace nvlambda {

namespace {

std::vector<double> effective_weights(const CurveData& data) {
  if (!data.weight.empty()) {
    if (data.weight.size() != data.counts.size())
      throw std::invalid_argument("fit: weight/counts size mismatch");
    for (double w : data.weight)
      if (!(w > 0.0)) throw std::invalid_argument("fit: weights must be > 0");
    return data.weight;
  }
  std::vector<double> w(data.counts.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = 1.0 / std::max(data.counts[i], 1.0);
  return w;
}

// Center-frequency estimate by a discrete spectral scan of the data against
// its mean, used to seed the Ramsey fit.
double dominant_frequency(const CurveData& data, double lo, double hi) {
  const std::size_t n = data.counts.size();
  double mean = 0.0;
  for (double y : data.counts) mean += y;
  mean /= static_cast<double>(n);

  double best_w = lo, best_power = -1.0;
  const int steps = 600;
  for (int s = 0; s <= steps; ++s) {
    const double w = lo + (hi - lo) * s / steps;
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc += (data.counts[i] - mean) *
             std::exp(std::complex<double>(0.0, -w * data.tau[i]));
    const double power = std::norm(acc);
    if (power > best_power) {
      best_power = power;
      best_w = w;
    }
  }
  return best_w;
}

}  // namespace

double ramsey_model(double tau, const RamseyParams& p) {
  const double envelope =
      std::exp(-tau * tau / (2.0 * p.t2_star * p.t2_star));
  const double x = tau - p.tau0;
  const double osc = p.c1 * std::cos((p.delta_omega - p.omega_hf) * x) +
                     std::cos(p.delta_omega * x) +
                     p.c2 * std::cos((p.delta_omega + p.omega_hf) * x);
  return p.amplitude * envelope * osc + p.background;
}

double hahn_model(double tau, const HahnParams& p) {
  const double u = tau / p.t2;
  return p.amplitude * std::exp(-u * u * u) + p.background;
}

double required_readouts(const ReadoutLevels& levels) {
  if (!(levels.dark >= 0.0) || !(levels.bright > levels.dark))
    throw std::invalid_argument(
        "required_readouts: needs bright > dark >= 0 (undefined SNR)");
  if (!(levels.shots > 0.0))
    throw std::invalid_argument("required_readouts: shots must be > 0");
  const double contrast = levels.bright - levels.dark;
  return 0.5 * levels.shots * (levels.bright + levels.dark) /
         (contrast * contrast);
}

Eigen::VectorXd pack(const RamseyParams& p) {
  Eigen::VectorXd v(8);
  v << p.amplitude, p.t2_star, p.delta_omega, p.omega_hf, p.tau0, p.c1, p.c2,
      p.background;
  return v;
}

RamseyParams unpack_ramsey(const Eigen::VectorXd& v) {
  RamseyParams p;
  p.amplitude = v(0);
  p.t2_star = v(1);
  p.delta_omega = v(2);
  p.omega_hf = v(3);
  p.tau0 = v(4);
  p.c1 = v(5);
  p.c2 = v(6);
  p.background = v(7);
  return p;
}

Eigen::VectorXd pack(const HahnParams& p) {
  Eigen::VectorXd v(3);
  v << p.amplitude, p.t2, p.background;
  return v;
}

HahnParams unpack_hahn(const Eigen::VectorXd& v) {
  HahnParams p;
  p.amplitude = v(0);
  p.t2 = v(1);
  p.background = v(2);
  return p;
}

ParametricModel ramsey_parametric() {
  return [](double tau, const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    const double a = v(0), t2s = v(1), dw = v(2), whf = v(3), tau0 = v(4),
                 c1 = v(5), c2 = v(6);
    const double env = std::exp(-tau * tau / (2.0 * t2s * t2s));
    const double x = tau - tau0;
    const double wm = dw - whf, wp = dw + whf;
    const double cm = std::cos(wm * x), c0 = std::cos(dw * x),
                 cp = std::cos(wp * x);
    const double sm = std::sin(wm * x), s0 = std::sin(dw * x),
                 sp = std::sin(wp * x);
    const double osc = c1 * cm + c0 + c2 * cp;
    if (grad) {
      grad->resize(8);
      (*grad)(0) = env * osc;
      (*grad)(1) = a * env * osc * tau * tau / (t2s * t2s * t2s);
      (*grad)(2) = -a * env * x * (c1 * sm + s0 + c2 * sp);
      (*grad)(3) = -a * env * x * (-c1 * sm + c2 * sp);
      (*grad)(4) = a * env * (c1 * wm * sm + dw * s0 + c2 * wp * sp);
      (*grad)(5) = a * env * cm;
      (*grad)(6) = a * env * cp;
      (*grad)(7) = 1.0;
    }
    return a * env * osc + v(7);
  };
}

ParametricModel hahn_parametric() {
  return [](double tau, const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    const double a = v(0), t2 = v(1);
    const double u = tau / t2;
    const double decay = std::exp(-u * u * u);
    if (grad) {
      grad->resize(3);
      (*grad)(0) = decay;
      (*grad)(1) = a * decay * 3.0 * u * u * u / t2;
      (*grad)(2) = 1.0;
    }
    return a * decay + v(2);
  };
}

FitResult fit_model(const ParametricModel& f, const CurveData& data,
                    const Eigen::VectorXd& init, const FitOptions& opts) {
  const int n = static_cast<int>(data.tau.size());
  const int np = static_cast<int>(init.size());
  if (data.counts.size() != data.tau.size())
    throw std::invalid_argument("fit: tau/counts size mismatch");
  std::vector<bool> fixed = opts.fixed;
  if (fixed.empty()) fixed.assign(np, false);
  if (static_cast<int>(fixed.size()) != np)
    throw std::invalid_argument("fit: fixed-mask size mismatch");
  int nfree = 0;
  for (bool b : fixed) nfree += b ? 0 : 1;
  if (nfree == 0) throw std::invalid_argument("fit: all parameters fixed");
  if (n < 2 * np)
    throw std::invalid_argument("fit: need at least 2x as many points as parameters");

  const std::vector<double> w = effective_weights(data);

  Eigen::VectorXd p = init;
  Eigen::VectorXd grad_buf(np);

  auto chi2_of = [&](const Eigen::VectorXd& params) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = data.counts[i] - f(data.tau[i], params, nullptr);
      acc += w[i] * r * r;
    }
    return acc;
  };

  // One pass building J^T W J and J^T W r in-place.
  auto normal_equations = [&](const Eigen::VectorXd& params,
                              Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
    jtj.setZero(np, np);
    jtr.setZero(np);
    for (int i = 0; i < n; ++i) {
      const double value = f(data.tau[i], params, &grad_buf);
      if (!std::isfinite(value))
        throw std::runtime_error("fit: model returned a non-finite value");
      const double r = data.counts[i] - value;
      jtj.noalias() += w[i] * grad_buf * grad_buf.transpose();
      jtr.noalias() += w[i] * r * grad_buf;
    }
    for (int k = 0; k < np; ++k) {
      if (!fixed[k]) continue;
      jtj.row(k).setZero();
      jtj.col(k).setZero();
      jtj(k, k) = 1.0;
      jtr(k) = 0.0;
    }
  };

  FitResult out;
  double chi2 = chi2_of(p);
  if (!std::isfinite(chi2))
    throw std::runtime_error("fit: non-finite objective at the start point");
  double lambda = 1e-3;
  Eigen::MatrixXd jtj(np, np);
  Eigen::VectorXd jtr(np);
  bool converged = false;
  int iter = 0;

  for (; iter < opts.max_iterations && !converged; ++iter) {
    normal_equations(p, jtj, jtr);
    if (jtr.norm() < opts.gradient_tol) {
      converged = true;
      break;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      for (int k = 0; k < np; ++k)
        damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("fit: singular normal matrix");
      const Eigen::VectorXd step = ldlt.solve(jtr);
      if (!step.allFinite())
        throw std::runtime_error("fit: singular normal matrix");
      const Eigen::VectorXd trial = p + step;
      const double trial_chi2 = chi2_of(trial);
      if (std::isfinite(trial_chi2) && trial_chi2 <= chi2) {
        const double rel_step =
            step.norm() / std::max(p.norm(), 1e-12);
        p = trial;
        chi2 = trial_chi2;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_step < opts.step_tol) converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }
    if (!stepped) {
      // Damping saturated: accept the current point as a stationary point if
      // the gradient is already small, otherwise report non-convergence.
      converged = jtr.norm() < std::sqrt(opts.gradient_tol);
      break;
    }
  }

  out.parameters = p;
  out.chi2 = chi2;
  out.dof = n - nfree;
  out.iterations = iter;
  out.converged = converged;

  // Standard errors from the (undamped) inverse normal matrix.
  normal_equations(p, jtj, jtr);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(np, np);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
  if (lu.isInvertible()) {
    cov = lu.inverse();
    const double scale =
        (opts.scale_errors && out.dof > 0) ? chi2 / out.dof : 1.0;
    cov *= scale;
    for (int k = 0; k < np; ++k) {
      if (!fixed[k]) continue;
      cov.row(k).setZero();
      cov.col(k).setZero();
    }
  }
  out.covariance = cov;
  out.std_errors.resize(np);
  for (int k = 0; k < np; ++k)
    out.std_errors(k) = cov(k, k) > 0.0 ? std::sqrt(cov(k, k)) : 0.0;
  return out;
}

RamseyFit fit_ramsey(const CurveData& data, bool fix_background,
                     const FitOptions& opts) {
  if (data.tau.empty()) throw std::invalid_argument("fit: empty dataset");
  double ymin = data.counts[0], ymax = data.counts[0], ysum = 0.0;
  double tmax = 0.0;
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    ymin = std::min(ymin, data.counts[i]);
    ymax = std::max(ymax, data.counts[i]);
    ysum += data.counts[i];
    tmax = std::max(tmax, data.tau[i]);
  }
  const double ymean = ysum / static_cast<double>(data.counts.size());

  // Scan up to ~24 rad/us past the sampling-limited band edge; typical center
  // frequencies here are a few MHz (tens of rad/us).
  const double w_hint = dominant_frequency(data, 2.0, 120.0);

  FitOptions local = opts;
  local.fixed.assign(8, false);
  if (fix_background) local.fixed[7] = true;
  if (!opts.fixed.empty()) local.fixed = opts.fixed;

  RamseyParams start;
  start.amplitude = 0.35 * (ymax - ymin);
  start.t2_star = std::max(0.3 * tmax, 0.1);
  start.omega_hf = 2.0 * M_PI * 2.2;  // typical hyperfine splitting scale
  start.tau0 = 0.0;
  start.c1 = 1.0;
  start.c2 = 1.0;
  start.background = fix_background ? 0.0 : ymean;

  // The spectral peak may sit on the center line or on either satellite;
  // 8 candidate center frequencies cover those assignments.
  const double cands[8] = {w_hint,
                           w_hint - start.omega_hf,
                           w_hint + start.omega_hf,
                           0.5 * w_hint,
                           1.5 * w_hint,
                           w_hint - 0.5 * start.omega_hf,
                           w_hint + 0.5 * start.omega_hf,
                           2.0 * w_hint};

  const ParametricModel model = ramsey_parametric();
  FitResult best;
  bool have_best = false;
  for (double dw : cands) {
    if (dw <= 0.0) continue;
    RamseyParams s = start;
    s.delta_omega = dw;
    FitResult r;
    try {
      r = fit_model(model, data, pack(s), local);
    } catch (const std::runtime_error&) {
      continue;
    }
    if (!have_best || (r.converged && !best.converged) ||
        (r.converged == best.converged && r.chi2 < best.chi2)) {
      best = r;
      have_best = true;
    }
  }
  if (!have_best)
    throw std::runtime_error("fit: no Ramsey start converged");

  // Canonicalize sign conventions: flip negative frequencies (even model) and
  // fold a negative amplitude into tau0-free phase only when harmless.
  if (best.parameters(2) < 0.0) best.parameters(2) = -best.parameters(2);
  if (best.parameters(3) < 0.0) best.parameters(3) = -best.parameters(3);
  if (best.parameters(1) < 0.0) best.parameters(1) = -best.parameters(1);

  RamseyFit out;
  out.params = unpack_ramsey(best.parameters);
  out.errors = unpack_ramsey(best.std_errors);
  out.raw = best;
  return out;
}

HahnFit fit_hahn(const CurveData& data, bool fix_background,
                 const FitOptions& opts) {
  if (data.tau.empty()) throw std::invalid_argument("fit: empty dataset");
  double ymin = data.counts[0], ymax = data.counts[0], tmax = 0.0;
  double ylast = data.counts.back();
  for (std::size_t i = 0; i < data.counts.size(); ++i) {
    ymin = std::min(ymin, data.counts[i]);
    ymax = std::max(ymax, data.counts[i]);
    tmax = std::max(tmax, data.tau[i]);
  }

  FitOptions local = opts;
  local.fixed.assign(3, false);
  if (fix_background) local.fixed[2] = true;
  if (!opts.fixed.empty()) local.fixed = opts.fixed;

  HahnParams start;
  start.background = fix_background ? 0.0 : ylast;
  start.amplitude = (ymax - start.background);
  start.t2 = 0.5 * tmax;

  FitResult r = fit_model(hahn_parametric(), data, pack(start), local);
  if (r.parameters(1) < 0.0) r.parameters(1) = -r.parameters(1);
  HahnFit out;
  out.params = unpack_hahn(r.parameters);
  out.errors = unpack_hahn(r.std_errors);
  out.raw = r;
  return out;
}

}  // namespace nvlambda
