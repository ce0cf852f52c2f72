#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace nvlambda {

// Ramsey difference-signal model:
//   A exp(-tau^2/(2 T2*^2)) { c1 cos[(dw - whf)(tau - tau0)]
//                             + cos[dw (tau - tau0)]
//                             + c2 cos[(dw + whf)(tau - tau0)] } + background
struct RamseyParams {
  double amplitude = 0.0;    // A, counts
  double t2_star = 1.0;      // us
  double delta_omega = 0.0;  // rad/us
  double omega_hf = 0.0;     // rad/us
  double tau0 = 0.0;         // us
  double c1 = 1.0;
  double c2 = 1.0;
  double background = 0.0;   // counts
};

// Hahn-echo decay model: A exp(-(tau/T2)^3) + background.
struct HahnParams {
  double amplitude = 0.0;   // A, counts
  double t2 = 1.0;          // us
  double background = 0.0;  // counts
};

double ramsey_model(double tau, const RamseyParams& p);
double hahn_model(double tau, const HahnParams& p);

// Readout count levels pooled over `shots` repetitions.
struct ReadoutLevels {
  double bright = 0.0;
  double dark = 0.0;
  double shots = 0.0;
};

// Number of independent readouts needed for unit signal-to-noise:
// (shots/2)(bright + dark)/(bright - dark)^2. Throws unless
// bright > dark >= 0 and shots > 0.
double required_readouts(const ReadoutLevels& levels);

// --- Generic weighted Levenberg-Marquardt ---------------------------------

struct CurveData {
  std::vector<double> tau;     // us
  std::vector<double> counts;
  std::vector<double> weight;  // empty: default 1/max(counts, 1)
};

struct FitOptions {
  int max_iterations = 500;
  double step_tol = 1e-10;      // relative parameter-step convergence
  double gradient_tol = 1e-8;   // gradient-norm convergence
  // Scale the covariance by reduced chi-square (chi2/dof). Disable to report
  // errors taken at face value from the stated weights.
  bool scale_errors = true;
  std::vector<bool> fixed;      // per-parameter freeze mask (empty: all free)
};

struct FitResult {
  Eigen::VectorXd parameters;
  Eigen::VectorXd std_errors;   // zero for fixed parameters
  Eigen::MatrixXd covariance;   // zero rows/cols for fixed parameters
  double chi2 = 0.0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
};

// Model callback: returns the value at tau; when grad is non-null, fills the
// analytic derivative with respect to every parameter.
using ParametricModel =
    std::function<double(double tau, const Eigen::VectorXd& p, Eigen::VectorXd* grad)>;

// Minimizes sum_i w_i (y_i - f(tau_i))^2 by damped Gauss-Newton. Requires at
// least twice as many points as parameters and positive weights; throws on a
// singular normal matrix or non-finite model values. A run that exhausts the
// iteration budget returns converged = false.
FitResult fit_model(const ParametricModel& f, const CurveData& data,
                    const Eigen::VectorXd& init, const FitOptions& opts = {});

// Parameter packing used by the model wrappers below (vector layouts:
// Ramsey [A, T2*, dw, whf, tau0, c1, c2, bg]; Hahn [A, T2, bg]).
Eigen::VectorXd pack(const RamseyParams& p);
RamseyParams unpack_ramsey(const Eigen::VectorXd& v);
Eigen::VectorXd pack(const HahnParams& p);
HahnParams unpack_hahn(const Eigen::VectorXd& v);

// Models with analytic gradients in the packed layouts.
ParametricModel ramsey_parametric();
ParametricModel hahn_parametric();

struct RamseyFit {
  RamseyParams params;
  RamseyParams errors;
  FitResult raw;
};

struct HahnFit {
  HahnParams params;
  HahnParams errors;
  FitResult raw;
};

// Full Ramsey fit with automatic initialization: a discrete spectral scan
// seeds the center frequency, refined over a grid of 8 candidate starts; the
// best converged chi-square wins. fix_background pins background (to 0 by
// default) for differenced data.
RamseyFit fit_ramsey(const CurveData& data, bool fix_background = false,
                     const FitOptions& opts = {});

HahnFit fit_hahn(const CurveData& data, bool fix_background = false,
                 const FitOptions& opts = {});

}  // namespace nvlambda
