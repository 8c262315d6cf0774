#pragma once

#include "ditscale/run_store.hpp"

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace ditscale {

// y = coef * x^exponent
template <typename Scalar> struct PowerLaw1
{
  Scalar coef{1};
  Scalar exponent{0};

  Scalar operator()(Scalar x) const
  {
    using std::pow;
    return coef * pow(x, exponent);
  }
};

// y = alpha * T^beta * N^gamma, with T and N expressed in `units`.
template <typename Scalar> struct PowerLaw2
{
  Scalar alpha{1};
  Scalar beta{0};
  Scalar gamma{0};
  UnitConvention units{};

  Scalar operator()(Scalar T, Scalar N) const
  {
    using std::pow;
    return alpha * pow(T, beta) * pow(N, gamma);
  }
};

// y = a x^2 + b x + c over x = log10 N, vertex precomputed.
struct ParabolaFit
{
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double x_min = 0.0;
  double y_min = 0.0;
  std::size_t n_points = 0;

  double operator()(double x) const { return (a * x + b) * x + c; }
};

// OLS diagnostics in log space. stderr entries are NaN when the fit has no
// residual degrees of freedom.
struct FitDiagnostics
{
  Eigen::VectorXd residuals;
  Eigen::VectorXd stderr_;
  double r2 = 0.0;
  double sigma2 = 0.0;
  std::size_t n_points = 0;
};

template <typename Law> struct Fitted
{
  Law law;
  FitDiagnostics diag;
};

using PowerLaw1d = PowerLaw1<double>;
using PowerLaw2d = PowerLaw2<double>;

struct PowerLawPoint2
{
  double T = 0.0;
  double N = 0.0;
  double y = 0.0;
};

struct Point2
{
  double x = 0.0;
  double y = 0.0;
};

// Ordinary least squares of log y on (1, log T, log N). stderr order: (log alpha, beta, gamma).
Fitted<PowerLaw2d> fit_powerlaw2(std::span<PowerLawPoint2 const> points, UnitConvention units = {});

// Least squares of log y on (1, log x). stderr order: (log coef, exponent).
Fitted<PowerLaw1d> fit_powerlaw1(std::span<Point2 const> points);

// Least-squares quadratic through (x, y), rejecting fits that open downward.
ParabolaFit fit_parabola_min(std::span<Point2 const> points);

// Observation helpers for the hyperparameter laws; observations must already be in `units`.
std::vector<PowerLawPoint2> batch_points(std::span<Observation const> obs);
std::vector<PowerLawPoint2> lr_points(std::span<Observation const> obs);

} // namespace ditscale
