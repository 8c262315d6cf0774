#pragma once

#include "ditscale/errors.hpp"
#include "ditscale/run_store.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace ditscale {

// L(T, N) = (T_c / T)^alpha_T + (N_c / N)^alpha_N + L_inf, with T and N in `units`.
template <typename Scalar> struct LossSurface
{
  Scalar T_c{1};
  Scalar alpha_T{1};
  Scalar N_c{1};
  Scalar alpha_N{1};
  Scalar L_inf{0};
  UnitConvention units{};

  Scalar data_term(Scalar T) const
  {
    using std::pow;
    return pow(T_c / T, alpha_T);
  }
  Scalar model_term(Scalar N) const
  {
    using std::pow;
    return pow(N_c / N, alpha_N);
  }
};

using LossSurfaced = LossSurface<double>;

template <typename Scalar> Scalar eval_loss(LossSurface<Scalar> const &s, Scalar T, Scalar N)
{
  if (!(T > Scalar(0)) || !(N > Scalar(0))) {
    throw DomainError("eval_loss: T and N must be positive");
  }
  return s.data_term(T) + s.model_term(N) + s.L_inf;
}

// Parameter order used by every vector-valued helper below.
enum SurfaceParam : int
{
  kTc = 0,
  kAlphaT = 1,
  kNc = 2,
  kAlphaN = 3,
  kLinf = 4
};
inline constexpr std::array<char const *, 5> kSurfaceParamNames{"T_c", "alpha_T", "N_c", "alpha_N", "L_inf"};

template <typename Scalar> Eigen::Matrix<Scalar, 5, 1> surface_params(LossSurface<Scalar> const &s)
{
  return (Eigen::Matrix<Scalar, 5, 1>() << s.T_c, s.alpha_T, s.N_c, s.alpha_N, s.L_inf).finished();
}

template <typename Scalar>
LossSurface<Scalar> surface_from_params(Eigen::Matrix<Scalar, 5, 1> const &p, UnitConvention units = {})
{
  return LossSurface<Scalar>{p(kTc), p(kAlphaT), p(kNc), p(kAlphaN), p(kLinf), units};
}

// dL/d(parameter) at (T, N), in natural (not log) parameters.
template <typename Scalar>
Eigen::Matrix<Scalar, 5, 1> loss_gradient(LossSurface<Scalar> const &s, Scalar T, Scalar N)
{
  using std::log;
  Scalar const dt = s.data_term(T);
  Scalar const mt = s.model_term(N);
  Eigen::Matrix<Scalar, 5, 1> g;
  g(kTc) = s.alpha_T * dt / s.T_c;
  g(kAlphaT) = dt * log(s.T_c / T);
  g(kNc) = s.alpha_N * mt / s.N_c;
  g(kAlphaN) = mt * log(s.N_c / N);
  g(kLinf) = Scalar(1);
  return g;
}

struct SurfacePoint
{
  double T = 0.0;
  double N = 0.0;
  double loss = 0.0;
};

enum class FitObjective
{
  least_squares,
  huber
};

struct FitOptions
{
  FitObjective objective = FitObjective::least_squares;
  double huber_delta = 1e-3; // residual scale where Huber turns linear
  std::vector<double> exponent_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<double> linf_factors{0.5, 0.9};
  int max_iterations = 10000;
  double rel_tol = 1e-12;
  double identifiable_rel_stderr = 0.05;
  double unconstrained_fraction = 1e-6;
};

struct StartRecord
{
  std::size_t index = 0;
  std::array<double, 5> initial{};
  std::array<double, 5> final{};
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct LossSurfaceFit
{
  LossSurfaced surface;
  double objective = 0.0;
  double mse = 0.0;
  Eigen::VectorXd residuals; // observed - fitted
  // Standard errors of log-parameters (relative errors of the natural parameters).
  std::array<double, 5> rel_stderr{};
  std::array<bool, 5> identifiable{};
  bool data_term_unconstrained = false;
  bool model_term_unconstrained = false;
  std::size_t best_start = 0;
  std::vector<StartRecord> trace;
};

class ConvergenceError : public Error
{
public:
  ConvergenceError(std::string const &what, LossSurfaced best, double best_objective)
    : Error(what), best_(best), best_objective_(best_objective)
  {
  }
  const char *kind() const noexcept override { return "non_convergence"; }
  bool numeric() const noexcept override { return true; }
  LossSurfaced const &best() const { return best_; }
  double best_objective() const { return best_objective_; }

private:
  LossSurfaced best_;
  double best_objective_;
};

// Multi-start Levenberg-Marquardt over log-parameters. Points must already be in `units`.
LossSurfaceFit fit_loss_surface(std::span<SurfacePoint const> points, FitOptions const &options = {},
                                UnitConvention units = {});

// Refines from a single given surface (no multi-start); used for idempotence checks.
LossSurfaceFit refine_loss_surface(std::span<SurfacePoint const> points, LossSurfaced const &start,
                                   FitOptions const &options = {});

double fit_objective(std::span<SurfacePoint const> points, LossSurfaced const &s, FitOptions const &options = {});

double mse(std::span<double const> observed, std::span<double const> fitted);

// Fractional reduction from `before` to `after`, e.g. 0.455 for a 45.5% drop.
double mse_reduction(double before, double after);

std::vector<SurfacePoint> surface_points(std::span<Observation const> obs);

} // namespace ditscale
