#include "ditscale/loss_surface.hpp"

#include "ditscale/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <set>

namespace ditscale {

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

struct Problem
{
  Eigen::VectorXd T, N, y;
  FitOptions const &opt;

  Eigen::Index size() const { return y.size(); }
};

LossSurfaced from_log(Vec5 const &q, UnitConvention units)
{
  return surface_from_params<double>(q.array().exp().matrix(), units);
}

// Residuals (fitted - observed); false if any evaluation is not finite.
bool residuals(Problem const &pb, LossSurfaced const &s, Eigen::VectorXd &r)
{
  r.resize(pb.size());
  for (Eigen::Index i = 0; i < pb.size(); ++i) {
    r(i) = s.data_term(pb.T(i)) + s.model_term(pb.N(i)) + s.L_inf - pb.y(i);
    if (!std::isfinite(r(i))) { return false; }
  }
  return true;
}

double objective_of(Problem const &pb, Eigen::VectorXd const &r)
{
  if (pb.opt.objective == FitObjective::least_squares) { return r.squaredNorm(); }
  double const delta = pb.opt.huber_delta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    double const a = std::abs(r(i));
    total += a <= delta ? a * a : 2.0 * delta * a - delta * delta;
  }
  return total;
}

Eigen::VectorXd irls_weights(Problem const &pb, Eigen::VectorXd const &r)
{
  Eigen::VectorXd w = Eigen::VectorXd::Ones(r.size());
  if (pb.opt.objective == FitObjective::huber) {
    double const delta = pb.opt.huber_delta;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      double const a = std::abs(r(i));
      if (a > delta) { w(i) = delta / a; }
    }
  }
  return w;
}

// Jacobian of the fitted values with respect to the log-parameters.
Eigen::Matrix<double, Eigen::Dynamic, 5> jacobian(Problem const &pb, LossSurfaced const &s)
{
  Eigen::Matrix<double, Eigen::Dynamic, 5> J(pb.size(), 5);
  Vec5 const p = surface_params(s);
  for (Eigen::Index i = 0; i < pb.size(); ++i) {
    J.row(i) = loss_gradient(s, pb.T(i), pb.N(i)).cwiseProduct(p).transpose();
  }
  return J;
}

struct LocalResult
{
  Vec5 q;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

LocalResult levenberg_marquardt(Problem const &pb, Vec5 q, UnitConvention units)
{
  Eigen::VectorXd r;
  LocalResult out{q, std::numeric_limits<double>::infinity(), 0, false};
  if (!residuals(pb, from_log(q, units), r)) { return out; }
  double obj = objective_of(pb, r);
  double const floor = std::pow(1e-15 * pb.y.cwiseAbs().mean(), 2) * double(pb.size());
  double lambda = 1e-3;

  int it = 0;
  for (; it < pb.opt.max_iterations; ++it) {
    if (obj <= floor) {
      out.converged = true;
      break;
    }
    LossSurfaced const s = from_log(q, units);
    auto const J = jacobian(pb, s);
    Eigen::VectorXd const w = irls_weights(pb, r);
    Mat5 const A = J.transpose() * w.asDiagonal() * J;
    Vec5 const g = J.transpose() * w.cwiseProduct(r);
    if (g.cwiseAbs().maxCoeff() == 0.0) {
      out.converged = true;
      break;
    }

    bool accepted = false;
    while (!accepted) {
      Mat5 damped = A;
      damped.diagonal() += lambda * A.diagonal().cwiseMax(1e-12);
      Vec5 const step = damped.ldlt().solve(-g);
      Vec5 const trial = q + step;
      Eigen::VectorXd rt;
      double trial_obj = std::numeric_limits<double>::infinity();
      if (step.allFinite() && residuals(pb, from_log(trial, units), rt)) { trial_obj = objective_of(pb, rt); }
      if (trial_obj < obj) {
        double const rel = (obj - trial_obj) / obj;
        q = trial;
        r = rt;
        obj = trial_obj;
        lambda = std::max(lambda / 3.0, 1e-15);
        accepted = true;
        if (rel < pb.opt.rel_tol) { out.converged = true; }
      } else {
        lambda *= 4.0;
        if (lambda > 1e16) {
          // No descent direction left at machine precision.
          out.converged = true;
          break;
        }
      }
    }
    if (out.converged) {
      ++it;
      break;
    }
  }
  out.q = q;
  out.objective = obj;
  out.iterations = it;
  return out;
}

// Scale constants at fixed exponents and L_inf: y - L_inf = a T^-aT + b N^-aN, solved linearly.
Vec5 initial_guess(Problem const &pb, double alpha_T, double alpha_N, double l_inf)
{
  Eigen::MatrixXd X(pb.size(), 2);
  X.col(0) = pb.T.array().pow(-alpha_T);
  X.col(1) = pb.N.array().pow(-alpha_N);
  Eigen::VectorXd const rhs = pb.y.array() - l_inf;
  Eigen::Vector2d ab = X.colPivHouseholderQr().solve(rhs);
  double const fallback = std::max(1e-6, 1e-3 * rhs.cwiseAbs().mean());
  for (int k = 0; k < 2; ++k) {
    if (!(ab(k) > 0.0) || !std::isfinite(ab(k))) { ab(k) = fallback; }
  }
  Vec5 q;
  q(kTc) = std::log(ab(0)) / alpha_T;
  q(kAlphaT) = std::log(alpha_T);
  q(kNc) = std::log(ab(1)) / alpha_N;
  q(kAlphaN) = std::log(alpha_N);
  q(kLinf) = std::log(l_inf);
  return q;
}

Problem make_problem(std::span<SurfacePoint const> points, FitOptions const &options)
{
  Problem pb{Eigen::VectorXd(Eigen::Index(points.size())), Eigen::VectorXd(Eigen::Index(points.size())),
             Eigen::VectorXd(Eigen::Index(points.size())), options};
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto const &p = points[i];
    if (!(p.T > 0.0) || !(p.N > 0.0) || !(p.loss > 0.0)) {
      throw DomainError("fit_loss_surface: T, N and loss must be positive (point " + std::to_string(i) + ")");
    }
    pb.T(Eigen::Index(i)) = p.T;
    pb.N(Eigen::Index(i)) = p.N;
    pb.y(Eigen::Index(i)) = p.loss;
  }
  return pb;
}

LossSurfaceFit finish(Problem const &pb, Vec5 const &q, UnitConvention units)
{
  LossSurfaceFit fit;
  fit.surface = from_log(q, units);
  Eigen::VectorXd r;
  residuals(pb, fit.surface, r);
  fit.residuals = -r;
  fit.objective = objective_of(pb, r);
  fit.mse = r.squaredNorm() / double(r.size());

  double const loss_range = pb.y.maxCoeff() - pb.y.minCoeff();
  double const scale = std::max(loss_range, pb.y.cwiseAbs().mean());
  auto term_span = [&](auto &&term, Eigen::VectorXd const &x) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      double const v = term(x(i));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return hi - lo;
  };
  double const limit = pb.opt.unconstrained_fraction * scale;
  fit.data_term_unconstrained = term_span([&](double t) { return fit.surface.data_term(t); }, pb.T) < limit;
  fit.model_term_unconstrained = term_span([&](double n) { return fit.surface.model_term(n); }, pb.N) < limit;

  auto const J = jacobian(pb, fit.surface);
  Eigen::Index const dof = pb.size() - 5;
  fit.rel_stderr.fill(std::numeric_limits<double>::infinity());
  if (dof > 0) {
    double const sigma2 = r.squaredNorm() / double(dof);
    Mat5 const A = J.transpose() * J;
    Eigen::FullPivLU<Mat5> lu(A);
    if (lu.isInvertible()) {
      Vec5 const var = sigma2 * lu.inverse().diagonal();
      for (int k = 0; k < 5; ++k) {
        fit.rel_stderr[std::size_t(k)] = var(k) >= 0.0 ? std::sqrt(var(k)) : std::numeric_limits<double>::infinity();
      }
    }
  }
  for (int k = 0; k < 5; ++k) {
    bool const in_dead_term = ((k == kTc || k == kAlphaT) && fit.data_term_unconstrained) ||
                              ((k == kNc || k == kAlphaN) && fit.model_term_unconstrained);
    fit.identifiable[std::size_t(k)] = !in_dead_term && fit.rel_stderr[std::size_t(k)] <= pb.opt.identifiable_rel_stderr;
  }
  return fit;
}

std::array<double, 5> natural(Vec5 const &q)
{
  std::array<double, 5> a{};
  for (int k = 0; k < 5; ++k) { a[std::size_t(k)] = std::exp(q(k)); }
  return a;
}

} // namespace

LossSurfaceFit fit_loss_surface(std::span<SurfacePoint const> points, FitOptions const &options, UnitConvention units)
{
  if (points.size() < 8) { throw SingularityError("fit_loss_surface needs at least 8 points"); }
  std::set<double> ts, ns;
  for (auto const &p : points) {
    ts.insert(p.T);
    ns.insert(p.N);
  }
  if (ts.size() < 2 || ns.size() < 2) {
    throw SingularityError("fit_loss_surface needs at least 2 distinct T and 2 distinct N values");
  }
  Problem const pb = make_problem(points, options);
  double const min_loss = pb.y.minCoeff();

  std::vector<StartRecord> trace;
  std::size_t best = 0;
  Vec5 best_q = Vec5::Zero();
  double best_obj = std::numeric_limits<double>::infinity();
  bool any_converged = false;

  for (double aT : options.exponent_grid) {
    for (double aN : options.exponent_grid) {
      for (double f : options.linf_factors) {
        Vec5 const q0 = initial_guess(pb, aT, aN, f * min_loss);
        LocalResult const res = levenberg_marquardt(pb, q0, units);
        StartRecord rec{trace.size(), natural(q0), natural(res.q), res.objective, res.iterations, res.converged};
        if (res.converged) { any_converged = true; }
        if (res.objective < best_obj) {
          best_obj = res.objective;
          best_q = res.q;
          best = rec.index;
        }
        trace.push_back(rec);
      }
    }
  }
  if (!any_converged || !std::isfinite(best_obj)) {
    throw ConvergenceError("fit_loss_surface: no start converged within " + std::to_string(options.max_iterations) +
                             " iterations (best objective " + format_real(best_obj) + ")",
                           from_log(best_q, units), best_obj);
  }
  LossSurfaceFit fit = finish(pb, best_q, units);
  fit.best_start = best;
  fit.trace = std::move(trace);
  return fit;
}

LossSurfaceFit refine_loss_surface(std::span<SurfacePoint const> points, LossSurfaced const &start, FitOptions const &options)
{
  Problem const pb = make_problem(points, options);
  Vec5 const q0 = surface_params(start).array().log().matrix();
  LocalResult const res = levenberg_marquardt(pb, q0, start.units);
  LossSurfaceFit fit = finish(pb, res.q, start.units);
  fit.trace.push_back({0, natural(q0), natural(res.q), res.objective, res.iterations, res.converged});
  return fit;
}

double fit_objective(std::span<SurfacePoint const> points, LossSurfaced const &s, FitOptions const &options)
{
  Problem const pb = make_problem(points, options);
  Eigen::VectorXd r;
  if (!residuals(pb, s, r)) { return std::numeric_limits<double>::infinity(); }
  return objective_of(pb, r);
}

double mse(std::span<double const> observed, std::span<double const> fitted)
{
  if (observed.size() != fitted.size()) { throw DomainError("mse: length mismatch"); }
  if (observed.empty()) { throw DomainError("mse: empty input"); }
  double total = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double const d = observed[i] - fitted[i];
    total += d * d;
  }
  return total / double(observed.size());
}

double mse_reduction(double before, double after)
{
  if (!(before > 0.0)) { throw DomainError("mse_reduction: baseline must be positive"); }
  return (before - after) / before;
}

std::vector<SurfacePoint> surface_points(std::span<Observation const> obs)
{
  std::vector<SurfacePoint> out;
  out.reserve(obs.size());
  for (auto const &o : obs) { out.push_back({o.T, o.N, o.loss}); }
  return out;
}

} // namespace ditscale
