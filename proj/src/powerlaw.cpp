#include "ditscale/powerlaw.hpp"

#include "ditscale/errors.hpp"
#include "ditscale/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <set>
#include <string>

namespace ditscale {

namespace {

struct OlsResult
{
  Eigen::VectorXd coef;
  FitDiagnostics diag;
};

bool is_constant(Eigen::VectorXd const &v)
{
  double const lo = v.minCoeff();
  double const hi = v.maxCoeff();
  return hi - lo <= 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
}

// Predictor columns are X.col(1..). Names are used in singularity messages.
void check_rank(Eigen::MatrixXd const &X, std::vector<std::string> const &names)
{
  Eigen::Index const p = X.cols() - 1;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (is_constant(X.col(j + 1))) {
      throw SingularityError("design is rank deficient: predictor '" + names[std::size_t(j)] +
                             "' takes a single value");
    }
  }
  if (p < 2) { return; }
  Eigen::MatrixXd Z = X.rightCols(p).rowwise() - X.rightCols(p).colwise().mean();
  Z.array().rowwise() /= Z.colwise().norm().array();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Z.transpose() * Z);
  if (es.eigenvalues().minCoeff() < 1e-12) {
    std::string joined;
    for (auto const &n : names) { joined += (joined.empty() ? "'" : " and '") + n + "'"; }
    throw SingularityError("design is rank deficient: predictors " + joined + " are collinear");
  }
}

// Normal equations on column-scaled design.
OlsResult ols(Eigen::MatrixXd const &X, Eigen::VectorXd const &y)
{
  Eigen::VectorXd const scale = X.colwise().norm().transpose();
  Eigen::MatrixXd const Xs = X * scale.cwiseInverse().asDiagonal();
  Eigen::MatrixXd const gram = Xs.transpose() * Xs;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw SingularityError("normal equations are singular");
  }
  Eigen::VectorXd const z = ldlt.solve(Xs.transpose() * y);

  OlsResult out;
  out.coef = z.cwiseQuotient(scale);
  out.diag.residuals = y - X * out.coef;
  out.diag.n_points = std::size_t(X.rows());

  double const ss_res = out.diag.residuals.squaredNorm();
  double const ss_tot = (y.array() - y.mean()).matrix().squaredNorm();
  out.diag.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);

  Eigen::Index const dof = X.rows() - X.cols();
  out.diag.stderr_.setConstant(X.cols(), std::numeric_limits<double>::quiet_NaN());
  if (dof > 0) {
    out.diag.sigma2 = ss_res / double(dof);
    Eigen::MatrixXd const inv = ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    out.diag.stderr_ = (out.diag.sigma2 * inv.diagonal()).cwiseSqrt().cwiseQuotient(scale);
  }
  return out;
}

void require_positive(double v, char const *what)
{
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError(std::string("power-law fit needs positive finite ") + what + " (got " +
                      format_real(v) + ")");
  }
}

} // namespace

Fitted<PowerLaw2d> fit_powerlaw2(std::span<PowerLawPoint2 const> points, UnitConvention units)
{
  if (points.size() < 3) { throw SingularityError("fit_powerlaw2 needs at least 3 points"); }
  Eigen::Index const n = Eigen::Index(points.size());
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto const &p = points[std::size_t(i)];
    require_positive(p.T, "T");
    require_positive(p.N, "N");
    require_positive(p.y, "y");
    X(i, 0) = 1.0;
    X(i, 1) = std::log(p.T);
    X(i, 2) = std::log(p.N);
    y(i) = std::log(p.y);
  }
  check_rank(X, {"T", "N"});
  auto const res = ols(X, y);
  return {PowerLaw2d{std::exp(res.coef(0)), res.coef(1), res.coef(2), units}, res.diag};
}

Fitted<PowerLaw1d> fit_powerlaw1(std::span<Point2 const> points)
{
  std::set<double> distinct;
  for (auto const &p : points) {
    require_positive(p.x, "x");
    require_positive(p.y, "y");
    distinct.insert(p.x);
  }
  if (distinct.size() < 2) { throw SingularityError("fit_powerlaw1 needs at least 2 distinct x values"); }
  Eigen::Index const n = Eigen::Index(points.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::log(points[std::size_t(i)].x);
    y(i) = std::log(points[std::size_t(i)].y);
  }
  auto const res = ols(X, y);
  return {PowerLaw1d{std::exp(res.coef(0)), res.coef(1)}, res.diag};
}

ParabolaFit fit_parabola_min(std::span<Point2 const> points)
{
  std::set<double> distinct;
  for (auto const &p : points) { distinct.insert(p.x); }
  if (distinct.size() < 3) { throw SingularityError("fit_parabola_min needs at least 3 distinct abscissae"); }

  Eigen::Index const n = Eigen::Index(points.size());
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = points[std::size_t(i)].x;
    y(i) = points[std::size_t(i)].y;
  }
  // Fit in centred/scaled coordinates u = (x - mid) / half so the design stays well conditioned.
  double const mid = 0.5 * (x.maxCoeff() + x.minCoeff());
  double const half = 0.5 * (x.maxCoeff() - x.minCoeff());
  Eigen::VectorXd const u = (x.array() - mid) / half;
  Eigen::MatrixXd X(n, 3);
  X.col(0) = u.array().square();
  X.col(1) = u;
  X.col(2).setOnes();
  Eigen::VectorXd const k = X.colPivHouseholderQr().solve(y);
  double const A = k(0), B = k(1), C = k(2);

  double const tol = 1e-10 * (std::abs(B) + std::abs(C) + std::numeric_limits<double>::min());
  if (!(A > tol)) {
    throw NoInteriorMinimum("fitted parabola does not open upward (quadratic coefficient " +
                            format_real(A / (half * half)) + ")");
  }
  ParabolaFit fit;
  fit.a = A / (half * half);
  fit.b = B / half - 2.0 * A * mid / (half * half);
  fit.c = A * mid * mid / (half * half) - B * mid / half + C;
  fit.x_min = mid + half * (-B / (2.0 * A));
  fit.y_min = C - B * B / (4.0 * A);
  fit.n_points = std::size_t(n);
  return fit;
}

std::vector<PowerLawPoint2> batch_points(std::span<Observation const> obs)
{
  std::vector<PowerLawPoint2> out;
  out.reserve(obs.size());
  for (auto const &o : obs) { out.push_back({o.T, o.N, o.B}); }
  return out;
}

std::vector<PowerLawPoint2> lr_points(std::span<Observation const> obs)
{
  std::vector<PowerLawPoint2> out;
  out.reserve(obs.size());
  for (auto const &o : obs) { out.push_back({o.T, o.N, o.eta}); }
  return out;
}

} // namespace ditscale
