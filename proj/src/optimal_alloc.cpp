#include "ditscale/optimal_alloc.hpp"

#include "ditscale/errors.hpp"
#include "ditscale/format.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ditscale {

IsoFlopProfile make_isoflop_profile(double budget_C, std::vector<ProfilePoint> points)
{
  std::vector<Point2> xy;
  xy.reserve(points.size());
  for (auto const &p : points) { xy.push_back({std::log10(p.N), p.loss}); }
  IsoFlopProfile profile{budget_C, std::move(points), {}, 0.0};
  try {
    profile.fit = fit_parabola_min(xy);
  } catch (NoInteriorMinimum const &e) {
    throw NoInteriorMinimum("budget C=" + format_real(budget_C) + ": " + e.what());
  } catch (SingularityError const &e) {
    throw SingularityError("budget C=" + format_real(budget_C) + ": " + e.what());
  }
  profile.N_opt_empirical = std::pow(10.0, profile.fit.x_min);
  return profile;
}

std::vector<IsoFlopProfile> isoflop_profiles(std::span<Observation const> obs, std::span<double const> budgets,
                                             double rel_tol)
{
  std::vector<IsoFlopProfile> out;
  for (double budget : budgets) {
    std::map<double, double> best; // N -> lowest loss
    for (auto const &o : obs) {
      if (std::abs(o.C - budget) > rel_tol * budget) { continue; }
      auto const [it, inserted] = best.try_emplace(o.N, o.loss);
      if (!inserted) { it->second = std::min(it->second, o.loss); }
    }
    std::vector<ProfilePoint> pts;
    for (auto const &[n, loss] : best) { pts.push_back({n, loss}); }
    out.push_back(make_isoflop_profile(budget, std::move(pts)));
  }
  return out;
}

Fitted<PowerLaw1d> empirical_nopt(std::span<IsoFlopProfile const> profiles)
{
  if (profiles.size() < 2) { throw SingularityError("empirical_nopt needs at least 2 profiles"); }
  std::vector<Point2> pts;
  for (auto const &p : profiles) { pts.push_back({p.budget_C, p.N_opt_empirical}); }
  return fit_powerlaw1(pts);
}

ConstrainedPoint loss_along_constraint(LossSurfaced const &surface, double C, ComputeConfig const &cfg, int n_layer,
                                       int width_ratio, ConstraintForm form)
{
  if (!(C > 0.0)) { throw DomainError("loss_along_constraint: budget must be positive"); }
  if (!(surface.units.token_unit > 0.0) || !(surface.units.param_unit > 0.0)) {
    throw DomainError("loss_along_constraint: surface has an invalid unit convention");
  }
  auto const shape = ModelShape::from_layers(n_layer, width_ratio);
  double const c_token = compute_per_token(shape, cfg);
  ConstrainedPoint pt{n_layer, double(shape.params()), C / c_token, 0.0};
  double const t_units = pt.T / surface.units.token_unit;
  double const n_units = pt.N / surface.units.param_unit;
  if (form == ConstraintForm::exponentiated) {
    pt.loss = eval_loss(surface, t_units, n_units);
  } else {
    pt.loss = surface.T_c / t_units + surface.model_term(n_units) + surface.L_inf;
  }
  return pt;
}

PredictedProfile predicted_profile(LossSurfaced const &surface, double C, ComputeConfig const &cfg,
                                   AllocationOptions const &options)
{
  PredictedProfile prof;
  prof.budget_C = C;
  for (int n = 1; n <= options.max_layers; ++n) {
    prof.scan.push_back(loss_along_constraint(surface, C, cfg, n, options.width_ratio, options.form));
  }
  auto const best = std::min_element(prof.scan.begin(), prof.scan.end(),
                                     [](auto const &a, auto const &b) { return a.loss < b.loss; });
  std::size_t const i = std::size_t(best - prof.scan.begin());
  if (i == 0 || i + 1 == prof.scan.size()) {
    throw NoInteriorMinimum("budget C=" + format_real(C) + ": loss minimum sits at the scan boundary (n_layer " +
                            std::to_string(best->n_layer) + ")");
  }
  double const lo = best->loss;
  double const spread = std::max(prof.scan[i - 1].loss, prof.scan[i + 1].loss) - lo;
  std::vector<Point2> xy;
  for (auto const &p : prof.scan) {
    if (p.loss - lo <= 2.0 * spread) {
      prof.window.push_back(p);
      xy.push_back({std::log10(p.N), p.loss});
    }
  }
  try {
    prof.fit = fit_parabola_min(xy);
  } catch (Error const &e) {
    throw NoInteriorMinimum("budget C=" + format_real(C) + ": " + e.what());
  }
  prof.N_opt = std::pow(10.0, prof.fit.x_min);
  return prof;
}

PredictedAllocation predicted_nopt(LossSurfaced const &surface, std::span<double const> budgets,
                                   ComputeConfig const &cfg, AllocationOptions const &options)
{
  if (budgets.size() < 2) { throw SingularityError("predicted_nopt needs at least 2 budgets"); }
  PredictedAllocation out;
  std::vector<Point2> pts;
  for (double C : budgets) {
    out.profiles.push_back(predicted_profile(surface, C, cfg, options));
    pts.push_back({C, out.profiles.back().N_opt});
  }
  out.law = fit_powerlaw1(pts);
  return out;
}

double topt(double C, ComputeConfig const &cfg, ModelShape const &shape)
{
  if (!(C > 0.0)) { throw DomainError("topt: budget must be positive"); }
  return C / compute_per_token(shape, cfg);
}

PowerLaw1d topt_law(PowerLaw1d const &nopt, double shape_factor)
{
  if (!(shape_factor > 0.0) || !(nopt.coef > 0.0)) { throw DomainError("topt_law: invalid inputs"); }
  return {1.0 / (0.75 * shape_factor * nopt.coef), 1.0 - nopt.exponent};
}

SlopeDeviation slope_deviation(PowerLaw1d const &empirical, PowerLaw1d const &predicted)
{
  if (empirical.exponent == 0.0) { throw DomainError("slope_deviation: empirical exponent is zero"); }
  double const abs_err = std::abs(empirical.exponent - predicted.exponent);
  return {abs_err, abs_err / std::abs(empirical.exponent)};
}

AllocationLaw compare_allocation(PowerLaw1d const &empirical, PowerLaw1d const &predicted)
{
  auto const dev = slope_deviation(empirical, predicted);
  return {empirical, predicted, dev.abs_err, dev.rel_err};
}

double parameter_saving(PowerLaw1d const &smaller, PowerLaw1d const &larger, double C)
{
  return 1.0 - smaller(C) / larger(C);
}

} // namespace ditscale
