#pragma once

#include "ditscale/compute_model.hpp"
#include "ditscale/loss_surface.hpp"
#include "ditscale/powerlaw.hpp"

#include <span>
#include <vector>

namespace ditscale {

// Allocation laws are in raw units: N in parameters, C in FLOPs.

struct ProfilePoint
{
  double N = 0.0;
  double loss = 0.0;
};

struct IsoFlopProfile
{
  double budget_C = 0.0;
  std::vector<ProfilePoint> points;
  ParabolaFit fit;
  double N_opt_empirical = 0.0;
};

// Parabola in log10 N through the profile; throws NoInteriorMinimum naming the budget.
IsoFlopProfile make_isoflop_profile(double budget_C, std::vector<ProfilePoint> points);

// Groups raw observations by budget (|C - budget| <= rel_tol * budget) and keeps the
// lowest loss per model size before fitting each profile.
std::vector<IsoFlopProfile> isoflop_profiles(std::span<Observation const> obs, std::span<double const> budgets,
                                             double rel_tol = 0.01);

Fitted<PowerLaw1d> empirical_nopt(std::span<IsoFlopProfile const> profiles);

enum class ConstraintForm
{
  exponentiated, // (T_c C_token / C)^alpha_T, the substitution T = C / C_token
  verbatim       // T_c C_token / C, the printed form without the exponent
};

struct ConstrainedPoint
{
  int n_layer = 0;
  double N = 0.0;
  double T = 0.0;
  double loss = 0.0;
};

ConstrainedPoint loss_along_constraint(LossSurfaced const &surface, double C, ComputeConfig const &cfg, int n_layer,
                                       int width_ratio = kDefaultWidthRatio,
                                       ConstraintForm form = ConstraintForm::exponentiated);

struct PredictedProfile
{
  double budget_C = 0.0;
  std::vector<ConstrainedPoint> scan;   // n_layer 1..max_layers
  std::vector<ConstrainedPoint> window; // points entering the quadratic fit
  ParabolaFit fit;
  double N_opt = 0.0;
};

struct AllocationOptions
{
  int width_ratio = kDefaultWidthRatio;
  int max_layers = kMaxLayerSearch;
  ConstraintForm form = ConstraintForm::exponentiated;
};

PredictedProfile predicted_profile(LossSurfaced const &surface, double C, ComputeConfig const &cfg,
                                   AllocationOptions const &options = {});

struct PredictedAllocation
{
  Fitted<PowerLaw1d> law;
  std::vector<PredictedProfile> profiles;
};

PredictedAllocation predicted_nopt(LossSurfaced const &surface, std::span<double const> budgets,
                                   ComputeConfig const &cfg, AllocationOptions const &options = {});

// Training tokens that exhaust budget C on a fixed shape.
double topt(double C, ComputeConfig const &cfg, ModelShape const &shape);

// T_opt(C) = C / ((3/4) N_opt(C) (7 + n_ctx/d)) with the shape factor (7 + n_ctx/d) held fixed.
PowerLaw1d topt_law(PowerLaw1d const &nopt, double shape_factor);

struct SlopeDeviation
{
  double abs_err = 0.0;
  double rel_err = 0.0;
};

SlopeDeviation slope_deviation(PowerLaw1d const &empirical, PowerLaw1d const &predicted);

struct AllocationLaw
{
  PowerLaw1d empirical;
  PowerLaw1d predicted;
  double slope_abs_err = 0.0;
  double slope_rel_err = 0.0;
};

AllocationLaw compare_allocation(PowerLaw1d const &empirical, PowerLaw1d const &predicted);

// Fraction of parameters saved by `smaller` relative to `larger` at budget C.
double parameter_saving(PowerLaw1d const &smaller, PowerLaw1d const &larger, double C);

} // namespace ditscale
