#pragma once

#include "ditscale/errors.hpp"
#include "ditscale/loss_surface.hpp"
#include "ditscale/powerlaw.hpp"
#include "ditscale/run_store.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace ditscale {

// L(theta) = 1/2 theta^T H theta + L_star, minimizer at the origin.
// Per-sample gradients are H theta + xi with xi ~ Normal(0, Sigma).
template <typename Scalar> struct QuadraticObjective
{
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix H;
  Vector theta0;
  Matrix Sigma;
  Scalar L_star{0};

  Eigen::Index dim() const { return H.rows(); }
  Scalar loss(Vector const &theta) const { return Scalar(0.5) * theta.dot(H * theta) + L_star; }
  Vector gradient(Vector const &theta) const { return H * theta; }
};

using QuadraticObjectived = QuadraticObjective<double>;

namespace detail {
template <typename Scalar> void check_dims(QuadraticObjective<Scalar> const &obj, Eigen::Index n)
{
  if (obj.H.rows() != obj.H.cols() || obj.Sigma.rows() != obj.H.rows() || obj.Sigma.cols() != obj.H.rows() ||
      n != obj.H.rows()) {
    throw DomainError("quadratic objective: dimension mismatch");
  }
}

// G^T H G + tr(H Sigma) / B
template <typename Scalar>
Scalar curvature_term(QuadraticObjective<Scalar> const &obj, typename QuadraticObjective<Scalar>::Vector const &G,
                      std::int64_t B)
{
  if (B < 1) { throw DomainError("batch size must be >= 1"); }
  return G.dot(obj.H * G) + (obj.H * obj.Sigma).trace() / Scalar(B);
}
} // namespace detail

// Expected one-step change: -eta |G|^2 + 1/2 eta^2 (G^T H G + tr(H Sigma)/B).
template <typename Scalar>
Scalar stepwise_loss_delta(QuadraticObjective<Scalar> const &obj,
                           typename QuadraticObjective<Scalar>::Vector const &theta, Scalar eta, std::int64_t B)
{
  detail::check_dims(obj, theta.size());
  auto const G = obj.gradient(theta);
  return -eta * G.squaredNorm() + Scalar(0.5) * eta * eta * detail::curvature_term(obj, G, B);
}

template <typename Scalar> struct EtaOpt
{
  Scalar eta_opt{0};
  Scalar bound{0}; // steps reduce the expected loss iff 0 < eta < bound
};

template <typename Scalar>
EtaOpt<Scalar> eta_opt_closed_form(QuadraticObjective<Scalar> const &obj,
                                   typename QuadraticObjective<Scalar>::Vector const &theta, std::int64_t B)
{
  detail::check_dims(obj, theta.size());
  auto const G = obj.gradient(theta);
  Scalar const den = detail::curvature_term(obj, G, B);
  if (!(den > Scalar(0))) { throw DomainError("unbounded step: zero curvature and no gradient noise"); }
  Scalar const eta = G.squaredNorm() / den;
  return {eta, Scalar(2) * eta};
}

// -|G|^4 / (2 (G^T H G + tr(H Sigma)/B))
template <typename Scalar>
Scalar max_gain(QuadraticObjective<Scalar> const &obj, typename QuadraticObjective<Scalar>::Vector const &theta,
                std::int64_t B)
{
  detail::check_dims(obj, theta.size());
  auto const G = obj.gradient(theta);
  Scalar const den = detail::curvature_term(obj, G, B);
  if (!(den > Scalar(0))) { throw DomainError("unbounded step: zero curvature and no gradient noise"); }
  Scalar const g2 = G.squaredNorm();
  return -g2 * g2 / (Scalar(2) * den);
}

enum class NoiseKind
{
  none,      // Sigma = 0
  hessian,   // Sigma = scale * H
  isotropic  // Sigma = scale * I
};

// H = Q diag(eigenvalues) Q^T with a Haar-random rotation Q drawn from seed.
// theta0 = Q * 1, so every eigendirection starts with unit displacement.
QuadraticObjectived make_objective(std::vector<double> const &eigenvalues, std::uint64_t seed,
                                   NoiseKind noise = NoiseKind::hessian, double noise_scale = 1.0,
                                   double L_star = 0.0, bool rotate = true);

// mt19937_64 seeded from SplitMix64(seed, stream).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

// Mini-batch gradient: H theta plus the mean of B per-sample Normal(0, Sigma) draws.
class GradientSampler
{
public:
  explicit GradientSampler(QuadraticObjectived const &obj);
  Eigen::VectorXd operator()(Eigen::VectorXd const &theta, std::int64_t B, std::mt19937_64 &rng) const;
  bool noisy() const { return noisy_; }

private:
  QuadraticObjectived const &obj_;
  Eigen::MatrixXd factor_;
  bool noisy_ = false;
};

struct SgdConfig
{
  double eta = 0.0;
  std::int64_t B = 1;
  std::int64_t steps = 1;
  std::uint64_t seed = 0;
};

struct SgdStep
{
  std::int64_t step = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
};

struct SgdResult
{
  std::vector<SgdStep> trajectory; // steps + 1 entries, starting at theta0
  bool step_size_warning = false;  // eta above 1 / lambda_max(H)
};

SgdResult run_sgd(QuadraticObjectived const &obj, SgdConfig const &cfg, std::uint64_t stream = 0);

struct SweepResult
{
  std::int64_t token_budget = 0;
  std::vector<std::int64_t> B_grid;
  std::vector<double> eta_grid;
  int replicates = 1;
  Eigen::MatrixXd mean_loss; // rows follow B_grid, columns eta_grid
  Eigen::MatrixXd stderr_loss;
};

// Each (B, eta, replicate) run owns stream cell * replicates + r; steps = floor(budget / B).
SweepResult sweep_hyperparams(QuadraticObjectived const &obj, std::int64_t token_budget,
                              std::vector<std::int64_t> const &B_grid, std::vector<double> const &eta_grid,
                              std::uint64_t seed, int replicates = 1);

// Strictly decreasing to an interior argmin, then strictly increasing.
bool is_unimodal_interior(std::vector<double> const &values);

// One single-point run per finite cell; the hidden model shape is a placeholder (n_layer 1, n_ctx 1).
std::vector<TrainingRun> sweep_to_runs(SweepResult const &sweep);

// Whole trajectory of a single run in run-store form.
TrainingRun trajectory_to_run(SgdResult const &result, SgdConfig const &cfg, std::string run_id);

struct SynthGrid
{
  std::vector<int> layers;      // model sizes via params_from_layers
  std::vector<double> tokens;   // T values, raw tokens
  int width_ratio = kDefaultWidthRatio;
  ComputeConfig cfg{};
};

struct SynthOptions
{
  double penalty = 0.005;           // per-axis weight on (ln ratio)^2
  double lattice_step = 0.125;      // log2 spacing of the B and eta lattices
  double lattice_span = 1.0;        // log2 margin beyond the extreme optima
};

// Generating function for synthetic runs: surface loss times the hyperparameter penalty.
double synth_loss(LossSurfaced const &surface, double T, double N, double B, double eta, double B_opt,
                  double eta_opt, double penalty);

// law_B is in samples (or tokens per law_B.units.batch_unit). Losses get multiplicative
// log-normal noise with log-sd noise_sigma. Deterministic given seed.
std::vector<TrainingRun> synth_runs(PowerLaw2d const &law_B, PowerLaw2d const &law_eta, LossSurfaced const &surface,
                                    SynthGrid const &grid, double noise_sigma, std::uint64_t seed,
                                    SynthOptions const &options = {});

} // namespace ditscale
