#include "ditscale/sgd_oracle.hpp"

#include "ditscale/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ditscale {

namespace {

std::uint64_t splitmix64(std::uint64_t &x)
{
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd noise_factor(Eigen::MatrixXd const &Sigma)
{
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma);
  Eigen::VectorXd const root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

double lambda_max(Eigen::MatrixXd const &H)
{
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

} // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t state = seed;
  std::uint64_t const a = splitmix64(state);
  state ^= stream * 0xd1b54a32d192ed03ULL;
  std::uint64_t const b = splitmix64(state);
  std::seed_seq seq{std::uint32_t(a), std::uint32_t(a >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
  return std::mt19937_64(seq);
}

QuadraticObjectived make_objective(std::vector<double> const &eigenvalues, std::uint64_t seed, NoiseKind noise,
                                   double noise_scale, double L_star, bool rotate)
{
  if (eigenvalues.empty()) { throw DomainError("make_objective: empty spectrum"); }
  for (double l : eigenvalues) {
    if (!(l >= 0.0) || !std::isfinite(l)) { throw DomainError("make_objective: eigenvalues must be >= 0"); }
  }
  if (!(noise_scale >= 0.0)) { throw DomainError("make_objective: noise scale must be >= 0"); }
  Eigen::Index const n = Eigen::Index(eigenvalues.size());
  Eigen::VectorXd const lam = Eigen::Map<Eigen::VectorXd const>(eigenvalues.data(), n);

  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(n, n);
  if (rotate) {
    auto rng = make_stream(seed, 0);
    std::normal_distribution<double> z;
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) { A(i, j) = z(rng); }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Q = qr.householderQ();
    // sign fix so Q is Haar distributed
    Eigen::MatrixXd const R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (R(j, j) < 0.0) { Q.col(j) *= -1.0; }
    }
  }

  QuadraticObjectived obj;
  obj.H = Q * lam.asDiagonal() * Q.transpose();
  obj.H = 0.5 * (obj.H + obj.H.transpose()).eval();
  obj.theta0 = Q * Eigen::VectorXd::Ones(n);
  switch (noise) {
  case NoiseKind::none: obj.Sigma = Eigen::MatrixXd::Zero(n, n); break;
  case NoiseKind::hessian: obj.Sigma = noise_scale * obj.H; break;
  case NoiseKind::isotropic: obj.Sigma = noise_scale * Eigen::MatrixXd::Identity(n, n); break;
  }
  obj.L_star = L_star;
  return obj;
}

GradientSampler::GradientSampler(QuadraticObjectived const &obj)
  : obj_(obj), noisy_(obj.Sigma.size() > 0 && obj.Sigma.cwiseAbs().maxCoeff() > 0.0)
{
  if (noisy_) { factor_ = noise_factor(obj.Sigma); }
}

Eigen::VectorXd GradientSampler::operator()(Eigen::VectorXd const &theta, std::int64_t B, std::mt19937_64 &rng) const
{
  if (B < 1) { throw DomainError("batch size must be >= 1"); }
  Eigen::VectorXd g = obj_.gradient(theta);
  if (!noisy_) { return g; }
  std::normal_distribution<double> z;
  Eigen::Index const n = obj_.dim();
  Eigen::VectorXd zsum = Eigen::VectorXd::Zero(n);
  for (std::int64_t b = 0; b < B; ++b) {
    for (Eigen::Index i = 0; i < n; ++i) { zsum(i) += z(rng); }
  }
  g += factor_ * zsum / double(B);
  return g;
}

SgdResult run_sgd(QuadraticObjectived const &obj, SgdConfig const &cfg, std::uint64_t stream)
{
  if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) { throw DomainError("run_sgd: eta must be positive"); }
  if (cfg.B < 1) { throw DomainError("run_sgd: batch size must be >= 1"); }
  if (cfg.steps < 0) { throw DomainError("run_sgd: steps must be >= 0"); }
  detail::check_dims(obj, obj.theta0.size());

  SgdResult out;
  out.step_size_warning = cfg.eta > 1.0 / lambda_max(obj.H);
  out.trajectory.reserve(std::size_t(cfg.steps + 1));

  GradientSampler const sample(obj);
  auto rng = make_stream(cfg.seed, stream);
  Eigen::VectorXd theta = obj.theta0;
  double const inf = std::numeric_limits<double>::infinity();
  for (std::int64_t k = 0; k <= cfg.steps; ++k) {
    double const loss = obj.loss(theta);
    if (!std::isfinite(loss)) {
      for (; k <= cfg.steps; ++k) { out.trajectory.push_back({k, inf, inf}); }
      break;
    }
    out.trajectory.push_back({k, loss, obj.gradient(theta).squaredNorm()});
    if (k == cfg.steps) { break; }
    theta -= cfg.eta * sample(theta, cfg.B, rng);
  }
  return out;
}

SweepResult sweep_hyperparams(QuadraticObjectived const &obj, std::int64_t token_budget,
                              std::vector<std::int64_t> const &B_grid, std::vector<double> const &eta_grid,
                              std::uint64_t seed, int replicates)
{
  if (B_grid.empty() || eta_grid.empty()) { throw ValidationError("sweep_hyperparams: empty B or eta grid"); }
  if (replicates < 1) { throw ValidationError("sweep_hyperparams: replicates must be >= 1"); }
  if (token_budget < 1) { throw ValidationError("sweep_hyperparams: token budget must be >= 1"); }

  SweepResult res;
  res.token_budget = token_budget;
  res.B_grid = B_grid;
  res.eta_grid = eta_grid;
  res.replicates = replicates;
  Eigen::Index const nb = Eigen::Index(B_grid.size());
  Eigen::Index const ne = Eigen::Index(eta_grid.size());
  res.mean_loss.resize(nb, ne);
  res.stderr_loss.resize(nb, ne);

  for (Eigen::Index i = 0; i < nb; ++i) {
    for (Eigen::Index j = 0; j < ne; ++j) {
      SgdConfig cfg{eta_grid[std::size_t(j)], B_grid[std::size_t(i)], token_budget / B_grid[std::size_t(i)], seed};
      std::uint64_t const cell = std::uint64_t(i * ne + j);
      double sum = 0.0, sum2 = 0.0;
      for (int r = 0; r < replicates; ++r) {
        double const f = run_sgd(obj, cfg, cell * std::uint64_t(replicates) + std::uint64_t(r)).trajectory.back().loss;
        sum += f;
        sum2 += f * f;
      }
      double const mean = sum / replicates;
      res.mean_loss(i, j) = mean;
      res.stderr_loss(i, j) = replicates > 1
          ? std::sqrt(std::max(0.0, (sum2 - replicates * mean * mean) / (replicates - 1)) / replicates)
          : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return res;
}

bool is_unimodal_interior(std::vector<double> const &v)
{
  if (v.size() < 3) { return false; }
  auto const it = std::min_element(v.begin(), v.end());
  std::size_t const m = std::size_t(it - v.begin());
  if (m == 0 || m + 1 == v.size()) { return false; }
  auto const both_inf = [](double a, double b) { return std::isinf(a) && std::isinf(b); };
  for (std::size_t j = 0; j < m; ++j) {
    if (!(v[j] > v[j + 1]) && !both_inf(v[j], v[j + 1])) { return false; }
  }
  for (std::size_t j = m; j + 1 < v.size(); ++j) {
    if (!(v[j] < v[j + 1]) && !both_inf(v[j], v[j + 1])) { return false; }
  }
  return true;
}

std::vector<TrainingRun> sweep_to_runs(SweepResult const &sweep)
{
  std::vector<TrainingRun> runs;
  for (std::size_t i = 0; i < sweep.B_grid.size(); ++i) {
    std::int64_t const B = sweep.B_grid[i];
    std::int64_t const steps = sweep.token_budget / B;
    for (std::size_t j = 0; j < sweep.eta_grid.size(); ++j) {
      double const loss = sweep.mean_loss(Eigen::Index(i), Eigen::Index(j));
      if (steps < 1 || !(loss > 0.0) || !std::isfinite(loss)) { continue; }
      TrainingRun run;
      run.run_id = "sweep_B" + std::to_string(B) + "_eta" + std::to_string(j);
      run.shape = ModelShape::from_layers(1);
      run.batch_size_samples = B;
      run.learning_rate = sweep.eta_grid[j];
      run.cfg = ComputeConfig{1, 0};
      run.loss_series.push_back({double(steps * B), loss});
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

TrainingRun trajectory_to_run(SgdResult const &result, SgdConfig const &cfg, std::string run_id)
{
  TrainingRun run;
  run.run_id = std::move(run_id);
  run.shape = ModelShape::from_layers(1);
  run.batch_size_samples = cfg.B;
  run.learning_rate = cfg.eta;
  run.cfg = ComputeConfig{1, 0};
  for (auto const &s : result.trajectory) {
    if (s.step == 0) { continue; }
    if (!(s.loss > 0.0) || !std::isfinite(s.loss)) {
      throw ValidationError("trajectory_to_run: loss at step " + std::to_string(s.step) +
                            " is not a positive finite value (" + format_real(s.loss) + ")");
    }
    run.loss_series.push_back({double(s.step * cfg.B), s.loss});
  }
  return run;
}

double synth_loss(LossSurfaced const &surface, double T, double N, double B, double eta, double B_opt,
                  double eta_opt, double penalty)
{
  double const lb = std::log(B / B_opt);
  double const le = std::log(eta / eta_opt);
  return eval_loss(surface, T, N) * (1.0 + penalty * (lb * lb + le * le));
}

std::vector<TrainingRun> synth_runs(PowerLaw2d const &law_B, PowerLaw2d const &law_eta, LossSurfaced const &surface,
                                    SynthGrid const &grid, double noise_sigma, std::uint64_t seed,
                                    SynthOptions const &options)
{
  if (grid.layers.empty() || grid.tokens.empty()) { throw ValidationError("synth_runs: empty grid"); }
  if (!(noise_sigma >= 0.0)) { throw DomainError("synth_runs: noise sigma must be >= 0"); }
  if (!(options.lattice_step > 0.0)) { throw DomainError("synth_runs: lattice step must be positive"); }
  std::vector<double> tokens = grid.tokens;
  std::sort(tokens.begin(), tokens.end());
  double const tps = double(grid.cfg.tokens_per_sample());

  std::vector<TrainingRun> runs;
  std::uint64_t stream = 0;
  for (int layers : grid.layers) {
    auto const shape = ModelShape::from_layers(layers, grid.width_ratio);
    double const N = double(shape.params());
    std::vector<double> b_opt, e_opt;
    for (double T : tokens) {
      double b = law_B(T / law_B.units.token_unit, N / law_B.units.param_unit);
      if (law_B.units.batch_unit == BatchUnit::tokens) { b /= tps; }
      b_opt.push_back(b);
      e_opt.push_back(law_eta(T / law_eta.units.token_unit, N / law_eta.units.param_unit));
    }
    auto const lattice = [&](std::vector<double> const &opt) {
      auto const [lo, hi] = std::minmax_element(opt.begin(), opt.end());
      double const k0 = std::floor((std::log2(*lo) - options.lattice_span) / options.lattice_step);
      double const k1 = std::ceil((std::log2(*hi) + options.lattice_span) / options.lattice_step);
      std::vector<double> out;
      for (double k = k0; k <= k1; k += 1.0) { out.push_back(std::exp2(k * options.lattice_step)); }
      return out;
    };
    std::set<std::int64_t> batches;
    for (double b : lattice(b_opt)) { batches.insert(std::max<std::int64_t>(1, std::llround(b))); }
    auto const etas = lattice(e_opt);

    for (std::int64_t B : batches) {
      for (std::size_t j = 0; j < etas.size(); ++j) {
        TrainingRun run;
        run.run_id = "L" + std::to_string(layers) + "_B" + std::to_string(B) + "_lr" + std::to_string(j);
        run.shape = shape;
        run.batch_size_samples = B;
        run.learning_rate = etas[j];
        run.cfg = grid.cfg;
        auto rng = make_stream(seed, stream++);
        std::normal_distribution<double> z;
        for (std::size_t t = 0; t < tokens.size(); ++t) {
          double const clean = synth_loss(surface, tokens[t] / surface.units.token_unit, N / surface.units.param_unit,
                                          double(B), etas[j], b_opt[t], e_opt[t], options.penalty);
          double const noise = noise_sigma > 0.0 ? std::exp(noise_sigma * z(rng)) : 1.0;
          run.loss_series.push_back({tokens[t], clean * noise});
        }
        runs.push_back(std::move(run));
      }
    }
  }
  return runs;
}

} // namespace ditscale
