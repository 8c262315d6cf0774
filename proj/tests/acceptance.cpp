// Prints one PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include "ditscale/compute_model.hpp"
#include "ditscale/loss_surface.hpp"
#include "ditscale/optimal_alloc.hpp"
#include "ditscale/powerlaw.hpp"
#include "ditscale/presets.hpp"
#include "ditscale/run_store.hpp"
#include "ditscale/sgd_oracle.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace ditscale;
namespace fs = std::filesystem;

namespace {

struct Check
{
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, std::string const &what)
  {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, char const *title, std::function<void(Check &)> const &body)
{
  Check c;
  auto const t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (std::exception const &e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  double const secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!c.ok) { ++failures; }
  std::printf("%s criterion %d: %s (%.2fs)%s\n", c.ok ? "PASS" : "FAIL", id, title, secs, c.detail.str().c_str());
  std::fflush(stdout);
}

std::vector<double> log_spectrum(int n, double lo, double hi)
{
  std::vector<double> ev;
  for (int i = 0; i < n; ++i) { ev.push_back(lo * std::pow(hi / lo, double(i) / double(n - 1))); }
  return ev;
}

std::string slurp(fs::path const &p)
{
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int shell(std::string const &cmd)
{
  int const status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// --- 1
void compute_accounting(Check &c)
{
  c.expect(params_from_layers(14, 128) == 719323136, "N(14)");
  c.expect(params_from_layers(16, 128) == 1073741824, "N(16)");
  for (std::int64_t n_ctx : {std::int64_t(1), std::int64_t(256), std::int64_t(1280)}) {
    ComputeConfig const cfg{n_ctx, 0};
    for (int L = 1; L <= 64; ++L) {
      auto const shape = ModelShape::from_layers(L);
      double fwd = 0.0;
      for (auto const &row : itemized_flops(shape, cfg)) { fwd += row.forward_flops_per_token; }
      // both sides are whole numbers of FLOPs
      if (std::llround(3.0 * fwd) != std::llround(compute_per_token(shape, cfg))) {
        c.expect(false, "itemized sum at L=" + std::to_string(L) + " n_ctx=" + std::to_string(n_ctx));
      }
    }
  }
  c.detail << " N(14)=" << params_from_layers(14) << " N(16)=" << params_from_layers(16);
}

// --- 2
void published_laws(Check &c)
{
  double const n = presets::nopt_empirical()(presets::kPlanBudget);
  c.expect(std::abs(n - 0.64e9) <= 0.01e9, "N_opt(5.85e20)");
  auto const a = slope_deviation(presets::nopt_empirical(), presets::nopt_predicted());
  auto const b = slope_deviation(presets::nopt_fixed_empirical(), presets::nopt_fixed_predicted());
  auto const sig4 = [](double x, double ref) { return std::abs(x - ref) <= 0.5e-4 * std::abs(ref) * 10.0; };
  c.expect(sig4(a.abs_err, 0.0148) && sig4(a.rel_err * 100.0, 3.570), "optimal deviation");
  c.expect(sig4(b.abs_err, 0.1581) && sig4(b.rel_err * 100.0, 30.26), "fixed deviation");
  double const red = mse_reduction(presets::kMseFixed, presets::kMseOptimal);
  c.expect(std::abs(red - 0.455) <= 0.001, "mse reduction");
  char buf[256];
  std::snprintf(buf, sizeof buf, " N_opt=%.5g dev=(%.4f, %.2f%%) (%.4f, %.2f%%) mse_reduction=%.2f%%", n, a.abs_err,
                100 * a.rel_err, b.abs_err, 100 * b.rel_err, 100 * red);
  c.detail << buf;
}

// --- 3
void hyperparameter_plan(Check &c)
{
  double const eta = presets::video_lr_law()(140.0, 0.7193);
  double const B = presets::video_batch_law(BatchUnit::samples)(140.0, 0.7193);
  c.expect(std::abs(eta - 1.686e-4) <= 0.001e-4, "eta evaluation");
  c.expect(std::abs(eta / presets::kReportedPlanLr - 1.0) <= 0.10, "eta within 10% of reported");
  c.expect(std::abs(B - 866.6) <= 0.5, "B evaluation");
  c.expect(std::abs(B / presets::kReportedPlanBatch - 1.0) <= 0.10, "B within 10% of reported");
  char buf[256];
  std::snprintf(buf, sizeof buf, " eta=%.4g (reported %.2g) B=%.2f (reported %.0f)", eta, presets::kReportedPlanLr, B,
                presets::kReportedPlanBatch);
  c.detail << buf;
}

// --- 4
void surface_evaluation(Check &c)
{
  double const v = eval_loss(presets::video_surface(), 10.0, 1.07);
  c.expect(std::abs(v - 0.8929) <= 1e-4, "L(10, 1.07)");
  char buf[64];
  std::snprintf(buf, sizeof buf, " L=%.6f", v);
  c.detail << buf;
}

std::vector<SurfacePoint> surface_grid(LossSurfaced const &s, double sigma, std::uint64_t seed)
{
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> z;
  std::vector<SurfacePoint> pts;
  for (int layers : {4, 6, 8, 10}) {
    double const N = double(params_from_layers(layers)) / 1e9;
    for (double T : {2.0, 4.0, 6.0, 8.0, 10.0, 12.0}) {
      double const noise = sigma > 0.0 ? std::exp(sigma * z(rng)) : 1.0;
      pts.push_back({T, N, eval_loss(s, T, N) * noise});
    }
  }
  return pts;
}

// --- 5
void surface_recovery(Check &c)
{
  auto const truth = presets::video_surface();
  auto const p0 = surface_params(truth);
  auto const clean = fit_loss_surface(surface_grid(truth, 0.0, 0), {}, UnitConvention::billions());
  auto const p1 = surface_params(clean.surface);
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) { worst = std::max(worst, std::abs(p1(k) / p0(k) - 1.0)); }
  c.expect(worst <= 1e-4, "noiseless recovery");

  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto const fit = fit_loss_surface(surface_grid(truth, 0.002, seed), {}, UnitConvention::billions());
    auto const p = surface_params(fit.surface);
    int n_id = 0;
    bool ok = true;
    for (int k = 0; k < 5; ++k) {
      if (!fit.identifiable[std::size_t(k)]) { continue; }
      ++n_id;
      ok = ok && std::abs(p(k) / p0(k) - 1.0) <= 0.05;
    }
    good += ok && n_id > 0;
  }
  c.expect(good >= 18, "noisy recovery seeds");
  c.detail << " noiseless_max_rel_err=" << worst << " noisy_seeds_ok=" << good << "/20";
}

// --- 6
void powerlaw_recovery(Check &c)
{
  PowerLaw2d const truth{3.5, 0.8080, 0.1906};
  std::vector<PowerLawPoint2> pts;
  for (double T : {2.0, 3.0, 5.0, 8.0, 13.0}) {
    for (double N : {0.1, 0.25, 0.5, 1.0}) { pts.push_back({T, N, truth(T, N)}); }
  }
  auto const fit = fit_powerlaw2(pts);
  double const err = std::max(std::abs(fit.law.beta - truth.beta), std::abs(fit.law.gamma - truth.gamma));
  c.expect(err <= 1e-10, "noiseless exponents");

  auto const lb = presets::video_batch_law(), le = presets::video_lr_law();
  SynthGrid grid{{4, 6, 8, 10}, {2e9, 4e9, 6e9, 8e9, 10e9, 12e9}, 128, {presets::kVideoContext, 0}};
  UnitConvention const units = UnitConvention::billions();
  int good = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto const runs = synth_runs(lb, le, presets::video_surface(), grid, 5e-5, seed);
    auto sel = select_near_optimal(observations(runs), 2e-4);
    for (auto &o : sel) { o = to_units(o, units); }
    auto const fb = fit_powerlaw2(batch_points(sel), units);
    auto const fe = fit_powerlaw2(lr_points(sel), units);
    double const e = std::max({std::abs(fb.law.beta - lb.beta), std::abs(fb.law.gamma - lb.gamma),
                               std::abs(fe.law.beta - le.beta), std::abs(fe.law.gamma - le.gamma)});
    worst = std::max(worst, e);
    good += e <= 0.02;
  }
  c.expect(good >= 18, "pipeline seeds");
  c.detail << " noiseless_err=" << err << " pipeline_seeds_ok=" << good << "/20 worst_abs_err=" << worst;
}

// --- 7
double exponent_at(std::int64_t n_ctx, std::vector<double> const &budgets)
{
  return predicted_nopt(presets::video_surface(), budgets, ComputeConfig{n_ctx, 0}).law.law.exponent;
}

void allocation_bracket(Check &c)
{
  auto const s = presets::video_surface();
  double const lo = (2.0 / 3.0) * s.alpha_T / ((2.0 / 3.0) * s.alpha_T + s.alpha_N);
  double const hi = s.alpha_T / (s.alpha_T + s.alpha_N);
  // minimizing with C_token proportional to N^(2/3) gives this exponent instead of lo
  double const large_ctx_limit = s.alpha_T / ((2.0 / 3.0) * s.alpha_T + s.alpha_N);

  std::vector<double> const budgets(presets::kDefaultBudgets.begin(), presets::kDefaultBudgets.end());
  double const mid = exponent_at(presets::kVideoContext, budgets);
  c.expect(mid > 0.3789 && mid < 0.4778, "n_ctx=1280 exponent inside bracket");
  c.expect(0.4294 > 0.3789 && 0.4294 < 0.4778, "reported predicted exponent inside bracket");

  double const small = exponent_at(1, budgets);
  c.expect(std::abs(small - hi) <= 0.01, "n_ctx -> 0 approaches upper endpoint");

  // T = C / C_token scales as 1/n_ctx here, so budgets scale with n_ctx to keep the minimum interior
  std::int64_t const big_ctx = 1000000000;
  std::vector<double> big_budgets;
  for (double C : budgets) { big_budgets.push_back(C * double(big_ctx) / 1280.0); }
  double const big = exponent_at(big_ctx, big_budgets);
  c.expect(std::abs(big - lo) <= 0.01, "n_ctx -> inf approaches lower endpoint");

  char buf[320];
  std::snprintf(buf, sizeof buf,
                " bracket=(%.4f, %.4f) exponent(n_ctx=1280)=%.5f exponent(n_ctx=1)=%.5f exponent(n_ctx=1e9)=%.5f"
                " analytic large-n_ctx limit=%.4f",
                lo, hi, mid, small, big, large_ctx_limit);
  c.detail << buf;
}

// --- 8
void sgd_identities(Check &c)
{
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> dim(2, 10);
  int grid_ok = 0, gain_ok = 0;
  for (int t = 0; t < 100; ++t) {
    int const n = dim(rng);
    auto const obj = make_objective(log_spectrum(n, 0.05 + 0.1 * (t % 5), 2.0), 1000 + std::uint64_t(t),
                                    t % 2 ? NoiseKind::isotropic : NoiseKind::hessian, 0.1 + 0.05 * (t % 7));
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) { theta(i) = z(rng); }
    std::int64_t const B = 1 + t % 16;
    auto const e = eta_opt_closed_form(obj, theta, B);
    grid_ok += std::abs(oracle::eta_grid_argmin(obj, theta, B, 3.0 * e.eta_opt + 1e-2, 1e-3) - e.eta_opt) <= 1e-3;
    double const at = stepwise_loss_delta(obj, theta, e.eta_opt, B);
    gain_ok += std::abs(max_gain(obj, theta, B) - at) <= 1e-12 * std::max(1.0, std::abs(at));
  }
  c.expect(grid_ok == 100, "grid argmin");
  c.expect(gain_ok == 100, "max gain identity");

  auto const obj5 = make_objective(log_spectrum(5, 0.1, 1.5), 5, NoiseKind::isotropic, 0.8);
  auto const mc = oracle::mc_step_delta(obj5, obj5.theta0, 0.6, 4, 100000, 99);
  double const expected = stepwise_loss_delta(obj5, obj5.theta0, 0.6, 4);
  double const z_mc = std::abs(mc.mean - expected) / mc.se;
  c.expect(z_mc <= 3.0, "Monte-Carlo step delta");

  auto const obj8 = make_objective(log_spectrum(8, 0.05, 1.0), 9, NoiseKind::hessian, 1.0);
  double const eta = 0.5, L = 1.0;
  std::int64_t const B = 4, K = 200;
  int bound_ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto const res = run_sgd(obj8, SgdConfig{eta, B, K, seed});
    double avg = 0.0;
    for (std::int64_t k = 0; k < K; ++k) { avg += res.trajectory[std::size_t(k)].grad_norm_sq; }
    avg /= double(K);
    double const delta0 = res.trajectory.front().loss - obj8.L_star;
    bound_ok += avg <= 2.0 * delta0 / (eta * double(K)) + L * eta * obj8.Sigma.trace() / double(B);
  }
  c.expect(bound_ok >= 99, "convergence bound");

  auto const obj4 = make_objective(log_spectrum(4, 0.2, 1.0), 8, NoiseKind::hessian, 2.0);
  GradientSampler const sample(obj4);
  Eigen::VectorXd const G = obj4.gradient(obj4.theta0);
  std::int64_t const Bv = 8;
  int const draws = 100000;
  auto vr = make_stream(4, 0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (int k = 0; k < draws; ++k) {
    Eigen::VectorXd const xi = sample(obj4.theta0, Bv, vr) - G;
    mean += xi;
    acc += xi * xi.transpose();
  }
  mean /= draws;
  Eigen::MatrixXd const cov = acc / draws - mean * mean.transpose();
  Eigen::MatrixXd const target = obj4.Sigma / double(Bv);
  double const var_err = (cov.diagonal().array() / target.diagonal().array() - 1.0).abs().maxCoeff();
  double const off_err = (cov - target).cwiseAbs().maxCoeff() / target.diagonal().maxCoeff();
  c.expect(var_err <= 0.05 && off_err <= 0.05, "mini-batch variance");

  c.detail << " grid=" << grid_ok << "/100 gain=" << gain_ok << "/100 mc_z=" << z_mc << " bound=" << bound_ok
           << "/100 var_rel_err=" << var_err;
}

// --- 9
void tradeoff(Check &c)
{
  std::vector<std::int64_t> B_grid;
  for (std::int64_t b = 1; b <= 512; b *= 2) { B_grid.push_back(b); }
  std::vector<double> eta_grid;
  for (int k = 0; k <= 8; ++k) { eta_grid.push_back(0.05 * std::exp2(k / 2.0)); }
  auto const ev = log_spectrum(16, 1e-2, 1.0);
  std::int64_t const budget = 4096;

  auto const noisy = make_objective(ev, 16, NoiseKind::hessian, 1.0);
  auto const sweep = sweep_hyperparams(noisy, budget, B_grid, eta_grid, 7, 48);
  auto const &M = sweep.mean_loss;
  // B profile at the middle learning rate, then the eta profile at that profile's best B.
  // The joint argmin drifts along the flat eta/B valley, so it is not the reference.
  Eigen::Index const ej = Eigen::Index(eta_grid.size() / 2);
  Eigen::Index bi = 0, eb = 0;
  M.col(ej).minCoeff(&bi);
  M.row(bi).minCoeff(&eb);
  std::vector<double> over_B(M.col(ej).data(), M.col(ej).data() + M.rows());
  std::vector<double> over_eta;
  for (Eigen::Index j = 0; j < M.cols(); ++j) { over_eta.push_back(M(bi, j)); }
  c.expect(is_unimodal_interior(over_B), "interior B optimum");
  c.expect(is_unimodal_interior(over_eta), "interior eta optimum");

  auto const clean = make_objective(ev, 16, NoiseKind::none, 0.0);
  auto const s0 = sweep_hyperparams(clean, budget, B_grid, eta_grid, 7, 1);
  Eigen::Index b0 = 0, e0 = 0;
  s0.mean_loss.minCoeff(&b0, &e0);
  c.expect(b0 == 0, "noiseless B optimum at grid minimum");
  c.detail << " eta_ref=" << eta_grid[std::size_t(ej)] << " B argmin=" << B_grid[std::size_t(bi)]
           << " eta argmin at that B=" << eta_grid[std::size_t(eb)]
           << " noiseless argmin B=" << B_grid[std::size_t(b0)];
}

// --- 10
void determinism(Check &c)
{
  auto const root = fs::temp_directory_path() / "ditscale_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream(root / "synth.json") << R"({"kind": "synth", "preset": "video", "noise_sigma": 5e-5})";
    std::ofstream(root / "sweep.json") << R"({"kind": "sweep", "dim": 8, "token_budget": 256,
      "B_grid": [1, 4, 16], "eta_grid": [0.1, 0.4], "replicates": 2})";
    std::ofstream(root / "sgd.json") << R"({"kind": "sgd", "dim": 8, "eta": 0.3, "B": 4, "steps": 50})";
  }
  std::string const exe = std::string("'") + DITSCALE_CLI + "'";
  auto const q = [](fs::path const &p) { return "'" + p.string() + "'"; };
  std::vector<std::string> const invocations{
      "simulate --spec " + q(root / "synth.json") + " --seed 3 --format csv",
      "simulate --spec " + q(root / "sweep.json") + " --seed 3",
      "simulate --spec " + q(root / "sgd.json") + " --seed 3 --format csv",
      "fit-hparams --runs " + q(root / "runs_src" / "runs.csv") + " --seed 3",
      "fit-hparams --runs " + q(root / "runs_src" / "runs.csv") + " --seed 3 --format csv",
      "fit-loss --runs " + q(root / "runs_src" / "runs.csv") + " --seed 3",
      "isoflop --seed 3",
      "isoflop --seed 3 --format csv",
      "plan --seed 3",
      "plan --seed 3 --format csv",
      "report --seed 3",
  };
  c.expect(shell(exe + " simulate --spec " + q(root / "synth.json") + " --seed 3 --format csv --out " +
                 q(root / "runs_src") + " > /dev/null 2>&1") == 0,
           "synth source");
  int compared = 0;
  for (std::size_t i = 0; i < invocations.size(); ++i) {
    std::string const tag = std::to_string(i);
    std::vector<std::string> blobs;
    for (char const *rep : {"a", "b"}) {
      auto const dir = root / (tag + rep);
      int const code = shell(exe + " " + invocations[i] + " --out " + q(dir) + " > " + q(root / (tag + rep + ".stdout")) +
                             " 2>/dev/null");
      c.expect(code == 0, "exit status of: " + invocations[i]);
      std::string blob = slurp(root / (tag + rep + ".stdout"));
      std::vector<fs::path> files;
      for (auto const &e : fs::directory_iterator(dir)) { files.push_back(e.path()); }
      std::sort(files.begin(), files.end());
      for (auto const &f : files) { blob += "\n--" + f.filename().string() + "\n" + slurp(f); }
      blobs.push_back(blob);
    }
    c.expect(blobs[0] == blobs[1], "byte-identical: " + invocations[i]);
    ++compared;
  }
  c.detail << " invocations_compared=" << compared;
}

} // namespace

int main()
{
  criterion(1, "compute accounting", compute_accounting);
  criterion(2, "published-law evaluation", published_laws);
  criterion(3, "hyperparameter plan", hyperparameter_plan);
  criterion(4, "loss-surface evaluation", surface_evaluation);
  criterion(5, "loss-surface recovery", surface_recovery);
  criterion(6, "power-law recovery", powerlaw_recovery);
  criterion(7, "allocation bracket", allocation_bracket);
  criterion(8, "SGD-oracle identities", sgd_identities);
  criterion(9, "batch size / learning rate trade-off", tradeoff);
  criterion(10, "CLI determinism", determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
