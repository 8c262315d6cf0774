#include "ditscale/loss_surface.hpp"
#include "ditscale/presets.hpp"

#include <doctest.h>

#include <random>

using namespace ditscale;

namespace {

std::vector<SurfacePoint> grid(LossSurfaced const &s, double sigma = 0.0, std::uint64_t seed = 0)
{
  std::mt19937_64 rng(seed);
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

} // namespace

TEST_CASE("published surfaces")
{
  CHECK(eval_loss(presets::video_surface(), 10.0, 1.07) == doctest::Approx(0.892954).epsilon(1e-6));
  CHECK(eval_loss(presets::video_fixed_surface(), 10.0, 1.07) == doctest::Approx(0.8599).epsilon(1e-4));
  CHECK(eval_loss(presets::image_surface(), 2.0, 1.07) == doctest::Approx(0.9666).epsilon(1e-4));
  CHECK_THROWS_AS(eval_loss(presets::video_surface(), 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(eval_loss(presets::video_surface(), 1.0, -1.0), DomainError);
}

TEST_CASE("loss decreases in T and N and approaches L_inf")
{
  auto const s = presets::video_surface();
  for (double T = 1.0; T < 1e4; T *= 1.7) {
    CHECK(eval_loss(s, T * 1.7, 1.0) < eval_loss(s, T, 1.0));
    CHECK(eval_loss(s, 1.0, T * 1.7) < eval_loss(s, 1.0, T));
  }
  CHECK(eval_loss(s, 1e30, 1e30) == doctest::Approx(s.L_inf).epsilon(1e-6));
  // vanishing model-term constant leaves the data term alone
  auto t = s;
  t.N_c = 0.0;
  CHECK(eval_loss(t, 3.0, 0.1) == doctest::Approx(t.data_term(3.0) + t.L_inf));
}

TEST_CASE("analytic gradient matches central differences")
{
  auto const s = presets::video_surface();
  auto const p = surface_params(s);
  for (double T : {0.5, 3.0, 40.0}) {
    for (double N : {0.02, 0.3, 2.0}) {
      auto const g = loss_gradient(s, T, N);
      for (int k = 0; k < 5; ++k) {
        double const h = 1e-6 * std::max(1.0, std::abs(p(k)));
        auto up = p, dn = p;
        up(k) += h;
        dn(k) -= h;
        double const fd =
            (eval_loss(surface_from_params(up, s.units), T, N) - eval_loss(surface_from_params(dn, s.units), T, N)) /
            (2 * h);
        CHECK(g(k) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("noiseless recovery and idempotent refinement")
{
  auto const truth = presets::video_surface();
  auto const pts = grid(truth);
  auto const fit = fit_loss_surface(pts, {}, UnitConvention::billions());
  auto const a = surface_params(truth), b = surface_params(fit.surface);
  for (int k = 0; k < 5; ++k) { CHECK(std::abs(b(k) / a(k) - 1.0) < 1e-4); }
  CHECK(fit.mse < 1e-20);
  CHECK_FALSE(fit.data_term_unconstrained);
  CHECK_FALSE(fit.model_term_unconstrained);
  CHECK(fit.trace.size() == 98);

  auto const again = refine_loss_surface(pts, fit.surface);
  auto const c = surface_params(again.surface);
  for (int k = 0; k < 5; ++k) { CHECK(std::abs(c(k) / b(k) - 1.0) < 1e-8); }
  CHECK(again.objective <= fit.objective * (1.0 + 1e-9) + 1e-30);
}

TEST_CASE("noisy fit marks the well-determined parameters")
{
  auto const truth = presets::video_surface();
  auto const fit = fit_loss_surface(grid(truth, 0.002, 5));
  CHECK(fit.identifiable[kNc]);
  CHECK(fit.identifiable[kAlphaN]);
  CHECK_FALSE(fit.identifiable[kTc]);
  for (int k = 0; k < 5; ++k) {
    if (fit.identifiable[std::size_t(k)]) {
      CHECK(std::abs(surface_params(fit.surface)(k) / surface_params(truth)(k) - 1.0) < 0.05);
    }
  }
  // residuals are observed - fitted
  auto const pts = grid(truth, 0.002, 5);
  CHECK(fit.residuals(0) == doctest::Approx(pts[0].loss - eval_loss(fit.surface, pts[0].T, pts[0].N)));
}

TEST_CASE("Huber objective resists an outlier")
{
  auto const truth = presets::video_surface();
  auto pts = grid(truth);
  pts[7].loss *= 1.2;
  FitOptions huber;
  huber.objective = FitObjective::huber;
  auto const h = fit_loss_surface(pts, huber);
  auto const l = fit_loss_surface(pts);
  double eh = 0, el = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == 7) { continue; }
    double const clean = eval_loss(truth, pts[i].T, pts[i].N);
    eh += std::abs(eval_loss(h.surface, pts[i].T, pts[i].N) - clean);
    el += std::abs(eval_loss(l.surface, pts[i].T, pts[i].N) - clean);
  }
  CHECK(eh < el);
}

TEST_CASE("fit preconditions")
{
  auto pts = grid(presets::video_surface());
  std::vector<SurfacePoint> few(pts.begin(), pts.begin() + 5);
  CHECK_THROWS_AS(fit_loss_surface(few), SingularityError);
  std::vector<SurfacePoint> one_n(pts.begin(), pts.begin() + 6);
  one_n.insert(one_n.end(), pts.begin(), pts.begin() + 6);
  CHECK_THROWS_AS(fit_loss_surface(one_n), SingularityError);
  pts[3].loss = -1.0;
  CHECK_THROWS_AS(fit_loss_surface(pts), DomainError);
}

TEST_CASE("mse helpers")
{
  std::vector<double> const a{1, 2, 3}, b{1, 2, 5};
  CHECK(mse(a, b) == doctest::Approx(4.0 / 3.0));
  CHECK(mse(a, a) == 0.0);
  CHECK_THROWS_AS(mse(a, std::vector<double>{1.0}), DomainError);
  CHECK(mse_reduction(4.31e-7, 2.35e-7) == doctest::Approx(0.45476).epsilon(1e-4));
  CHECK_THROWS_AS(mse_reduction(0.0, 1.0), DomainError);
}
