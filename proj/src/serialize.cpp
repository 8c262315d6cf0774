#include "ditscale/serialize.hpp"

#include "ditscale/errors.hpp"
#include "ditscale/presets.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef DITSCALE_VERSION
#define DITSCALE_VERSION "0.0.0"
#endif

namespace ditscale {

namespace {

Json vec_json(Eigen::VectorXd const &v)
{
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) { arr.push_back(v(i)); }
  return arr;
}

Json diag_json(FitDiagnostics const &d)
{
  return Json{{"r2", d.r2}, {"sigma2", d.sigma2}, {"stderr", vec_json(d.stderr_)}, {"n_points", d.n_points}};
}

double need_number(Json const &j, char const *key, std::string const &where)
{
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ValidationError(where + ": missing numeric field '" + key + "'");
  }
  return j.at(key).get<double>();
}

} // namespace

Json to_json(UnitConvention const &u)
{
  return Json{{"token_unit", u.token_unit}, {"param_unit", u.param_unit}, {"batch_unit", to_string(u.batch_unit)}};
}

UnitConvention units_from_json(Json const &j, UnitConvention fallback)
{
  if (j.is_null()) { return fallback; }
  if (!j.is_object()) { throw ValidationError("units must be an object"); }
  UnitConvention u = fallback;
  if (j.contains("token_unit")) { u.token_unit = need_number(j, "token_unit", "units"); }
  if (j.contains("param_unit")) { u.param_unit = need_number(j, "param_unit", "units"); }
  if (j.contains("batch_unit")) { u.batch_unit = batch_unit_from_string(j.at("batch_unit").get<std::string>()); }
  if (!(u.token_unit > 0.0) || !(u.param_unit > 0.0)) { throw ValidationError("units must be positive"); }
  return u;
}

Json to_json(PowerLaw1d const &law)
{
  return Json{{"form", "coef*C^exponent"}, {"params", {{"coef", law.coef}, {"exponent", law.exponent}}}};
}

Json to_json(Fitted<PowerLaw1d> const &fit)
{
  Json j = to_json(fit.law);
  j["diagnostics"] = diag_json(fit.diag);
  return j;
}

Json to_json(PowerLaw2d const &law)
{
  return Json{{"form", "alpha*T^beta*N^gamma"},
              {"params", {{"alpha", law.alpha}, {"beta", law.beta}, {"gamma", law.gamma}}},
              {"units", to_json(law.units)}};
}

Json to_json(Fitted<PowerLaw2d> const &fit)
{
  Json j = to_json(fit.law);
  j["diagnostics"] = diag_json(fit.diag);
  return j;
}

PowerLaw2d powerlaw2_from_json(Json const &j)
{
  Json const &p = j.contains("params") ? j.at("params") : j;
  return {need_number(p, "alpha", "power law"), need_number(p, "beta", "power law"),
          need_number(p, "gamma", "power law"), units_from_json(j.value("units", Json()))};
}

Json to_json(LossSurfaced const &s)
{
  return Json{{"form", "(T_c/T)^alpha_T+(N_c/N)^alpha_N+L_inf"},
              {"params",
               {{"T_c", s.T_c}, {"alpha_T", s.alpha_T}, {"N_c", s.N_c}, {"alpha_N", s.alpha_N}, {"L_inf", s.L_inf}}},
              {"units", to_json(s.units)}};
}

Json to_json(LossSurfaceFit const &fit)
{
  Json ident = Json::object();
  Json rel = Json::object();
  for (std::size_t k = 0; k < 5; ++k) {
    rel[kSurfaceParamNames[k]] = fit.rel_stderr[k];
    ident[kSurfaceParamNames[k]] = bool(fit.identifiable[k]);
  }
  return Json{{"surface", to_json(fit.surface)},
              {"objective", fit.objective},
              {"mse", fit.mse},
              {"n_points", fit.residuals.size()},
              {"rel_stderr", rel},
              {"identifiable", ident},
              {"data_term_unconstrained", fit.data_term_unconstrained},
              {"model_term_unconstrained", fit.model_term_unconstrained},
              {"best_start", fit.best_start},
              {"n_starts", fit.trace.size()}};
}

LossSurfaced surface_from_json(Json const &j)
{
  if (j.contains("fit")) { return surface_from_json(j.at("fit")); }
  if (j.contains("surface")) { return surface_from_json(j.at("surface")); }
  Json const &p = j.contains("params") ? j.at("params") : j;
  LossSurfaced s{need_number(p, "T_c", "loss surface"), need_number(p, "alpha_T", "loss surface"),
                 need_number(p, "N_c", "loss surface"), need_number(p, "alpha_N", "loss surface"),
                 need_number(p, "L_inf", "loss surface"), units_from_json(j.value("units", Json()))};
  return s;
}

Json to_json(IsoFlopProfile const &p)
{
  Json pts = Json::array();
  for (auto const &q : p.points) { pts.push_back({{"N", q.N}, {"loss", q.loss}}); }
  return Json{{"budget_C", p.budget_C},
              {"N_opt", p.N_opt_empirical},
              {"vertex_loss", p.fit.y_min},
              {"parabola", {{"a", p.fit.a}, {"b", p.fit.b}, {"c", p.fit.c}}},
              {"points", pts}};
}

Json to_json(PredictedProfile const &p)
{
  Json pts = Json::array();
  for (auto const &q : p.window) {
    pts.push_back({{"n_layer", q.n_layer}, {"N", q.N}, {"T", q.T}, {"loss", q.loss}});
  }
  return Json{{"budget_C", p.budget_C},
              {"N_opt", p.N_opt},
              {"vertex_loss", p.fit.y_min},
              {"parabola", {{"a", p.fit.a}, {"b", p.fit.b}, {"c", p.fit.c}}},
              {"window", pts}};
}

std::uint64_t fnv1a64(std::string const &bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ToolConfig parse_config(Json const &j)
{
  if (!j.is_object()) { throw ValidationError("config must be a JSON object"); }
  ToolConfig cfg;
  cfg.raw = j;
  cfg.preset = j.value("preset", std::string("video"));
  auto const preset = presets::by_name(cfg.preset);
  cfg.compute.n_ctx = preset.n_ctx;
  try {
    if (j.contains("n_ctx")) { cfg.compute.n_ctx = j.at("n_ctx").get<std::int64_t>(); }
    if (j.contains("n_text")) { cfg.compute.n_text = j.at("n_text").get<std::int64_t>(); }
    if (j.contains("width_ratio")) { cfg.width_ratio = j.at("width_ratio").get<int>(); }
  } catch (nlohmann::json::exception const &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  cfg.units = units_from_json(j.value("units", Json()));
  if (cfg.compute.n_ctx < 1) { throw ValidationError("config: n_ctx must be >= 1"); }
  if (cfg.compute.n_text < 0) { throw ValidationError("config: n_text must be >= 0"); }
  if (cfg.width_ratio < 1) { throw ValidationError("config: width_ratio must be >= 1"); }
  return cfg;
}

Json read_json_file(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) { throw ValidationError("cannot open '" + path.string() + "'"); }
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Json::parse(ss.str());
  } catch (nlohmann::json::parse_error const &e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ToolConfig load_config(std::filesystem::path const &path) { return parse_config(read_json_file(path)); }

Json provenance(ToolConfig const &cfg, std::uint64_t seed)
{
  Json canon = cfg.raw;
  canon["preset"] = cfg.preset;
  canon["n_ctx"] = cfg.compute.n_ctx;
  canon["n_text"] = cfg.compute.n_text;
  canon["width_ratio"] = cfg.width_ratio;
  canon["units"] = to_json(cfg.units);
  // sorted keys so equivalent configs hash the same
  std::string const dump = nlohmann::json(canon).dump();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(dump));
  return Json{{"tool", "ditscale"}, {"version", DITSCALE_VERSION}, {"config_hash", buf}, {"seed", seed}};
}

std::string provenance_comment(Json const &prov)
{
  return "# ditscale " + prov.at("version").get<std::string>() + " config_hash=" +
         prov.at("config_hash").get<std::string>() + " seed=" + std::to_string(prov.at("seed").get<std::uint64_t>());
}

} // namespace ditscale
