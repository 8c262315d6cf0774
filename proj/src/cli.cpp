#include "ditscale/cli.hpp"

#include "ditscale/compute_model.hpp"
#include "ditscale/errors.hpp"
#include "ditscale/format.hpp"
#include "ditscale/loss_surface.hpp"
#include "ditscale/optimal_alloc.hpp"
#include "ditscale/powerlaw.hpp"
#include "ditscale/presets.hpp"
#include "ditscale/run_store.hpp"
#include "ditscale/serialize.hpp"
#include "ditscale/sgd_oracle.hpp"
#include "ditscale/svg.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace fs = std::filesystem;

namespace ditscale {

namespace {

struct Common
{
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string format = "json";
};

void add_common(CLI::App *sub, Common &c)
{
  sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "directory for artifacts");
  sub->add_option("--seed", c.seed, "RNG seed");
  sub->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv"}));
}

struct Context
{
  Common const &opts;
  ToolConfig cfg;
  Json prov;
  std::ostream &out;
  std::string input; // attached to error diagnostics
};

std::string csv_cell(std::string const &s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) { return s; }
  std::string q = "\"";
  for (char c : s) { q += c == '"' ? std::string("\"\"") : std::string(1, c); }
  return q + "\"";
}

void flatten(Json const &j, std::string const &prefix, std::vector<std::pair<std::string, std::string>> &rows)
{
  if (j.is_object()) {
    for (auto const &[k, v] : j.items()) { flatten(v, prefix.empty() ? k : prefix + "." + k, rows); }
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) { flatten(j[i], prefix + "[" + std::to_string(i) + "]", rows); }
  } else if (j.is_number_float()) {
    rows.emplace_back(prefix, format_real(j.get<double>()));
  } else if (j.is_string()) {
    rows.emplace_back(prefix, j.get<std::string>());
  } else if (j.is_null()) {
    rows.emplace_back(prefix, "");
  } else {
    rows.emplace_back(prefix, j.dump());
  }
}

std::string flatten_csv(Json const &body, std::string const &comment)
{
  std::vector<std::pair<std::string, std::string>> rows;
  Json stripped = body;
  stripped.erase("provenance");
  flatten(stripped, "", rows);
  std::string s = comment + "\nkey,value\n";
  for (auto const &[k, v] : rows) { s += csv_cell(k) + "," + csv_cell(v) + "\n"; }
  return s;
}

fs::path out_dir(Context const &ctx)
{
  fs::path const dir(ctx.opts.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw ValidationError("cannot create output directory '" + dir.string() + "': " + ec.message()); }
  return dir;
}

void write_text(fs::path const &path, std::string const &text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw ValidationError("cannot write '" + path.string() + "'"); }
  f << text;
}

// csv_text replaces the flattened key/value table when given.
void emit(Context &ctx, std::string const &name, Json const &body, std::string const &csv_text = {})
{
  bool const json = ctx.opts.format == "json";
  std::string const text =
      json ? body.dump(2) + "\n" : (csv_text.empty() ? flatten_csv(body, provenance_comment(ctx.prov)) : csv_text);
  ctx.out << text;
  if (!ctx.opts.out.empty()) { write_text(out_dir(ctx) / (name + (json ? ".json" : ".csv")), text); }
}

void plot(Context &ctx, std::string const &name, Plot const &p)
{
  if (ctx.opts.out.empty()) { return; }
  write_plot(out_dir(ctx) / name, p, provenance_comment(ctx.prov));
}

Context make_context(Common const &opts, std::ostream &out)
{
  ToolConfig cfg = opts.config.empty() ? parse_config(Json::object()) : load_config(opts.config);
  Json prov = provenance(cfg, opts.seed);
  return Context{opts, std::move(cfg), std::move(prov), out, {}};
}

std::string runs_path(Context &ctx, std::string const &flag)
{
  std::string p = flag;
  if (p.empty() && ctx.cfg.raw.contains("runs")) { p = ctx.cfg.raw.at("runs").get<std::string>(); }
  if (p.empty()) { throw ValidationError("no run file given (use --runs or the config key \"runs\")"); }
  ctx.input = p;
  return p;
}

std::vector<double> budgets_from(Context const &ctx, std::vector<double> const &flag)
{
  std::vector<double> b = flag;
  if (b.empty() && ctx.cfg.raw.contains("budgets")) { b = ctx.cfg.raw.at("budgets").get<std::vector<double>>(); }
  if (b.empty()) { b.assign(presets::kDefaultBudgets.begin(), presets::kDefaultBudgets.end()); }
  for (double c : b) {
    if (!(c > 0.0)) { throw ValidationError("budgets must be positive"); }
  }
  return b;
}

Json observation_counts(std::size_t total, std::size_t used)
{
  return Json{{"n_observations", total}, {"n_used", used}};
}

// ---- fit-hparams

struct FitHparamsArgs
{
  std::string runs;
  double rel_tol = 2e-4;
};

void cmd_fit_hparams(Context &ctx, FitHparamsArgs const &a)
{
  auto const path = runs_path(ctx, a.runs);
  auto const runs = load_runs(path);
  auto const obs = observations(runs);
  auto const sel = select_near_optimal(obs, a.rel_tol);
  std::vector<Observation> u;
  for (auto const &o : sel) { u.push_back(to_units(o, ctx.cfg.units)); }
  auto const bp = batch_points(u);
  auto const lp = lr_points(u);
  auto const batch = fit_powerlaw2(bp, ctx.cfg.units);
  auto const lr = fit_powerlaw2(lp, ctx.cfg.units);

  Json body{{"provenance", ctx.prov}, {"input", path}, {"rel_tol", a.rel_tol}};
  body["counts"] = observation_counts(obs.size(), sel.size());
  body["batch_size"] = to_json(batch);
  body["learning_rate"] = to_json(lr);
  emit(ctx, "hparams", body);

  std::map<double, std::size_t> by_n;
  Plot pb{"optimal batch size", "T", "B", true, true, {}};
  Plot pl{"optimal learning rate", "T", "eta", true, true, {}};
  for (auto const &o : u) {
    auto const [it, fresh] = by_n.try_emplace(o.N, pb.series.size());
    if (fresh) {
      std::string const name = "N=" + format_real(o.N);
      pb.series.push_back({name, {}, {}, false});
      pl.series.push_back({name, {}, {}, false});
    }
    pb.series[it->second].x.push_back(o.T);
    pb.series[it->second].y.push_back(o.B);
    pl.series[it->second].x.push_back(o.T);
    pl.series[it->second].y.push_back(o.eta);
  }
  std::size_t const n_obs_series = pb.series.size();
  for (std::size_t s = 0; s < n_obs_series; ++s) {
    double const N = std::stod(pb.series[s].name.substr(2));
    auto const &xs = pb.series[s].x;
    auto const [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    PlotSeries fb{pb.series[s].name + " fit", {}, {}, true}, fl{pl.series[s].name + " fit", {}, {}, true};
    for (int k = 0; k <= 20; ++k) {
      double const T = *lo * std::pow(*hi / *lo, k / 20.0);
      fb.x.push_back(T);
      fb.y.push_back(batch.law(T, N));
      fl.x.push_back(T);
      fl.y.push_back(lr.law(T, N));
    }
    pb.series.push_back(std::move(fb));
    pl.series.push_back(std::move(fl));
  }
  plot(ctx, "hparams_batch", pb);
  plot(ctx, "hparams_lr", pl);
}

// ---- fit-loss

struct FitLossArgs
{
  std::string runs;
  std::string objective = "least_squares";
};

void cmd_fit_loss(Context &ctx, FitLossArgs const &a)
{
  auto const path = runs_path(ctx, a.runs);
  auto const obs = observations(load_runs(path));
  auto const best = best_per_group(obs);
  std::vector<Observation> u;
  for (auto const &o : best) { u.push_back(to_units(o, ctx.cfg.units)); }
  auto const pts = surface_points(u);
  FitOptions opt;
  opt.objective = a.objective == "huber" ? FitObjective::huber : FitObjective::least_squares;
  auto const fit = fit_loss_surface(pts, opt, ctx.cfg.units);

  Json body{{"provenance", ctx.prov}, {"input", path}, {"objective", a.objective}};
  body["counts"] = observation_counts(obs.size(), pts.size());
  body["fit"] = to_json(fit);
  emit(ctx, "loss_surface", body);

  Plot p{"loss surface", "T", "loss", true, false, {}};
  std::map<double, std::size_t> by_n;
  for (auto const &q : pts) {
    auto const [it, fresh] = by_n.try_emplace(q.N, p.series.size());
    if (fresh) { p.series.push_back({"N=" + format_real(q.N), {}, {}, false}); }
    p.series[it->second].x.push_back(q.T);
    p.series[it->second].y.push_back(q.loss);
  }
  for (auto const &[N, idx] : by_n) {
    auto const &xs = p.series[idx].x;
    auto const [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    PlotSeries f{p.series[idx].name + " fit", {}, {}, true};
    for (int k = 0; k <= 20; ++k) {
      double const T = *lo * std::pow(*hi / *lo, k / 20.0);
      f.x.push_back(T);
      f.y.push_back(eval_loss(fit.surface, T, N));
    }
    p.series.push_back(std::move(f));
  }
  plot(ctx, "loss_surface", p);
}

// ---- isoflop

struct IsoflopArgs
{
  std::string runs;
  std::string surface;
  std::vector<double> budgets;
  double budget_tol = 0.01;
  std::string form = "exponentiated";
};

void cmd_isoflop(Context &ctx, IsoflopArgs const &a)
{
  auto const budgets = budgets_from(ctx, a.budgets);
  Json body{{"provenance", ctx.prov}, {"budgets", budgets}, {"n_ctx", ctx.cfg.compute.n_ctx}};
  Plot p{"IsoFLOP profiles", "N", "loss", true, false, {}};
  std::optional<PowerLaw1d> empirical, predicted;

  std::string runs = a.runs;
  if (runs.empty() && ctx.cfg.raw.contains("runs")) { runs = ctx.cfg.raw.at("runs").get<std::string>(); }
  if (!runs.empty()) {
    ctx.input = runs;
    auto const obs = observations(load_runs(runs));
    auto const profiles = isoflop_profiles(obs, budgets, a.budget_tol);
    auto const law = empirical_nopt(profiles);
    Json jp = Json::array();
    for (auto const &pr : profiles) {
      jp.push_back(to_json(pr));
      PlotSeries s{"C=" + format_real(pr.budget_C), {}, {}, false};
      for (auto const &q : pr.points) {
        s.x.push_back(q.N);
        s.y.push_back(q.loss);
      }
      p.series.push_back(std::move(s));
    }
    body["empirical"] = Json{{"input", runs}, {"profiles", jp}, {"law", to_json(law)}};
    empirical = law.law;
  }

  bool const use_surface = !a.surface.empty() || runs.empty();
  if (use_surface) {
    LossSurfaced surface = presets::by_name(ctx.cfg.preset).surface;
    std::string source = "preset:" + ctx.cfg.preset;
    if (!a.surface.empty()) {
      ctx.input = a.surface;
      surface = surface_from_json(read_json_file(a.surface));
      source = a.surface;
    }
    AllocationOptions opt;
    opt.width_ratio = ctx.cfg.width_ratio;
    opt.form = a.form == "verbatim" ? ConstraintForm::verbatim : ConstraintForm::exponentiated;
    auto const alloc = predicted_nopt(surface, budgets, ctx.cfg.compute, opt);
    Json jp = Json::array();
    for (auto const &pr : alloc.profiles) {
      jp.push_back(to_json(pr));
      PlotSeries s{"C=" + format_real(pr.budget_C) + " surface", {}, {}, true};
      for (auto const &q : pr.window) {
        s.x.push_back(q.N);
        s.y.push_back(q.loss);
      }
      p.series.push_back(std::move(s));
    }
    body["predicted"] = Json{{"surface", source}, {"constraint_form", a.form}, {"profiles", jp},
                             {"law", to_json(alloc.law)}};
    predicted = alloc.law.law;
  }

  if (empirical && predicted) {
    auto const dev = slope_deviation(*empirical, *predicted);
    body["slope_deviation"] = Json{{"abs_err", dev.abs_err}, {"rel_err", dev.rel_err}};
  }
  emit(ctx, "isoflop", body);

  Plot law_plot{"optimal model size", "C", "N_opt", true, true, {}};
  auto const [lo, hi] = std::minmax_element(budgets.begin(), budgets.end());
  for (auto const &[name, law] : {std::pair{"empirical", empirical}, std::pair{"predicted", predicted}}) {
    if (!law) { continue; }
    PlotSeries s{name, {}, {}, true};
    for (int k = 0; k <= 20; ++k) {
      double const C = *lo * std::pow(*hi / *lo, k / 20.0);
      s.x.push_back(C);
      s.y.push_back((*law)(C));
    }
    law_plot.series.push_back(std::move(s));
  }
  plot(ctx, "isoflop_profiles", p);
  plot(ctx, "isoflop_law", law_plot);
}

// ---- plan

struct PlanArgs
{
  double budget = presets::kPlanBudget;
  std::string rounding = "at_least";
};

void cmd_plan(Context &ctx, PlanArgs const &a)
{
  if (!(a.budget > 0.0)) { throw ValidationError("--budget must be positive"); }
  auto const preset = presets::by_name(ctx.cfg.preset);
  Json body{{"provenance", ctx.prov}, {"preset", preset.name}, {"C", a.budget}};

  double n_opt = 0.0;
  if (preset.nopt_empirical) {
    n_opt = (*preset.nopt_empirical)(a.budget);
    body["N_opt_source"] = "empirical allocation law";
  } else {
    AllocationOptions opt;
    opt.width_ratio = ctx.cfg.width_ratio;
    n_opt = predicted_profile(preset.surface, a.budget, ctx.cfg.compute, opt).N_opt;
    body["N_opt_source"] = "loss surface under the compute constraint";
  }
  auto const rounding = a.rounding == "nearest_log" ? LayerRounding::nearest_log : LayerRounding::at_least;
  int const layers = layers_for_params(n_opt, ctx.cfg.width_ratio, rounding);
  auto const shape = ModelShape::from_layers(layers, ctx.cfg.width_ratio);
  double const N = double(shape.params());
  double const T = topt(a.budget, ctx.cfg.compute, shape);
  auto const &u = preset.batch_law.units;
  double const B = preset.batch_law(T / u.token_unit, N / u.param_unit);
  double const eta = preset.lr_law(T / preset.lr_law.units.token_unit, N / preset.lr_law.units.param_unit);
  double const loss = eval_loss(preset.surface, T / preset.surface.units.token_unit, N / preset.surface.units.param_unit);

  body["N_opt"] = n_opt;
  body["rounding"] = a.rounding;
  body["n_layer"] = layers;
  body["d"] = shape.d();
  body["N"] = N;
  body["T"] = T;
  body["B"] = B;
  body["B_tokens"] = B * double(ctx.cfg.compute.tokens_per_sample());
  body["eta"] = eta;
  body["predicted_loss"] = loss;
  if (preset.name == "video") {
    body["reported"] = Json{{"N_opt", presets::kReportedPlanN},
                            {"B", presets::kReportedPlanBatch},
                            {"eta", presets::kReportedPlanLr}};
  }
  emit(ctx, "plan", body);
}

// ---- simulate

struct SimulateArgs
{
  std::string spec;
};

std::vector<double> spectrum_from(Json const &s)
{
  if (s.contains("eigenvalues")) { return s.at("eigenvalues").get<std::vector<double>>(); }
  int const dim = s.value("dim", 16);
  double const lo = s.value("lambda_min", 1e-2), hi = s.value("lambda_max", 1.0);
  if (dim < 1 || !(lo > 0.0) || !(hi >= lo)) { throw ValidationError("simulate: invalid spectrum"); }
  std::vector<double> ev;
  for (int i = 0; i < dim; ++i) {
    ev.push_back(dim == 1 ? hi : lo * std::pow(hi / lo, double(i) / double(dim - 1)));
  }
  return ev;
}

QuadraticObjectived objective_from(Json const &s, std::uint64_t seed)
{
  std::string const noise = s.value("noise", std::string("hessian"));
  NoiseKind kind = NoiseKind::hessian;
  if (noise == "none") {
    kind = NoiseKind::none;
  } else if (noise == "isotropic") {
    kind = NoiseKind::isotropic;
  } else if (noise != "hessian") {
    throw ValidationError("simulate: unknown noise kind '" + noise + "'");
  }
  return make_objective(spectrum_from(s), seed, kind, s.value("noise_scale", 1.0), s.value("L_star", 1.0),
                        s.value("rotate", true));
}

void cmd_simulate(Context &ctx, SimulateArgs const &a)
{
  Json spec;
  if (!a.spec.empty()) {
    ctx.input = a.spec;
    spec = read_json_file(a.spec);
  } else if (ctx.cfg.raw.contains("simulate")) {
    spec = ctx.cfg.raw.at("simulate");
  } else {
    throw ValidationError("simulate needs --spec or a \"simulate\" config section");
  }
  if (!spec.is_object()) { throw ValidationError("simulate spec must be an object"); }
  std::string const kind = spec.value("kind", std::string("sgd"));
  std::uint64_t const seed = ctx.opts.seed;
  std::vector<TrainingRun> runs;
  Json summary{{"kind", kind}};

  try {
    if (kind == "sgd") {
      auto const obj = objective_from(spec, seed);
      SgdConfig cfg{spec.at("eta").get<double>(), spec.at("B").get<std::int64_t>(), spec.at("steps").get<std::int64_t>(),
                    seed};
      auto const res = run_sgd(obj, cfg);
      runs.push_back(trajectory_to_run(res, cfg, spec.value("run_id", std::string("sgd"))));
      summary["step_size_warning"] = res.step_size_warning;
      summary["final_loss"] = res.trajectory.back().loss;
    } else if (kind == "sweep") {
      auto const obj = objective_from(spec, seed);
      auto const sweep = sweep_hyperparams(obj, spec.at("token_budget").get<std::int64_t>(),
                                           spec.at("B_grid").get<std::vector<std::int64_t>>(),
                                           spec.at("eta_grid").get<std::vector<double>>(), seed,
                                           spec.value("replicates", 1));
      runs = sweep_to_runs(sweep);
      Eigen::Index bi = 0, ej = 0;
      sweep.mean_loss.minCoeff(&bi, &ej);
      summary["best"] = Json{{"B", sweep.B_grid[std::size_t(bi)]}, {"eta", sweep.eta_grid[std::size_t(ej)]},
                             {"loss", sweep.mean_loss(bi, ej)}};
    } else if (kind == "synth") {
      auto const preset = presets::by_name(spec.value("preset", ctx.cfg.preset));
      SynthGrid grid;
      grid.layers = spec.value("layers", std::vector<int>{4, 6, 8, 10});
      grid.tokens = spec.value("tokens", std::vector<double>{2e9, 4e9, 6e9, 8e9, 10e9, 12e9});
      grid.width_ratio = ctx.cfg.width_ratio;
      grid.cfg = ctx.cfg.compute;
      runs = synth_runs(preset.batch_law, preset.lr_law, preset.surface, grid, spec.value("noise_sigma", 0.0), seed);
      summary["preset"] = preset.name;
    } else {
      throw ValidationError("simulate: unknown kind '" + kind + "' (expected sgd|sweep|synth)");
    }
  } catch (nlohmann::json::exception const &e) {
    throw ValidationError(std::string("simulate spec: ") + e.what());
  }
  summary["n_runs"] = runs.size();

  std::ostringstream csv;
  csv << provenance_comment(ctx.prov) << "\n";
  write_runs_csv(csv, runs);
  if (ctx.opts.format == "json") {
    Json body{{"provenance", ctx.prov}, {"summary", summary}, {"runs", Json::parse(runs_to_json(runs)).at("runs")}};
    emit(ctx, "runs", body);
  } else {
    emit(ctx, "runs", Json(), csv.str());
  }
  if (!ctx.opts.out.empty()) {
    write_text(out_dir(ctx) / "runs_summary.json", Json{{"provenance", ctx.prov}, {"summary", summary}}.dump(2) + "\n");
  }
}

// ---- report

struct ReportArgs
{
  std::vector<std::string> artifacts;
};

Json deviation_row(char const *name, PowerLaw1d const &emp, PowerLaw1d const &pred, double rep_abs, double rep_rel)
{
  auto const d = slope_deviation(emp, pred);
  return Json{{"setting", name},
              {"empirical_exponent", emp.exponent},
              {"predicted_exponent", pred.exponent},
              {"abs_err", d.abs_err},
              {"rel_err", d.rel_err},
              {"reported_abs_err", rep_abs},
              {"reported_rel_err", rep_rel}};
}

void cmd_report(Context &ctx, ReportArgs const &a)
{
  Json body{{"provenance", ctx.prov}};
  body["slope_deviation"] = Json::array(
      {deviation_row("optimal", presets::nopt_empirical(), presets::nopt_predicted(), 0.0148, 0.0357),
       deviation_row("fixed", presets::nopt_fixed_empirical(), presets::nopt_fixed_predicted(), 0.1581, 0.3026)});
  body["mse"] = Json{{"fixed", presets::kMseFixed},
                     {"optimal", presets::kMseOptimal},
                     {"reduction", mse_reduction(presets::kMseFixed, presets::kMseOptimal)},
                     {"reported_reduction", presets::kReportedMseReduction}};

  double const C = presets::kLargeBudget;
  double const n_opt = presets::nopt_empirical()(C);
  double const n_fixed = presets::nopt_fixed_empirical()(C);
  body["extrapolation"] = Json{
      {"C", C},
      {"N_opt_optimal_empirical", n_opt},
      {"N_opt_fixed_empirical", n_fixed},
      {"N_opt_optimal_predicted", presets::nopt_predicted()(C)},
      {"N_opt_fixed_predicted", presets::nopt_fixed_predicted()(C)},
      {"parameter_saving", parameter_saving(presets::nopt_empirical(), presets::nopt_fixed_empirical(), C)},
      {"reported_parameter_saving", presets::kReportedParamSaving}};
  body["plan_point"] = Json{{"C", presets::kPlanBudget},
                            {"N_opt_empirical", presets::nopt_empirical()(presets::kPlanBudget)},
                            {"N_opt_predicted", presets::nopt_predicted()(presets::kPlanBudget)},
                            {"reported_N_opt", presets::kReportedPlanN}};

  Json evals = Json::array();
  auto const add_eval = [&](char const *name, LossSurfaced const &s, double T, double N, Json reported) {
    evals.push_back(Json{{"surface", name}, {"T", T}, {"N", N}, {"loss", eval_loss(s, T, N)}, {"reported", reported}});
  };
  add_eval("video", presets::video_surface(), 10.0, 1.07, nullptr);
  add_eval("video-fixed", presets::video_fixed_surface(), 10.0, 1.07, nullptr);
  add_eval("image", presets::image_surface(), 2.0, 1.07, presets::kReportedImageLoss);
  body["loss_evaluations"] = evals;

  Json inputs = Json::array();
  for (auto const &path : a.artifacts) {
    ctx.input = path;
    Json const art = read_json_file(path);
    Json entry{{"input", path}};
    if (art.contains("empirical") && art.contains("predicted")) {
      PowerLaw1d const emp{art["empirical"]["law"]["params"]["coef"].get<double>(),
                           art["empirical"]["law"]["params"]["exponent"].get<double>()};
      PowerLaw1d const pred{art["predicted"]["law"]["params"]["coef"].get<double>(),
                            art["predicted"]["law"]["params"]["exponent"].get<double>()};
      auto const d = slope_deviation(emp, pred);
      entry["slope_deviation"] = Json{{"abs_err", d.abs_err}, {"rel_err", d.rel_err}};
    }
    if (art.contains("fit")) { entry["mse"] = art["fit"].value("mse", 0.0); }
    if (art.contains("batch_size")) {
      entry["batch_size"] = art["batch_size"]["params"];
      entry["learning_rate"] = art["learning_rate"]["params"];
    }
    inputs.push_back(entry);
  }
  if (!inputs.empty()) { body["artifacts"] = inputs; }
  emit(ctx, "report", body);

  Plot p{"optimal model size laws", "C", "N_opt", true, true, {}};
  std::pair<char const *, PowerLaw1d> const laws[] = {{"optimal empirical", presets::nopt_empirical()},
                                                      {"optimal predicted", presets::nopt_predicted()},
                                                      {"fixed empirical", presets::nopt_fixed_empirical()},
                                                      {"fixed predicted", presets::nopt_fixed_predicted()}};
  for (auto const &[name, law] : laws) {
    PlotSeries s{name, {}, {}, true};
    for (int k = 0; k <= 30; ++k) {
      double const c = 1e17 * std::pow(10.0, 5.0 * k / 30.0);
      s.x.push_back(c);
      s.y.push_back(law(c));
    }
    p.series.push_back(std::move(s));
  }
  plot(ctx, "report_laws", p);
}

Json error_json(char const *kind, std::string const &message, int code, std::string const &input)
{
  Json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  if (!input.empty()) { j["error"]["input"] = input; }
  return j;
}

} // namespace

int run_cli(std::vector<std::string> const &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"scaling-law toolkit for diffusion transformers", "ditscale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(DITSCALE_VERSION));

  Common common;
  FitHparamsArgs fh;
  FitLossArgs fl;
  IsoflopArgs iso;
  PlanArgs plan;
  SimulateArgs sim;
  ReportArgs rep;

  auto *s_fh = app.add_subcommand("fit-hparams", "fit optimal batch size and learning rate laws");
  add_common(s_fh, common);
  s_fh->add_option("--runs", fh.runs, "run file (CSV or JSON)");
  s_fh->add_option("--rel-tol", fh.rel_tol, "near-optimal loss tolerance")->check(CLI::NonNegativeNumber);

  auto *s_fl = app.add_subcommand("fit-loss", "fit the loss surface L(T, N)");
  add_common(s_fl, common);
  s_fl->add_option("--runs", fl.runs, "run file (CSV or JSON)");
  s_fl->add_option("--objective", fl.objective)->check(CLI::IsMember({"least_squares", "huber"}));

  auto *s_iso = app.add_subcommand("isoflop", "IsoFLOP profiles and optimal model size laws");
  add_common(s_iso, common);
  s_iso->add_option("--runs", iso.runs, "run file for empirical profiles");
  s_iso->add_option("--surface", iso.surface, "loss surface JSON for predicted profiles")->check(CLI::ExistingFile);
  s_iso->add_option("--budgets", iso.budgets, "compute budgets in FLOPs")->delimiter(',');
  s_iso->add_option("--budget-tol", iso.budget_tol, "relative budget match")->check(CLI::PositiveNumber);
  s_iso->add_option("--form", iso.form)->check(CLI::IsMember({"exponentiated", "verbatim"}));

  auto *s_plan = app.add_subcommand("plan", "model size and hyperparameters for a compute budget");
  add_common(s_plan, common);
  s_plan->add_option("--budget", plan.budget, "compute budget in FLOPs");
  s_plan->add_option("--rounding", plan.rounding)->check(CLI::IsMember({"at_least", "nearest_log"}));

  auto *s_sim = app.add_subcommand("simulate", "SGD oracle runs and synthetic run files");
  add_common(s_sim, common);
  s_sim->add_option("--spec", sim.spec, "simulation spec JSON")->check(CLI::ExistingFile);

  auto *s_rep = app.add_subcommand("report", "comparison tables for the published constants");
  add_common(s_rep, common);
  s_rep->add_option("--artifact", rep.artifacts, "JSON artifacts from other subcommands")->check(CLI::ExistingFile);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (CLI::CallForHelp const &) {
    out << app.help();
    return kExitOk;
  } catch (CLI::CallForVersion const &) {
    out << DITSCALE_VERSION << "\n";
    return kExitOk;
  } catch (CLI::ParseError const &e) {
    err << error_json("usage", e.what(), kExitUsage, {}).dump(2) << "\n";
    return kExitUsage;
  }

  std::string input;
  try {
    Context ctx = make_context(common, out);
    try {
      if (s_fh->parsed()) { cmd_fit_hparams(ctx, fh); }
      if (s_fl->parsed()) { cmd_fit_loss(ctx, fl); }
      if (s_iso->parsed()) { cmd_isoflop(ctx, iso); }
      if (s_plan->parsed()) { cmd_plan(ctx, plan); }
      if (s_sim->parsed()) { cmd_simulate(ctx, sim); }
      if (s_rep->parsed()) { cmd_report(ctx, rep); }
    } catch (...) {
      input = ctx.input;
      throw;
    }
  } catch (ConvergenceError const &e) {
    Json j = error_json(e.kind(), e.what(), kExitNumeric, input);
    j["error"]["best_objective"] = e.best_objective();
    j["error"]["best_surface"] = to_json(e.best());
    err << j.dump(2) << "\n";
    return kExitNumeric;
  } catch (Error const &e) {
    int const code = e.numeric() ? kExitNumeric : kExitUsage;
    err << error_json(e.kind(), e.what(), code, input).dump(2) << "\n";
    return code;
  } catch (nlohmann::json::exception const &e) {
    err << error_json("validation_error", e.what(), kExitUsage, input).dump(2) << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

} // namespace ditscale
