#include "ditscale/run_store.hpp"

#include "ditscale/errors.hpp"
#include "ditscale/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ditscale {

namespace {

std::vector<std::string> split_csv_line(std::string const &line)
{
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto const first = field.find_first_not_of(" \t\r");
    auto const last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? std::string{} : field.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') { fields.emplace_back(); }
  return fields;
}

std::string where(std::string const &source, std::size_t line)
{
  return source + ":" + std::to_string(line);
}

double parse_real(std::string const &text, std::string const &column, std::string const &loc)
{
  try {
    std::size_t used = 0;
    double const v = std::stod(text, &used);
    if (used != text.size()) { throw std::invalid_argument(text); }
    return v;
  } catch (std::exception const &) {
    throw ParseError(loc + ": column '" + column + "' is not a number: '" + text + "'");
  }
}

std::int64_t parse_int(std::string const &text, std::string const &column, std::string const &loc)
{
  std::int64_t v = 0;
  auto const *end = text.data() + text.size();
  auto const [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(loc + ": column '" + column + "' is not an integer: '" + text + "'");
  }
  return v;
}

constexpr char const *kColumns[] = {"run_id", "n_layer", "width_ratio", "n_ctx",
                                    "batch_samples", "lr", "tokens_seen", "val_loss"};

void check_point(LossPoint const &p, LossPoint const *prev, std::string const &loc)
{
  if (!(p.tokens_seen > 0.0) || !std::isfinite(p.tokens_seen)) {
    throw ValidationError(loc + ": tokens_seen must be positive");
  }
  if (!(p.val_loss > 0.0) || !std::isfinite(p.val_loss)) {
    throw ValidationError(loc + ": val_loss must be positive (got " + format_real(p.val_loss) + ")");
  }
  if (prev && !(p.tokens_seen > prev->tokens_seen)) {
    throw ValidationError(loc + ": tokens_seen must be strictly increasing within a run (" +
                          format_real(prev->tokens_seen) + " then " + format_real(p.tokens_seen) + ")");
  }
}

void check_header(TrainingRun const &run, std::string const &loc)
{
  if (run.run_id.empty()) { throw ValidationError(loc + ": empty run_id"); }
  if (run.shape.n_layer < 1) { throw ValidationError(loc + ": n_layer must be >= 1"); }
  if (run.shape.width_ratio < 1) { throw ValidationError(loc + ": width_ratio must be >= 1"); }
  if (run.cfg.n_ctx < 1) { throw ValidationError(loc + ": n_ctx must be >= 1"); }
  if (run.batch_size_samples < 1) { throw ValidationError(loc + ": batch_samples must be >= 1"); }
  if (!(run.learning_rate > 0.0) || !std::isfinite(run.learning_rate)) {
    throw ValidationError(loc + ": lr must be positive");
  }
}

} // namespace

std::string to_string(BatchUnit unit) { return unit == BatchUnit::samples ? "samples" : "tokens"; }

BatchUnit batch_unit_from_string(std::string const &name)
{
  if (name == "samples") { return BatchUnit::samples; }
  if (name == "tokens") { return BatchUnit::tokens; }
  throw ValidationError("unknown batch unit '" + name + "' (expected samples|tokens)");
}

void validate_run(TrainingRun const &run)
{
  std::string const loc = "run '" + run.run_id + "'";
  check_header(run, loc);
  if (run.loss_series.empty()) { throw ValidationError(loc + ": empty loss series"); }
  for (std::size_t i = 0; i < run.loss_series.size(); ++i) {
    check_point(run.loss_series[i], i ? &run.loss_series[i - 1] : nullptr,
                loc + " point " + std::to_string(i));
  }
}

std::vector<TrainingRun> parse_runs_csv(std::istream &in, std::string const &source)
{
  std::vector<TrainingRun> runs;
  std::map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::size_t> col(std::size(kColumns));

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') { line.pop_back(); }
    if (line.empty() || line.front() == '#') { continue; }
    auto const fields = split_csv_line(line);
    auto const loc = where(source, line_no);
    if (!have_header) {
      for (std::size_t c = 0; c < std::size(kColumns); ++c) {
        auto const it = std::find(fields.begin(), fields.end(), kColumns[c]);
        if (it == fields.end()) {
          throw ParseError(loc + ": header is missing column '" + kColumns[c] + "'");
        }
        col[c] = std::size_t(it - fields.begin());
      }
      have_header = true;
      continue;
    }
    if (fields.size() < std::size(kColumns)) {
      throw ParseError(loc + ": expected " + std::to_string(std::size(kColumns)) + " fields, got " +
                       std::to_string(fields.size()));
    }
    auto field = [&](std::size_t c) -> std::string const & { return fields.at(col[c]); };

    TrainingRun row;
    row.run_id = field(0);
    row.shape.n_layer = int(parse_int(field(1), kColumns[1], loc));
    row.shape.width_ratio = int(parse_int(field(2), kColumns[2], loc));
    row.cfg.n_ctx = parse_int(field(3), kColumns[3], loc);
    row.batch_size_samples = parse_int(field(4), kColumns[4], loc);
    row.learning_rate = parse_real(field(5), kColumns[5], loc);
    LossPoint const p{parse_real(field(6), kColumns[6], loc), parse_real(field(7), kColumns[7], loc)};
    check_header(row, loc);

    auto const found = index.find(row.run_id);
    if (found == index.end()) {
      check_point(p, nullptr, loc);
      row.loss_series.push_back(p);
      index.emplace(row.run_id, runs.size());
      runs.push_back(std::move(row));
      continue;
    }
    TrainingRun &run = runs[found->second];
    if (run.shape.n_layer != row.shape.n_layer || run.shape.width_ratio != row.shape.width_ratio ||
        run.cfg.n_ctx != row.cfg.n_ctx || run.batch_size_samples != row.batch_size_samples ||
        run.learning_rate != row.learning_rate) {
      throw ValidationError(loc + ": run '" + run.run_id + "' changes its configuration mid-series");
    }
    check_point(p, &run.loss_series.back(), loc);
    run.loss_series.push_back(p);
  }
  if (!have_header) { throw ParseError(source + ": missing CSV header"); }
  if (runs.empty()) { throw ValidationError(source + ": no training runs"); }
  return runs;
}

std::vector<TrainingRun> parse_runs_json(std::string const &text, std::string const &source)
{
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (nlohmann::json::parse_error const &e) {
    throw ParseError(source + ": " + e.what());
  }
  if (!doc.contains("runs") || !doc["runs"].is_array()) {
    throw ParseError(source + ": expected an object with a 'runs' array");
  }
  std::vector<TrainingRun> runs;
  std::size_t i = 0;
  for (auto const &r : doc["runs"]) {
    std::string const loc = source + ": runs[" + std::to_string(i++) + "]";
    try {
      TrainingRun run;
      run.run_id = r.at("run_id").get<std::string>();
      run.shape.n_layer = r.at("n_layer").get<int>();
      run.shape.width_ratio = r.value("width_ratio", kDefaultWidthRatio);
      run.cfg.n_ctx = r.at("n_ctx").get<std::int64_t>();
      run.cfg.n_text = r.value("n_text", std::int64_t{0});
      run.batch_size_samples = r.at("batch_samples").get<std::int64_t>();
      run.learning_rate = r.at("lr").get<double>();
      check_header(run, loc);
      std::size_t j = 0;
      for (auto const &p : r.at("series")) {
        LossPoint const lp{p.at("tokens_seen").get<double>(), p.at("val_loss").get<double>()};
        check_point(lp, run.loss_series.empty() ? nullptr : &run.loss_series.back(),
                    loc + ".series[" + std::to_string(j++) + "]");
        run.loss_series.push_back(lp);
      }
      if (run.loss_series.empty()) { throw ValidationError(loc + ": empty series"); }
      runs.push_back(std::move(run));
    } catch (nlohmann::json::exception const &e) {
      throw ParseError(loc + ": " + e.what());
    }
  }
  if (runs.empty()) { throw ValidationError(source + ": no training runs"); }
  return runs;
}

std::vector<TrainingRun> load_runs(std::filesystem::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ParseError("cannot open run file " + path.string()); }
  if (path.extension() == ".json") {
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_runs_json(ss.str(), path.string());
  }
  return parse_runs_csv(in, path.string());
}

void write_runs_csv(std::ostream &out, std::vector<TrainingRun> const &runs)
{
  out << "run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss\n";
  for (auto const &run : runs) {
    for (auto const &p : run.loss_series) {
      out << run.run_id << ',' << run.shape.n_layer << ',' << run.shape.width_ratio << ','
          << run.cfg.n_ctx << ',' << run.batch_size_samples << ',' << format_real(run.learning_rate)
          << ',' << format_real(p.tokens_seen) << ',' << format_real(p.val_loss) << '\n';
    }
  }
}

std::string runs_to_json(std::vector<TrainingRun> const &runs)
{
  nlohmann::ordered_json doc;
  doc["runs"] = nlohmann::ordered_json::array();
  for (auto const &run : runs) {
    nlohmann::ordered_json r;
    r["run_id"] = run.run_id;
    r["n_layer"] = run.shape.n_layer;
    r["width_ratio"] = run.shape.width_ratio;
    r["n_ctx"] = run.cfg.n_ctx;
    r["n_text"] = run.cfg.n_text;
    r["batch_samples"] = run.batch_size_samples;
    r["lr"] = run.learning_rate;
    r["series"] = nlohmann::ordered_json::array();
    for (auto const &p : run.loss_series) {
      r["series"].push_back({{"tokens_seen", p.tokens_seen}, {"val_loss", p.val_loss}});
    }
    doc["runs"].push_back(std::move(r));
  }
  return doc.dump(2) + "\n";
}

void save_runs(std::filesystem::path const &path, std::vector<TrainingRun> const &runs)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) { throw ParseError("cannot write " + path.string()); }
  if (path.extension() == ".json") {
    out << runs_to_json(runs);
  } else {
    write_runs_csv(out, runs);
  }
}

std::vector<Observation> observations(std::vector<TrainingRun> const &runs)
{
  std::vector<Observation> out;
  for (auto const &run : runs) {
    double const n = double(run.shape.params());
    double const c_token = compute_per_token(run.shape, run.cfg);
    for (auto const &p : run.loss_series) {
      out.push_back(Observation{n, p.tokens_seen, double(run.batch_size_samples), run.learning_rate,
                                p.val_loss, c_token * p.tokens_seen, double(run.cfg.tokens_per_sample()),
                                run.run_id});
    }
  }
  return out;
}

std::vector<Observation> select_near_optimal(std::vector<Observation> const &obs, double rel_tol)
{
  if (!(rel_tol >= 0.0)) { throw DomainError("select_near_optimal: rel_tol must be >= 0"); }
  std::map<std::pair<double, double>, double> group_min;
  for (auto const &o : obs) {
    auto const [it, inserted] = group_min.try_emplace({o.N, o.T}, o.loss);
    if (!inserted) { it->second = std::min(it->second, o.loss); }
  }
  std::vector<Observation> out;
  for (auto const &o : obs) {
    double const lo = group_min.at({o.N, o.T});
    if (o.loss == lo || o.loss <= (1.0 + rel_tol) * lo) { out.push_back(o); }
  }
  return out;
}

std::vector<Observation> best_per_group(std::vector<Observation> const &obs)
{
  std::map<std::pair<double, double>, std::size_t> best;
  std::vector<std::pair<double, double>> order;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    auto const key = std::make_pair(obs[i].N, obs[i].T);
    auto const [it, inserted] = best.try_emplace(key, i);
    if (inserted) {
      order.push_back(key);
    } else if (obs[i].loss < obs[it->second].loss) {
      it->second = i;
    }
  }
  std::vector<Observation> out;
  out.reserve(order.size());
  for (auto const &key : order) { out.push_back(obs[best.at(key)]); }
  return out;
}

Observation to_units(Observation const &obs, UnitConvention const &conv)
{
  if (!(conv.token_unit > 0.0) || !(conv.param_unit > 0.0)) {
    throw DomainError("unit convention scale factors must be positive");
  }
  Observation out = obs;
  out.N = obs.N / conv.param_unit;
  out.T = obs.T / conv.token_unit;
  if (conv.batch_unit == BatchUnit::tokens) { out.B = obs.B * obs.tokens_per_sample; }
  return out;
}

Observation from_units(Observation const &obs, UnitConvention const &conv)
{
  if (!(conv.token_unit > 0.0) || !(conv.param_unit > 0.0)) {
    throw DomainError("unit convention scale factors must be positive");
  }
  Observation out = obs;
  out.N = obs.N * conv.param_unit;
  out.T = obs.T * conv.token_unit;
  if (conv.batch_unit == BatchUnit::tokens) { out.B = obs.B / obs.tokens_per_sample; }
  return out;
}

} // namespace ditscale
