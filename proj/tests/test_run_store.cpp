#include "ditscale/errors.hpp"
#include "ditscale/run_store.hpp"

#include <doctest.h>

#include <sstream>

using namespace ditscale;

namespace {

std::vector<TrainingRun> sample_runs()
{
  TrainingRun a;
  a.run_id = "a";
  a.shape = ModelShape::from_layers(4);
  a.batch_size_samples = 32;
  a.learning_rate = 2.5e-4;
  a.cfg = ComputeConfig{1280, 0};
  a.loss_series = {{1e9, 0.91}, {2e9, 0.87}, {4e9, 0.8412345678901234}};
  TrainingRun b = a;
  b.run_id = "b";
  b.batch_size_samples = 64;
  b.learning_rate = 1.0 / 3.0;
  b.loss_series = {{1e9, 0.93}, {2e9, 0.86}};
  return {a, b};
}

void check_same(std::vector<TrainingRun> const &x, std::vector<TrainingRun> const &y)
{
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].run_id == y[i].run_id);
    CHECK(x[i].shape.n_layer == y[i].shape.n_layer);
    CHECK(x[i].shape.width_ratio == y[i].shape.width_ratio);
    CHECK(x[i].cfg.n_ctx == y[i].cfg.n_ctx);
    CHECK(x[i].batch_size_samples == y[i].batch_size_samples);
    CHECK(x[i].learning_rate == y[i].learning_rate);
    REQUIRE(x[i].loss_series.size() == y[i].loss_series.size());
    for (std::size_t k = 0; k < x[i].loss_series.size(); ++k) {
      CHECK(x[i].loss_series[k].tokens_seen == y[i].loss_series[k].tokens_seen);
      CHECK(x[i].loss_series[k].val_loss == y[i].loss_series[k].val_loss);
    }
  }
}

std::vector<TrainingRun> parse(std::string const &text)
{
  std::istringstream in(text);
  return parse_runs_csv(in, "t.csv");
}

std::string const kHeader = "run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss\n";

} // namespace

TEST_CASE("CSV round trip is exact")
{
  auto const runs = sample_runs();
  std::ostringstream out;
  write_runs_csv(out, runs);
  check_same(parse(out.str()), runs);
  // writing again gives identical bytes
  std::ostringstream again;
  write_runs_csv(again, parse(out.str()));
  CHECK(again.str() == out.str());
}

TEST_CASE("JSON round trip is exact")
{
  auto const runs = sample_runs();
  check_same(parse_runs_json(runs_to_json(runs)), runs);
}

TEST_CASE("CSV parsing tolerates comments, column order and CRLF")
{
  std::string const text = "# produced elsewhere\n"
                           "val_loss,tokens_seen,lr,batch_samples,n_ctx,width_ratio,n_layer,run_id\r\n"
                           "0.9,1e9,0.001,16,1280,128,2,x\r\n"
                           "\n"
                           "0.8,2e9,0.001,16,1280,128,2,x\r\n";
  auto const runs = parse(text);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].loss_series.size() == 2);
  CHECK(runs[0].batch_size_tokens() == 16 * 1280);
}

TEST_CASE("CSV diagnostics name the offending line")
{
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse(kHeader), ValidationError);
  CHECK_THROWS_AS(parse("run_id,n_layer\n"), ParseError);
  CHECK_THROWS_WITH_AS(parse(kHeader + "r,2,128,1280,16,0.001,1e9,abc\n"), doctest::Contains("t.csv:2"), ParseError);
  CHECK_THROWS_WITH_AS(parse(kHeader + "r,2,128,1280,16,0.001,1e9,-0.5\n"), doctest::Contains("t.csv:2"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(parse(kHeader + "r,2,128,1280,16,0.001,2e9,0.9\nr,2,128,1280,16,0.001,1e9,0.8\n"),
                       doctest::Contains("t.csv:3"), ValidationError);
  CHECK_THROWS_AS(parse(kHeader + "r,2,128,1280,16,0.001,1e9,0.9\nr,2,128,1280,32,0.001,2e9,0.8\n"), ValidationError);
  CHECK_THROWS_AS(parse(kHeader + "r,0,128,1280,16,0.001,1e9,0.9\n"), ValidationError);
  CHECK_THROWS_AS(parse(kHeader + "r,2,128,1280,16,0.001,1e9\n"), ParseError);
}

TEST_CASE("JSON diagnostics")
{
  CHECK_THROWS_AS(parse_runs_json("{"), ParseError);
  CHECK_THROWS_AS(parse_runs_json("{\"runs\": 3}"), ParseError);
  CHECK_THROWS_AS(parse_runs_json("{\"runs\": []}"), ValidationError);
  CHECK_THROWS_AS(parse_runs_json(R"({"runs":[{"run_id":"a","n_layer":2,"n_ctx":1280,"batch_samples":4,"lr":0.1,
                                    "series":[]}]})"),
                  ValidationError);
}

TEST_CASE("observations carry raw compute")
{
  auto const obs = observations(sample_runs());
  REQUIRE(obs.size() == 5);
  double const c_token = compute_per_token(ModelShape::from_layers(4), ComputeConfig{1280, 0});
  CHECK(obs[0].N == double(params_from_layers(4)));
  CHECK(obs[2].C == c_token * 4e9);
  CHECK(obs[3].B == 64.0);
  CHECK(obs[3].tokens_per_sample == 1280.0);
}

TEST_CASE("select_near_optimal keeps the group minimum and ties within tolerance")
{
  std::vector<Observation> obs{
      {1, 1, 8, 0.1, 1.0000, 0, 1, "a"}, {1, 1, 16, 0.1, 1.0001, 0, 1, "b"}, {1, 1, 32, 0.1, 1.01, 0, 1, "c"},
      {2, 1, 8, 0.1, 0.5, 0, 1, "d"},    {1, 2, 8, 0.1, 0.7, 0, 1, "e"},
  };
  auto const sel = select_near_optimal(obs, 2e-4);
  REQUIRE(sel.size() == 4);
  CHECK(sel[0].run_id == "a");
  CHECK(sel[1].run_id == "b");
  CHECK(sel[2].run_id == "d");
  CHECK(select_near_optimal(obs, 0.0).size() == 3);
  CHECK_THROWS_AS(select_near_optimal(obs, -1.0), DomainError);

  auto const best = best_per_group(obs);
  REQUIRE(best.size() == 3);
  CHECK(best[0].run_id == "a");
  CHECK(best[1].run_id == "d");
  CHECK(best[2].run_id == "e");

  // every group keeps at least its minimum, for any tolerance
  for (double tol : {0.0, 1e-6, 1e-3, 1.0}) {
    auto const s = select_near_optimal(obs, tol);
    CHECK(s.size() >= best.size());
  }
}

TEST_CASE("unit conversion round trip")
{
  Observation const o{7.19e8, 1.4e11, 832, 1.6e-4, 0.8, 5.8e20, 1280, "x"};
  for (auto batch : {BatchUnit::samples, BatchUnit::tokens}) {
    UnitConvention const u{1e9, 1e9, batch};
    auto const v = to_units(o, u);
    CHECK(v.T == doctest::Approx(140.0));
    CHECK(v.N == doctest::Approx(0.719));
    CHECK(v.B == (batch == BatchUnit::tokens ? 832.0 * 1280 : 832.0));
    auto const w = from_units(v, u);
    CHECK(w.N == doctest::Approx(o.N).epsilon(1e-15));
    CHECK(w.T == doctest::Approx(o.T).epsilon(1e-15));
    CHECK(w.B == o.B);
  }
  CHECK_THROWS_AS(to_units(o, UnitConvention{0.0, 1.0, BatchUnit::samples}), DomainError);
  CHECK(batch_unit_from_string(to_string(BatchUnit::tokens)) == BatchUnit::tokens);
  CHECK_THROWS_AS(batch_unit_from_string("bytes"), ValidationError);
}
