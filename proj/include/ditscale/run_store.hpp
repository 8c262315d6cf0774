#pragma once

#include "ditscale/compute_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ditscale {

struct LossPoint
{
  double tokens_seen = 0.0;
  double val_loss = 0.0;
};

struct TrainingRun
{
  std::string run_id;
  ModelShape shape;
  std::int64_t batch_size_samples = 1;
  double learning_rate = 0.0;
  ComputeConfig cfg;
  std::vector<LossPoint> loss_series;

  [[nodiscard]] std::int64_t batch_size_tokens() const
  {
    return batch_size_samples * cfg.tokens_per_sample();
  }
};

// One (run, evaluation point) pair. B is in samples until rescaled by to_units.
struct Observation
{
  double N = 0.0;
  double T = 0.0;
  double B = 0.0;
  double eta = 0.0;
  double loss = 0.0;
  double C = 0.0;
  double tokens_per_sample = 1.0;
  std::string run_id;
};

enum class BatchUnit
{
  samples,
  tokens
};

struct UnitConvention
{
  double token_unit = 1e9;
  double param_unit = 1e9;
  BatchUnit batch_unit = BatchUnit::samples;

  static UnitConvention identity() { return {1.0, 1.0, BatchUnit::samples}; }
  static UnitConvention billions() { return {}; }
};

std::string to_string(BatchUnit unit);
BatchUnit batch_unit_from_string(std::string const &name);

// Throws ValidationError naming the run when an invariant is broken.
void validate_run(TrainingRun const &run);

// CSV header: run_id,n_layer,width_ratio,n_ctx,batch_samples,lr,tokens_seen,val_loss
// Lines beginning with '#' are comments.
std::vector<TrainingRun> parse_runs_csv(std::istream &in, std::string const &source = "<csv>");
std::vector<TrainingRun> parse_runs_json(std::string const &text, std::string const &source = "<json>");

// Dispatches on extension (.json, otherwise CSV).
std::vector<TrainingRun> load_runs(std::filesystem::path const &path);

void write_runs_csv(std::ostream &out, std::vector<TrainingRun> const &runs);
std::string runs_to_json(std::vector<TrainingRun> const &runs);
void save_runs(std::filesystem::path const &path, std::vector<TrainingRun> const &runs);

// Flattens every loss-series point into an Observation in raw units.
std::vector<Observation> observations(std::vector<TrainingRun> const &runs);

// Per exact (N, T) group, keeps observations with loss <= (1 + rel_tol) * group minimum.
std::vector<Observation> select_near_optimal(std::vector<Observation> const &obs, double rel_tol = 2e-4);

// Minimum-loss observation of every (N, T) group, in first-seen group order.
std::vector<Observation> best_per_group(std::vector<Observation> const &obs);

Observation to_units(Observation const &obs, UnitConvention const &conv);
Observation from_units(Observation const &obs, UnitConvention const &conv);

} // namespace ditscale
