#include "ditscale/compute_model.hpp"

#include "ditscale/errors.hpp"

#include <cmath>

namespace ditscale {

ModelShape ModelShape::from_layers(int n_layer, int width_ratio)
{
  if (n_layer < 1 || width_ratio < 1) {
    throw DomainError("model shape needs n_layer >= 1 and width_ratio >= 1");
  }
  return ModelShape{n_layer, width_ratio};
}

std::int64_t ModelShape::params() const { return params_from_layers(n_layer, width_ratio); }

std::int64_t params_from_layers(int n_layer, int width_ratio)
{
  if (n_layer < 1 || width_ratio < 1) {
    throw DomainError("params_from_layers: n_layer and width_ratio must be positive (got " +
                      std::to_string(n_layer) + ", " + std::to_string(width_ratio) + ")");
  }
  std::int64_t const d = std::int64_t(width_ratio) * n_layer;
  return 16 * std::int64_t(n_layer) * d * d;
}

int layers_for_params(double n_target, int width_ratio, LayerRounding rounding)
{
  if (!(n_target > 0.0)) { throw DomainError("layers_for_params: target must be positive"); }
  if (rounding == LayerRounding::at_least) {
    for (int n = 1; n <= kMaxLayerSearch; ++n) {
      if (double(params_from_layers(n, width_ratio)) >= n_target) { return n; }
    }
    return kMaxLayerSearch;
  }
  double const log_target = std::log(n_target);
  int best = 1;
  double best_dist = std::abs(std::log(double(params_from_layers(1, width_ratio))) - log_target);
  for (int n = 2; n <= kMaxLayerSearch; ++n) {
    double const dist = std::abs(std::log(double(params_from_layers(n, width_ratio))) - log_target);
    if (dist < best_dist) {
      best = n;
      best_dist = dist;
    }
  }
  return best;
}

double compute_per_token(ModelShape const &shape, ComputeConfig const &cfg)
{
  double const n = double(shape.params());
  return 0.75 * n * (7.0 + double(cfg.n_ctx) / double(shape.d()));
}

double total_compute(ModelShape const &shape, ComputeConfig const &cfg, double tokens)
{
  if (!(tokens > 0.0)) { throw DomainError("total_compute: token count must be positive"); }
  return compute_per_token(shape, cfg) * tokens;
}

std::vector<FlopRow> itemized_flops(ModelShape const &shape, ComputeConfig const &cfg)
{
  std::int64_t const L = shape.n_layer;
  std::int64_t const d = shape.d();
  std::int64_t const d2 = d * d;
  double const ctx = double(cfg.n_ctx);
  double const text = double(cfg.n_text);
  double const kv_ratio = cfg.n_ctx > 0 ? text / ctx : 0.0;

  return {
    {"Self-Attention:QKV", 3 * L * d2, 2.0 * L * 3.0 * d2},
    {"Self-Attention:No Mask", 0, 4.0 * L * ctx * d},
    {"Self-Attention:Project", L * d2, 2.0 * L * d2},
    {"Cross-Attention:Q", L * d2, 2.0 * L * d2},
    {"Cross-Attention:KV", 2 * L * d2, 2.0 * L * 2.0 * kv_ratio * d2},
    {"Cross-Attention:No Mask", 0, 4.0 * L * text * d},
    {"Cross-Attention:Project", L * d2, 2.0 * L * d2},
    {"FeedForward(SwiGLU)", 8 * L * d2, 16.0 * L * d2},
  };
}

} // namespace ditscale
