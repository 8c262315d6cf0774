#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ditscale {

// Cross-DiT family with proportional scaling: d = width_ratio * n_layer and
// one attention head per layer.
struct ModelShape
{
  int n_layer = 1;
  int width_ratio = 128;

  static ModelShape from_layers(int n_layer, int width_ratio = 128);

  [[nodiscard]] std::int64_t d() const { return std::int64_t(width_ratio) * n_layer; }
  [[nodiscard]] int n_head() const { return n_layer; }
  // Non-embedding parameter count, 16 * n_layer * d^2.
  [[nodiscard]] std::int64_t params() const;
};

struct ComputeConfig
{
  std::int64_t n_ctx = 1280; // latent tokens per sample, f*h*w
  std::int64_t n_text = 0;   // only used by the itemized FLOP table

  [[nodiscard]] std::int64_t tokens_per_sample() const { return n_ctx; }
};

inline constexpr int kDefaultWidthRatio = 128;
inline constexpr int kMaxLayerSearch = 64;

std::int64_t params_from_layers(int n_layer, int width_ratio = kDefaultWidthRatio);

enum class LayerRounding
{
  nearest_log, // closest parameter count in log space, ties to fewer layers
  at_least     // smallest layer count reaching the target
};

int layers_for_params(double n_target,
                      int width_ratio = kDefaultWidthRatio,
                      LayerRounding rounding = LayerRounding::nearest_log);

// FLOPs per training token, (3/4) N (7 + n_ctx / d).
double compute_per_token(ModelShape const &shape, ComputeConfig const &cfg);

double total_compute(ModelShape const &shape, ComputeConfig const &cfg, double tokens);

struct FlopRow
{
  std::string operation;
  std::int64_t params = 0;
  double forward_flops_per_token = 0.0;
};

// Per-operation parameter and forward-FLOP rows, reproduced verbatim from the
// architecture table (Cross-Attention KV flops are amortized per context token).
std::vector<FlopRow> itemized_flops(ModelShape const &shape, ComputeConfig const &cfg);

} // namespace ditscale
