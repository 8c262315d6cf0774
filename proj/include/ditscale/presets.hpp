#pragma once

#include "ditscale/loss_surface.hpp"
#include "ditscale/powerlaw.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ditscale::presets {

// Published constants. Hyperparameter laws and surfaces take T and N in billions.

LossSurfaced video_surface();       // fitted under optimal hyperparameters
LossSurfaced video_fixed_surface(); // fitted under the fixed B / eta setting
LossSurfaced image_surface();

PowerLaw2d video_batch_law(BatchUnit unit = BatchUnit::samples);
PowerLaw2d video_lr_law();
PowerLaw2d image_batch_law(BatchUnit unit = BatchUnit::samples);
PowerLaw2d image_lr_law();

// N_opt(C) in parameters for C in FLOPs.
PowerLaw1d nopt_empirical();       // IsoFLOP fits, optimal hyperparameters
PowerLaw1d nopt_predicted();       // from the optimal-hyperparameter surface
PowerLaw1d nopt_fixed_predicted(); // from the fixed-hyperparameter surface
PowerLaw1d nopt_fixed_empirical(); // IsoFLOP fits, fixed hyperparameters

inline constexpr std::int64_t kVideoContext = 1280; // 5 latent frames of 16x16
inline constexpr std::int64_t kImageContext = 256;

inline constexpr std::int64_t kFixedBatch = 128;
inline constexpr double kFixedLr = 2.5313e-4;

inline constexpr double kMseFixed = 4.31e-7;
inline constexpr double kMseOptimal = 2.35e-7;
inline constexpr double kReportedMseReduction = 0.455;

inline constexpr double kPlanBudget = 5.85e20;
inline constexpr double kLargeBudget = 1e22;
inline constexpr double kReportedPlanN = 0.64e9;
inline constexpr double kReportedPlanBatch = 832.0;
inline constexpr double kReportedPlanLr = 1.6e-4;
inline constexpr double kReportedParamSaving = 0.399;
inline constexpr double kReportedImageLoss = 0.6414;

inline constexpr std::array<double, 5> kDefaultBudgets{3e17, 6e17, 1e18, 3e18, 6e18};

struct Preset
{
  std::string name;
  std::int64_t n_ctx = kVideoContext;
  LossSurfaced surface;
  PowerLaw2d batch_law; // samples
  PowerLaw2d lr_law;
  std::optional<PowerLaw1d> nopt_empirical;
  std::optional<PowerLaw1d> nopt_predicted;
};

// "video", "video-fixed", "image". Throws ValidationError otherwise.
Preset by_name(std::string const &name);
std::vector<std::string> names();

} // namespace ditscale::presets
