#include "ditscale/presets.hpp"

#include "ditscale/errors.hpp"

namespace ditscale::presets {

LossSurfaced video_surface() { return {0.0373, 0.2917, 0.0082, 0.3188, 0.4856, UnitConvention::billions()}; }

LossSurfaced video_fixed_surface() { return {0.0541, 0.2515, 0.0052, 0.4101, 0.4783, UnitConvention::billions()}; }

LossSurfaced image_surface() { return {0.0235, 0.4183, 0.0039, 0.2935, 0.6183, UnitConvention::billions()}; }

PowerLaw2d video_batch_law(BatchUnit unit)
{
  UnitConvention u = UnitConvention::billions();
  u.batch_unit = unit;
  return {unit == BatchUnit::tokens ? 2.1797e4 : 17.0287, 0.8080, 0.1906, u};
}

PowerLaw2d video_lr_law() { return {0.0002, -0.0453, -0.1619, UnitConvention::billions()}; }

PowerLaw2d image_batch_law(BatchUnit unit)
{
  UnitConvention u = UnitConvention::billions();
  u.batch_unit = unit;
  double const tokens_alpha = 5.6624e4;
  return {unit == BatchUnit::tokens ? tokens_alpha : tokens_alpha / double(kImageContext), 0.1495, 0.0378, u};
}

PowerLaw2d image_lr_law() { return {0.0001, -0.1868, -0.2396, UnitConvention::billions()}; }

PowerLaw1d nopt_empirical() { return {1.5787, 0.4146}; }
PowerLaw1d nopt_predicted() { return {0.8705, 0.4294}; }
PowerLaw1d nopt_fixed_predicted() { return {9.5521, 0.3643}; }
PowerLaw1d nopt_fixed_empirical() { return {0.0130, 0.5224}; }

Preset by_name(std::string const &name)
{
  if (name == "video") {
    return {name, kVideoContext, video_surface(), video_batch_law(), video_lr_law(), nopt_empirical(),
            nopt_predicted()};
  }
  if (name == "video-fixed") {
    return {name, kVideoContext, video_fixed_surface(), video_batch_law(), video_lr_law(), nopt_fixed_empirical(),
            nopt_fixed_predicted()};
  }
  if (name == "image") {
    return {name, kImageContext, image_surface(), image_batch_law(), image_lr_law(), std::nullopt, std::nullopt};
  }
  throw ValidationError("unknown preset '" + name + "' (expected video|video-fixed|image)");
}

std::vector<std::string> names() { return {"video", "video-fixed", "image"}; }

} // namespace ditscale::presets
