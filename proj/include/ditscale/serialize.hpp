#pragma once

#include "ditscale/loss_surface.hpp"
#include "ditscale/optimal_alloc.hpp"
#include "ditscale/powerlaw.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace ditscale {

using Json = nlohmann::ordered_json;

Json to_json(UnitConvention const &u);
UnitConvention units_from_json(Json const &j, UnitConvention fallback = {});

Json to_json(PowerLaw1d const &law);
Json to_json(Fitted<PowerLaw1d> const &fit);
Json to_json(PowerLaw2d const &law);
Json to_json(Fitted<PowerLaw2d> const &fit);
PowerLaw2d powerlaw2_from_json(Json const &j);

Json to_json(LossSurfaced const &s);
Json to_json(LossSurfaceFit const &fit);
// Accepts a bare surface object or any object carrying one under "surface".
LossSurfaced surface_from_json(Json const &j);

Json to_json(IsoFlopProfile const &p);
Json to_json(PredictedProfile const &p);

std::uint64_t fnv1a64(std::string const &bytes);

// Settings shared by every subcommand. Unknown keys are left for the subcommand.
struct ToolConfig
{
  std::string preset = "video";
  ComputeConfig compute{};
  int width_ratio = kDefaultWidthRatio;
  UnitConvention units{};
  Json raw = Json::object();
};

ToolConfig parse_config(Json const &j);
ToolConfig load_config(std::filesystem::path const &path);
Json read_json_file(std::filesystem::path const &path);

// {"tool", "version", "config_hash", "seed"}; the hash covers the canonical config dump.
Json provenance(ToolConfig const &cfg, std::uint64_t seed);
std::string provenance_comment(Json const &prov);

} // namespace ditscale
