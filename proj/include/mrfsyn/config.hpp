#pragma once

#include "dictionary.hpp"
#include "phantom.hpp"

#include <json.hpp>

#include <optional>

namespace mrf {

struct PhantomConfig
{
  Index size = 64;
  std::uint64_t seed = 0;
  TissueTable table = TissueTable::defaults();
  bool snap_to_grid = false; // move every tissue onto the dictionary grid before rasterizing
  B0Spec b0 = B0Spec::none();
};

struct NoiseConfig
{
  std::optional<double> snr_db; // empty: noiseless
  std::uint64_t seed = 0;
};

/// Everything needed to regenerate any artifact of one experiment. Seeds are explicit; nothing
/// reads ambient randomness.
struct ExperimentConfig
{
  PhantomConfig phantom;
  std::string trajectory = "cartesian"; // cartesian | undersampled | dense
  FispMrf fisp = default_fisp();
  ContrastSpecs contrasts;
  std::string grid_name = "desk";
  ParamGrid grid = ParamGrid::desk();
  NoiseConfig noise;
  bool model_b0 = false;
  Index time_segments = 8;
  bool density_compensation = true;
  std::string output_dir = ".";

  void validate() const
  {
    require(phantom.size >= 32, "config: phantom size must be at least 32");
    phantom.table.validate();
    require(trajectory == "cartesian" || trajectory == "undersampled" || trajectory == "dense",
            "config: trajectory must be cartesian, undersampled or dense");
    mrf::validate(fisp);
    mrf::validate(contrasts.t1w);
    mrf::validate(contrasts.t2w);
    mrf::validate(contrasts.flair);
    grid.validate();
    require(time_segments >= 1, "config: time_segments must be at least 1");
    if (noise.snr_db) { require(std::isfinite(*noise.snr_db), "config: snr_db must be finite"); }
  }
};

inline ParamGrid named_grid(std::string const &name)
{
  if (name == "desk") { return ParamGrid::desk(); }
  if (name == "full") { return ParamGrid::full(); }
  throw InvalidArgument("unknown grid '" + name + "' (expected desk or full)");
}

// nlohmann serializers. Doubles are written in shortest round-trip form, so JSON round trips are exact.

inline void to_json(nlohmann::json &j, TissueTable const &t)
{
  j = nlohmann::json::object();
  for (int i = 0; i < kTissueCount; ++i) {
    auto const &e = t.entries[static_cast<std::size_t>(i)];
    j[tissue_name(static_cast<Tissue>(i))] = {{"t1_ms", e.t1_ms}, {"t2_ms", e.t2_ms}, {"pd", e.pd}};
  }
}

inline void from_json(nlohmann::json const &j, TissueTable &t)
{
  for (int i = 0; i < kTissueCount; ++i) {
    auto const &e = j.at(tissue_name(static_cast<Tissue>(i)));
    t.entries[static_cast<std::size_t>(i)] = {e.at("t1_ms").get<double>(), e.at("t2_ms").get<double>(),
                                              e.at("pd").get<double>()};
  }
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(B0Spec, offset_hz, gx_hz, gy_hz, gxx_hz, gyy_hz, gxy_hz, blob_peak_hz, blob_x, blob_y,
                                   blob_sigma)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FispMrf, n_tr, te_ms, tr_ms, flip_schedule, inversion_prep, inversion_delay_ms,
                                   schedule_seed)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SpinEcho, te_ms, tr_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Tse, te_eff_ms, tr_ms, etl, esp_ms, refocus_rad, steady_state)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FlairTse, ti_ms, te_eff_ms, tr_ms, etl, esp_ms, refocus_rad, steady_state)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ContrastSpecs, t1w, t2w, flair)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ParamGrid, t1_values_ms, t2_values_ms, exclude_t2_gt_t1)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PhantomConfig, size, seed, table, snap_to_grid, b0)

inline void to_json(nlohmann::json &j, NoiseConfig const &n)
{
  j = {{"snr_db", n.snr_db ? nlohmann::json(*n.snr_db) : nlohmann::json(nullptr)}, {"seed", n.seed}};
}

inline void from_json(nlohmann::json const &j, NoiseConfig &n)
{
  auto const &s = j.at("snr_db");
  n.snr_db = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
  n.seed = j.at("seed").get<std::uint64_t>();
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig, phantom, trajectory, fisp, contrasts, grid_name, grid, noise, model_b0,
                                   time_segments, density_compensation, output_dir)

/// Parses and validates; malformed or incomplete JSON is a user error.
inline ExperimentConfig config_from_json(nlohmann::json const &j)
{
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
  } catch (nlohmann::json::exception const &e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  require(static_cast<Index>(c.fisp.flip_schedule.size()) == c.fisp.n_tr, "config: flip schedule length != n_tr");
  c.validate();
  return c;
}

} // namespace mrf
