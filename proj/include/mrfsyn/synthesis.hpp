#pragma once

#include "dictionary.hpp"
#include "epg.hpp"
#include "phantom.hpp"

#include <chrono>
#include <map>

namespace mrf {

enum class Provenance
{
  Simulation,
  GroundTruth,
  Network,
};

inline char const *provenance_name(Provenance p)
{
  switch (p) {
  case Provenance::Simulation: return "simulation";
  case Provenance::GroundTruth: return "ground_truth";
  case Provenance::Network: return "network";
  }
  return "unknown";
}

inline Provenance parse_provenance(std::string const &s)
{
  if (s == "simulation") { return Provenance::Simulation; }
  if (s == "ground_truth") { return Provenance::GroundTruth; }
  if (s == "network") { return Provenance::Network; }
  throw InvalidArgument("unknown provenance '" + s + "'");
}

struct ContrastSet
{
  RealImage t1w;
  RealImage t2w;
  RealImage flair;
  ContrastSpecs specs;
  Provenance provenance = Provenance::Simulation;

  std::array<RealImage const *, 3> images() const { return {&t1w, &t2w, &flair}; }
  std::array<RealImage *, 3> images() { return {&t1w, &t2w, &flair}; }
};

inline constexpr std::array<char const *, 3> kContrastNames = {"T1w", "T2w", "FLAIR"};

struct ContrastValues
{
  double t1w = 0.0;
  double t2w = 0.0;
  double flair = 0.0;
};

inline ContrastValues simulate_contrasts(TissueParams const &p, ContrastSpecs const &specs)
{
  return {simulate_se_closed_form(p, specs.t1w), simulate_tse(p, specs.t2w), simulate_flair(p, specs.flair)};
}

/// Pixelwise contrast simulation. A pixel is null (0 in every contrast) when its PD is 0 or its
/// T1/T2 entry is 0 (the matcher's null flag). One simulation per distinct (T1, T2); PD scales it.
inline ContrastSet synthesize_from_maps(RealImage const &t1, RealImage const &t2, RealImage const &pd,
                                        ContrastSpecs const &specs, Provenance provenance = Provenance::Simulation)
{
  require(t1.same_shape(t2) && t1.same_shape(pd), "synthesize_from_maps: maps differ in shape");
  validate(specs.t1w);
  validate(specs.t2w);
  validate(specs.flair);
  ContrastSet out{RealImage(t1.h, t1.w), RealImage(t1.h, t1.w), RealImage(t1.h, t1.w), specs, provenance};

  std::map<std::pair<double, double>, ContrastValues> cache;
  auto is_null = [&](std::size_t u) { return pd.data[u] == 0.0 || t1.data[u] == 0.0 || t2.data[u] == 0.0; };
  for (std::size_t u = 0; u < t1.data.size(); ++u) {
    if (is_null(u)) { continue; }
    require(pd.data[u] > 0.0, "synthesize_from_maps: negative PD");
    cache.emplace(std::make_pair(t1.data[u], t2.data[u]), ContrastValues{});
  }
  std::vector<std::map<std::pair<double, double>, ContrastValues>::iterator> slots;
  for (auto it = cache.begin(); it != cache.end(); ++it) { slots.push_back(it); }
  parallel_for(static_cast<Index>(slots.size()), [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      auto &[key, v] = *slots[static_cast<std::size_t>(i)];
      v = simulate_contrasts(TissueParams(key.first, key.second, 1.0), specs);
    }
  });

  for (std::size_t u = 0; u < t1.data.size(); ++u) {
    if (is_null(u)) { continue; }
    auto const &v = cache.at({t1.data[u], t2.data[u]});
    out.t1w.data[u] = pd.data[u] * v.t1w;
    out.t2w.data[u] = pd.data[u] * v.t2w;
    out.flair.data[u] = pd.data[u] * v.flair;
  }
  return out;
}

/// Contrasts of the phantom's true parameter maps; the synthetic stand-in for acquired images.
inline ContrastSet ground_truth_contrasts(PhantomSlice const &ph, ContrastSpecs const &specs = {})
{
  return synthesize_from_maps(ph.t1, ph.t2, ph.pd, specs, Provenance::GroundTruth);
}

struct PipelineTiming
{
  double match_seconds = 0.0;
  double synthesis_seconds = 0.0;
};

struct PipelineResult
{
  ContrastSet contrasts;
  MatchMaps maps;
  PipelineTiming timing;
};

/// Dictionary matching followed by contrast simulation. PD is restored to the series' original
/// scale (series.normalization), so contrasts are comparable with ground_truth_contrasts.
inline PipelineResult simulation_pipeline(MrfSeries const &series, Dictionary const &dict, ContrastSpecs const &specs = {})
{
  using Clock = std::chrono::steady_clock;
  PipelineResult r;
  auto const t0 = Clock::now();
  r.maps = match_image(series, dict);
  auto const t1 = Clock::now();
  RealImage pd = r.maps.pd;
  for (auto &v : pd.data) { v *= series.normalization; }
  r.contrasts = synthesize_from_maps(r.maps.t1, r.maps.t2, pd, specs, Provenance::Simulation);
  auto const t2 = Clock::now();
  r.timing.match_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.timing.synthesis_seconds = std::chrono::duration<double>(t2 - t1).count();
  return r;
}

/// 8-bit grayscale: round(255 * clamp(v / scale, 0, 1)).
inline std::vector<std::uint8_t> to_u8(RealImage const &img, double scale)
{
  require(scale > 0.0, "to_u8: scale must be positive");
  std::vector<std::uint8_t> out(img.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double const v = std::clamp(img.data[i] / scale, 0.0, 1.0);
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  return out;
}

} // namespace mrf
