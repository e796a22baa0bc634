#pragma once

#include "core.hpp"

#include <variant>

namespace mrf {

/// One voxel's relaxation times (ms) and proton density.
class TissueParams
{
public:
  TissueParams(double t1_ms, double t2_ms, double pd = 1.0)
    : t1_(t1_ms)
    , t2_(t2_ms)
    , pd_(pd)
  {
    require(std::isfinite(t1_ms) && t1_ms > 0.0, "TissueParams: T1 must be positive");
    require(std::isfinite(t2_ms) && t2_ms > 0.0, "TissueParams: T2 must be positive");
    require(std::isfinite(pd) && pd >= 0.0, "TissueParams: PD must be non-negative");
    require(t2_ms <= t1_ms, "TissueParams: T2 > T1 is not admissible");
  }

  double t1_ms() const { return t1_; }
  double t2_ms() const { return t2_; }
  double pd() const { return pd_; }
  TissueParams with_pd(double pd) const { return {t1_, t2_, pd}; }

  friend bool operator==(TissueParams const &, TissueParams const &) = default;

private:
  double t1_;
  double t2_;
  double pd_;
};

/// FISP MRF acquisition: variable flip angles, constant TE/TR, one spoiler shift per TR.
struct FispMrf
{
  Index n_tr = 500;
  double te_ms = 3.3;
  double tr_ms = 20.0;
  std::vector<double> flip_schedule; // rad, length n_tr
  bool inversion_prep = true;
  double inversion_delay_ms = 40.0;
  std::uint64_t schedule_seed = 0;
};

struct SpinEcho
{
  double te_ms = 15.0;
  double tr_ms = 450.0;
};

struct Tse
{
  double te_eff_ms = 110.0;
  double tr_ms = 2000.0;
  Index etl = 16;
  double esp_ms = 13.8;
  double refocus_rad = kPi;
  bool steady_state = false; // false: train starts from equilibrium
};

struct FlairTse
{
  double ti_ms = 2500.0;
  double te_eff_ms = 120.0;
  double tr_ms = 8500.0;
  Index etl = 41;
  double esp_ms = 5.0;
  double refocus_rad = kPi;
  bool steady_state = false;
};

using SequenceSpec = std::variant<FispMrf, SpinEcho, Tse, FlairTse>;

/// Two sinusoidal lobes (peaks 70 and 50 deg) over n_tr with seeded +-2 deg jitter, clamped at zero.
inline std::vector<double> default_flip_schedule(Index n_tr, std::uint64_t seed = 0)
{
  require(n_tr > 0, "flip schedule: n_tr must be positive");
  std::vector<double> flips(static_cast<std::size_t>(n_tr));
  Rng rng(seed);
  Index const half = std::max<Index>(1, n_tr / 2);
  for (Index i = 0; i < n_tr; ++i) {
    bool const first = i < half;
    double const peak = first ? 70.0 : 50.0;
    Index const len = first ? half : std::max<Index>(1, n_tr - half);
    double const pos = static_cast<double>(first ? i : i - half) + 0.5;
    double const lobe = peak * std::sin(kPi * pos / static_cast<double>(len));
    double const jitter = rng.uniform(-2.0, 2.0);
    flips[static_cast<std::size_t>(i)] = deg2rad(std::max(0.0, lobe + jitter));
  }
  return flips;
}

inline FispMrf default_fisp(Index n_tr = 500, std::uint64_t seed = 0)
{
  FispMrf s;
  s.n_tr = n_tr;
  s.schedule_seed = seed;
  s.flip_schedule = default_flip_schedule(n_tr, seed);
  return s;
}

/// T2w defaults: esp = 2 te_eff / etl rounded to 0.1 ms.
inline Tse default_t2w()
{
  Tse s;
  s.esp_ms = std::round(2.0 * s.te_eff_ms / static_cast<double>(s.etl) * 10.0) / 10.0;
  return s;
}

inline FlairTse default_flair() { return FlairTse{}; }

inline void validate(FispMrf const &s)
{
  require(s.n_tr >= 1, "FispMrf: n_tr must be >= 1");
  require(s.te_ms > 0.0 && s.tr_ms > 0.0, "FispMrf: times must be positive");
  require(s.te_ms < s.tr_ms, "FispMrf: TE must be shorter than TR");
  require(static_cast<Index>(s.flip_schedule.size()) == s.n_tr, "FispMrf: flip schedule length must equal n_tr");
  require(!s.inversion_prep || s.inversion_delay_ms >= 0.0, "FispMrf: inversion delay must be non-negative");
  for (double f : s.flip_schedule) { require(std::isfinite(f), "FispMrf: non-finite flip angle"); }
}

inline void validate(SpinEcho const &s)
{
  require(s.te_ms > 0.0 && s.tr_ms > 0.0, "SpinEcho: times must be positive");
  require(s.te_ms < s.tr_ms, "SpinEcho: TE must be shorter than TR");
}

/// Index (1-based) of the echo nearest te_eff.
inline Index effective_echo(double te_eff_ms, double esp_ms, Index etl)
{
  require(te_eff_ms <= static_cast<double>(etl) * esp_ms + 1e-9, "TSE: effective TE beyond the echo train");
  return std::clamp<Index>(static_cast<Index>(std::lround(te_eff_ms / esp_ms)), 1, etl);
}

inline void validate(Tse const &s)
{
  require(s.te_eff_ms > 0.0 && s.tr_ms > 0.0 && s.esp_ms > 0.0, "Tse: times must be positive");
  require(s.etl >= 1, "Tse: etl must be >= 1");
  require(s.te_eff_ms < s.tr_ms, "Tse: TE must be shorter than TR");
  require(static_cast<double>(s.etl) * s.esp_ms < s.tr_ms, "Tse: echo train longer than TR");
  require(std::isfinite(s.refocus_rad), "Tse: non-finite refocusing angle");
  effective_echo(s.te_eff_ms, s.esp_ms, s.etl);
}

inline void validate(FlairTse const &s)
{
  require(s.ti_ms > 0.0 && s.te_eff_ms > 0.0 && s.tr_ms > 0.0 && s.esp_ms > 0.0, "FlairTse: times must be positive");
  require(s.etl >= 1, "FlairTse: etl must be >= 1");
  require(s.te_eff_ms < s.tr_ms, "FlairTse: TE must be shorter than TR");
  require(s.ti_ms < s.tr_ms, "FlairTse: TI must be shorter than TR");
  require(s.ti_ms + static_cast<double>(s.etl) * s.esp_ms < s.tr_ms, "FlairTse: inversion plus echo train longer than TR");
  require(std::isfinite(s.refocus_rad), "FlairTse: non-finite refocusing angle");
  effective_echo(s.te_eff_ms, s.esp_ms, s.etl);
}

inline void validate(SequenceSpec const &s)
{
  std::visit([](auto const &v) { validate(v); }, s);
}

/// The three clinical contrasts synthesized per slice.
struct ContrastSpecs
{
  SpinEcho t1w{};
  Tse t2w = default_t2w();
  FlairTse flair = default_flair();
};

} // namespace mrf
