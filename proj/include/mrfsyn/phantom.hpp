#pragma once

#include "sequence.hpp"

#include <array>
#include <optional>

namespace mrf {

enum class Tissue : int
{
  Background = 0,
  WhiteMatter = 1,
  GreyMatter = 2,
  Csf = 3,
  Fat = 4,
  Vessel = 5,
};

inline constexpr int kTissueCount = 6;

inline char const *tissue_name(Tissue t)
{
  switch (t) {
  case Tissue::Background: return "background";
  case Tissue::WhiteMatter: return "wm";
  case Tissue::GreyMatter: return "gm";
  case Tissue::Csf: return "csf";
  case Tissue::Fat: return "fat";
  case Tissue::Vessel: return "vessel";
  }
  return "unknown";
}

struct TissueEntry
{
  double t1_ms;
  double t2_ms;
  double pd;
};

/// Per-class relaxation times and PD. Background must have PD 0.
struct TissueTable
{
  std::array<TissueEntry, kTissueCount> entries{};

  /// 1.5T-typical literature values.
  static TissueTable defaults()
  {
    TissueTable t;
    t.entries[0] = {1000.0, 100.0, 0.0};
    t.entries[1] = {600.0, 80.0, 0.7};
    t.entries[2] = {950.0, 100.0, 0.85};
    t.entries[3] = {3600.0, 1800.0, 1.0};
    t.entries[4] = {260.0, 80.0, 0.9};
    t.entries[5] = {1400.0, 250.0, 0.9};
    return t;
  }

  TissueEntry const &operator[](Tissue t) const { return entries[static_cast<std::size_t>(t)]; }
  TissueEntry &operator[](Tissue t) { return entries[static_cast<std::size_t>(t)]; }

  TissueParams params(Tissue t) const
  {
    auto const &e = (*this)[t];
    return {e.t1_ms, e.t2_ms, e.pd};
  }

  void validate() const
  {
    for (auto const &e : entries) { TissueParams(e.t1_ms, e.t2_ms, e.pd); }
    require(entries[0].pd == 0.0, "TissueTable: background must have PD 0");
  }
};

/// Smooth quadratic field plus a Gaussian blob, in Hz, over normalized coordinates in (-1, 1).
struct B0Spec
{
  double offset_hz = 0.0;
  double gx_hz = 0.0;
  double gy_hz = 0.0;
  double gxx_hz = 0.0;
  double gyy_hz = 0.0;
  double gxy_hz = 0.0;
  double blob_peak_hz = 0.0;
  double blob_x = 0.0;
  double blob_y = -0.8;
  double blob_sigma = 0.1;

  static B0Spec none() { return {}; }

  /// 120 Hz blob over the frontal scalp.
  static B0Spec default_blob()
  {
    B0Spec b;
    b.blob_peak_hz = 120.0;
    return b;
  }

  bool is_zero() const
  {
    return offset_hz == 0.0 && gx_hz == 0.0 && gy_hz == 0.0 && gxx_hz == 0.0 && gyy_hz == 0.0 && gxy_hz == 0.0 &&
           blob_peak_hz == 0.0;
  }

  double at(double x, double y) const
  {
    double v = offset_hz + gx_hz * x + gy_hz * y + gxx_hz * x * x + gyy_hz * y * y + gxy_hz * x * y;
    if (blob_peak_hz != 0.0) {
      double const d2 = (x - blob_x) * (x - blob_x) + (y - blob_y) * (y - blob_y);
      v += blob_peak_hz * std::exp(-d2 / (2.0 * blob_sigma * blob_sigma));
    }
    return v;
  }
};

struct PhantomSlice
{
  Index h = 0;
  Index w = 0;
  RealImage t1;  // ms, 0 in background
  RealImage t2;  // ms, 0 in background
  RealImage pd;
  RealImage b0;  // Hz
  LabelImage labels;

  bool labeled(Index p) const { return labels.data[static_cast<std::size_t>(p)] != 0; }
};

namespace detail {

struct Ellipse
{
  double cx, cy, ax, ay, angle;

  bool contains(double x, double y) const
  {
    double const c = std::cos(angle), s = std::sin(angle);
    double const dx = x - cx, dy = y - cy;
    double const u = (c * dx + s * dy) / ax;
    double const v = (-s * dx + c * dy) / ay;
    return u * u + v * v <= 1.0;
  }
};

} // namespace detail

/// Nested-ellipse head: scalp fat, CSF rim, cortex, white matter, ventricles, a few vessels.
/// Only shape jitter and vessel placement depend on the seed.
inline PhantomSlice make_phantom(Index h, Index w, std::uint64_t seed, TissueTable const &table = TissueTable::defaults(),
                                 B0Spec const &b0 = B0Spec::none())
{
  require(h >= 32 && w >= 32, "make_phantom: dimensions must be at least 32 x 32");
  table.validate();
  Rng rng(seed);
  double const scale = 1.0 + rng.uniform(-0.04, 0.04);
  double const cx = rng.uniform(-0.02, 0.02);
  double const cy = rng.uniform(-0.02, 0.02);
  double const tilt = deg2rad(rng.uniform(-4.0, 4.0));
  auto shell = [&](double ax, double ay) { return detail::Ellipse{cx, cy, ax * scale, ay * scale, tilt}; };

  using detail::Ellipse;
  std::vector<std::pair<Ellipse, Tissue>> shapes = {
    {shell(0.78, 0.92), Tissue::Fat},
    {shell(0.71, 0.85), Tissue::Csf},
    {shell(0.67, 0.81), Tissue::GreyMatter},
    {shell(0.53 * (1.0 + rng.uniform(-0.05, 0.05)), 0.66 * (1.0 + rng.uniform(-0.05, 0.05))), Tissue::WhiteMatter},
  };
  double const vent_len = 0.22 * (1.0 + rng.uniform(-0.1, 0.1));
  double const vent_gap = 0.12 * (1.0 + rng.uniform(-0.1, 0.1));
  shapes.push_back({Ellipse{cx - vent_gap, cy - 0.05, 0.07 * scale, vent_len * scale, tilt + deg2rad(15.0)}, Tissue::Csf});
  shapes.push_back({Ellipse{cx + vent_gap, cy - 0.05, 0.07 * scale, vent_len * scale, tilt - deg2rad(15.0)}, Tissue::Csf});
  for (int v = 0; v < 3; ++v) {
    double const r = rng.uniform(0.25, 0.45);
    double const th = rng.uniform(0.0, 2.0 * kPi);
    double const rad = 0.035 * scale;
    shapes.push_back({Ellipse{cx + r * std::cos(th) * 0.8, cy + r * std::sin(th), rad, rad, 0.0}, Tissue::Vessel});
  }

  PhantomSlice ph;
  ph.h = h;
  ph.w = w;
  ph.t1 = RealImage(h, w);
  ph.t2 = RealImage(h, w);
  ph.pd = RealImage(h, w);
  ph.b0 = RealImage(h, w);
  ph.labels = LabelImage(h, w, 0);
  for (Index r = 0; r < h; ++r) {
    double const y = (static_cast<double>(r) + 0.5 - static_cast<double>(h) / 2.0) / (static_cast<double>(h) / 2.0);
    for (Index c = 0; c < w; ++c) {
      double const x = (static_cast<double>(c) + 0.5 - static_cast<double>(w) / 2.0) / (static_cast<double>(w) / 2.0);
      Tissue label = Tissue::Background;
      for (auto const &[shape, tissue] : shapes) {
        if (shape.contains(x, y)) { label = tissue; }
      }
      ph.labels(r, c) = static_cast<int>(label);
      if (label != Tissue::Background) {
        auto const &e = table[label];
        ph.t1(r, c) = e.t1_ms;
        ph.t2(r, c) = e.t2_ms;
        ph.pd(r, c) = e.pd;
      }
      ph.b0(r, c) = b0.at(x, y);
    }
  }
  return ph;
}

/// Tissue parameters at pixel p, or nothing for background.
inline std::optional<TissueParams> pixel_params(PhantomSlice const &ph, Index p)
{
  if (!ph.labeled(p)) { return std::nullopt; }
  auto const u = static_cast<std::size_t>(p);
  return TissueParams(ph.t1.data[u], ph.t2.data[u], ph.pd.data[u]);
}

} // namespace mrf
