#pragma once

#include "sequence.hpp"

namespace mrf {

/// Complex image time series, stored frame-major (t x h x w).
struct MrfSeries
{
  Index t = 0;
  Index h = 0;
  Index w = 0;
  std::vector<Cx> data;
  FispMrf spec;
  double normalization = 1.0;

  MrfSeries() = default;
  MrfSeries(Index frames, Index rows, Index cols, FispMrf s = {})
    : t(frames)
    , h(rows)
    , w(cols)
    , data(static_cast<std::size_t>(frames * rows * cols))
    , spec(std::move(s))
  {
  }

  Index pixels() const { return h * w; }
  Cx &at(Index ti, Index r, Index c) { return data[static_cast<std::size_t>((ti * h + r) * w + c)]; }
  Cx const &at(Index ti, Index r, Index c) const { return data[static_cast<std::size_t>((ti * h + r) * w + c)]; }
  std::span<Cx> frame(Index ti) { return {data.data() + ti * pixels(), static_cast<std::size_t>(pixels())}; }
  std::span<Cx const> frame(Index ti) const { return {data.data() + ti * pixels(), static_cast<std::size_t>(pixels())}; }

  CxImage frame_image(Index ti) const
  {
    CxImage img(h, w);
    std::copy_n(data.begin() + ti * pixels(), pixels(), img.data.begin());
    return img;
  }

  /// Time series of pixel p = r * w + c.
  std::vector<Cx> pixel(Index p) const
  {
    std::vector<Cx> s(static_cast<std::size_t>(t));
    for (Index ti = 0; ti < t; ++ti) { s[static_cast<std::size_t>(ti)] = data[static_cast<std::size_t>(ti * pixels() + p)]; }
    return s;
  }
};

} // namespace mrf
