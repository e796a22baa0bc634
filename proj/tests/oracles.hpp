#pragma once

// Independent reference implementations used by the unit tests and the acceptance run.

#include "mrfsyn/core.hpp"
#include "mrfsyn/epg.hpp"

#include <cmath>
#include <vector>

namespace oracle {

using namespace mrf;

inline double rel_l2(std::vector<Cx> const &a, std::vector<Cx> const &b)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

inline EpgState random_epg_state(Rng &rng, Index K, bool clear_top)
{
  EpgState st(K);
  auto &fp = st.mutable_f_plus();
  auto &fm = st.mutable_f_minus();
  auto &z = st.mutable_z();
  for (Index k = 0; k <= K; ++k) {
    auto const u = static_cast<std::size_t>(k);
    fp[u] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    fm[u] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    z[u] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
  }
  fm[0] = std::conj(fp[0]);
  z[0] = z[0].real();
  if (clear_top) {
    fp[static_cast<std::size_t>(K)] = {};
    fm[static_cast<std::size_t>(K)] = {};
  }
  return st;
}

/// Spin-echo signal via expm1, written independently of the library's closed form.
inline double spin_echo_expm1(double pd, double t1, double t2, double te, double tr)
{
  return pd * -std::expm1(-(tr - te) / t1) * std::exp(-te / t2);
}

/// Direct sliding-window SSIM: explicit 2D Gaussian weights and two-pass weighted moments.
inline double ssim_sliding_window(RealImage const &x, RealImage const &y)
{
  Index const n = 11;
  double const sigma = 1.5;
  std::vector<double> w(static_cast<std::size_t>(n * n));
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double const di = static_cast<double>(i - 5), dj = static_cast<double>(j - 5);
      w[static_cast<std::size_t>(i * n + j)] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += w[static_cast<std::size_t>(i * n + j)];
    }
  }
  for (auto &v : w) { v /= total; }
  double lo = INFINITY, hi = -INFINITY;
  for (auto const *img : {&x, &y}) {
    for (double v : img->data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double const L = hi - lo;
  double const c1 = std::pow(0.01 * L, 2), c2 = std::pow(0.03 * L, 2);
  double sum = 0.0;
  Index count = 0;
  for (Index r = 0; r + n <= x.h; ++r) {
    for (Index c = 0; c + n <= x.w; ++c) {
      double mx = 0, my = 0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          double const wt = w[static_cast<std::size_t>(i * n + j)];
          mx += wt * x(r + i, c + j);
          my += wt * y(r + i, c + j);
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          double const wt = w[static_cast<std::size_t>(i * n + j)];
          double const dx = x(r + i, c + j) - mx, dy = y(r + i, c + j) - my;
          vx += wt * dx * dx;
          vy += wt * dy * dy;
          cxy += wt * dx * dy;
        }
      }
      sum += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

} // namespace oracle
