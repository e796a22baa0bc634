#pragma once

#include "core.hpp"

#include <json.hpp>

#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace mrf {

/// 100 * |x - ref|_2 / |ref|_2.
inline double nrmse(RealImage const &x, RealImage const &ref)
{
  require(x.same_shape(ref), "nrmse: images differ in shape");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double const d = x.data[i] - ref.data[i];
    num += d * d;
    den += ref.data[i] * ref.data[i];
  }
  require(den > 0.0, "nrmse: reference image is zero");
  return 100.0 * std::sqrt(num / den);
}

/// 20 log10(max(ref) / rmse). Identical images return +infinity.
inline double psnr(RealImage const &x, RealImage const &ref)
{
  require(x.same_shape(ref) && ref.size() > 0, "psnr: images differ in shape");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    double const d = x.data[i] - ref.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.data.size());
  if (mse == 0.0) { return std::numeric_limits<double>::infinity(); }
  double const peak = *std::max_element(ref.data.begin(), ref.data.end());
  return 20.0 * std::log10(peak / std::sqrt(mse));
}

struct SsimParams
{
  Index window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

namespace detail {

inline std::vector<double> gaussian_taps(Index n, double sigma)
{
  std::vector<double> g(static_cast<std::size_t>(n));
  double const c = static_cast<double>(n - 1) / 2.0;
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    double const d = static_cast<double>(i) - c;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += g[static_cast<std::size_t>(i)];
  }
  for (auto &v : g) { v /= sum; }
  return g;
}

/// Separable valid-mode filtering: output (h - n + 1) x (w - n + 1).
inline RealImage filter_valid(RealImage const &img, std::vector<double> const &g)
{
  auto const n = static_cast<Index>(g.size());
  Index const oh = img.h - n + 1, ow = img.w - n + 1;
  RealImage rows(img.h, ow);
  for (Index r = 0; r < img.h; ++r) {
    for (Index c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (Index k = 0; k < n; ++k) { acc += g[static_cast<std::size_t>(k)] * img(r, c + k); }
      rows(r, c) = acc;
    }
  }
  RealImage out(oh, ow);
  for (Index r = 0; r < oh; ++r) {
    for (Index c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (Index k = 0; k < n; ++k) { acc += g[static_cast<std::size_t>(k)] * rows(r + k, c); }
      out(r, c) = acc;
    }
  }
  return out;
}

} // namespace detail

/// Dynamic range for SSIM: span of the values of both images (equal to max(ref) - min(ref) when x
/// stays inside ref's range, and symmetric in its arguments). A flat pair falls back to 1.
inline double ssim_dynamic_range(RealImage const &x, RealImage const &ref)
{
  auto const [xa, xb] = std::minmax_element(x.data.begin(), x.data.end());
  auto const [ra, rb] = std::minmax_element(ref.data.begin(), ref.data.end());
  double const L = std::max(*xb, *rb) - std::min(*xa, *ra);
  return L > 0.0 ? L : 1.0;
}

/// Mean local SSIM over valid windows (Gaussian 11 x 11, sigma 1.5, K1 0.01, K2 0.03).
inline double ssim(RealImage const &x, RealImage const &ref, SsimParams const &prm = {})
{
  require(x.same_shape(ref), "ssim: images differ in shape");
  require(x.h >= prm.window && x.w >= prm.window, "ssim: image smaller than the window");
  double const L = ssim_dynamic_range(x, ref);
  double const c1 = (prm.k1 * L) * (prm.k1 * L);
  double const c2 = (prm.k2 * L) * (prm.k2 * L);
  auto const g = detail::gaussian_taps(prm.window, prm.sigma);

  RealImage xx = x, yy = ref, xy = x;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    xx.data[i] = x.data[i] * x.data[i];
    yy.data[i] = ref.data[i] * ref.data[i];
    xy.data[i] = x.data[i] * ref.data[i];
  }
  auto const mx = detail::filter_valid(x, g);
  auto const my = detail::filter_valid(ref, g);
  auto const sxx = detail::filter_valid(xx, g);
  auto const syy = detail::filter_valid(yy, g);
  auto const sxy = detail::filter_valid(xy, g);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.data.size(); ++i) {
    double const ux = mx.data[i], uy = my.data[i];
    double const vx = sxx.data[i] - ux * ux;
    double const vy = syy.data[i] - uy * uy;
    double const cxy = sxy.data[i] - ux * uy;
    total += ((2 * ux * uy + c1) * (2 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.data.size());
}

struct ContrastMetrics
{
  double nrmse_percent = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct Summary
{
  double mean = 0.0;
  double std = 0.0;
  Index n = 0;
};

/// Sample of finite values; +infinity PSNR sentinels are excluded.
inline Summary summarize(std::vector<double> const &v)
{
  Summary s;
  double sum = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++s.n;
    }
  }
  if (s.n == 0) { return s; }
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : v) {
    if (std::isfinite(x)) { ss += (x - s.mean) * (x - s.mean); }
  }
  s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

/// Per-slice, per-contrast metrics for one method, with Table-1-style mean +/- std output.
struct MetricReport
{
  std::string method = "simulation";
  std::vector<std::string> contrasts = {"T1w", "T2w", "FLAIR"};
  std::vector<std::vector<ContrastMetrics>> slices; // slices x contrasts

  void add_slice(std::vector<ContrastMetrics> row)
  {
    require(row.size() == contrasts.size(), "MetricReport: contrast count mismatch");
    slices.push_back(std::move(row));
  }

  Summary summary(std::size_t contrast, double ContrastMetrics::*field) const
  {
    std::vector<double> v;
    for (auto const &s : slices) { v.push_back(s[contrast].*field); }
    return summarize(v);
  }

  nlohmann::json to_json() const
  {
    auto num = [](double v) -> nlohmann::json {
      if (std::isfinite(v)) { return v; }
      return v > 0 ? "inf" : "-inf";
    };
    nlohmann::json j;
    j["method"] = method;
    j["n_slices"] = slices.size();
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
      nlohmann::json cj;
      for (auto const &[name, field] : metric_fields()) {
        auto const s = summary(c, field);
        cj[name] = {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
        nlohmann::json per = nlohmann::json::array();
        for (auto const &sl : slices) { per.push_back(num(sl[c].*field)); }
        cj[name]["per_slice"] = per;
      }
      j["contrasts"][contrasts[c]] = cj;
    }
    return j;
  }

  std::string to_text() const
  {
    std::ostringstream os;
    os << std::left << std::setw(14) << "method" << std::setw(9) << "contrast" << std::setw(20) << "nRMSE (%)"
       << std::setw(20) << "PSNR (dB)" << "SSIM\n";
    for (std::size_t c = 0; c < contrasts.size(); ++c) {
      os << std::setw(14) << method << std::setw(9) << contrasts[c];
      for (auto const &[name, field] : metric_fields()) {
        auto const s = summary(c, field);
        std::ostringstream cell;
        int const digits = field == &ContrastMetrics::ssim ? 4 : 2;
        if (s.n == 0) {
          cell << "inf";
        } else {
          cell << std::fixed << std::setprecision(digits) << s.mean << " +/- " << s.std;
        }
        os << std::setw(20) << cell.str();
      }
      os << "\n";
    }
    return os.str();
  }

private:
  static std::vector<std::pair<char const *, double ContrastMetrics::*>> metric_fields()
  {
    return {{"nrmse_percent", &ContrastMetrics::nrmse_percent},
            {"psnr_db", &ContrastMetrics::psnr_db},
            {"ssim", &ContrastMetrics::ssim}};
  }
};

inline ContrastMetrics compare_images(RealImage const &x, RealImage const &ref)
{
  return {nrmse(x, ref), psnr(x, ref), ssim(x, ref)};
}

} // namespace mrf
