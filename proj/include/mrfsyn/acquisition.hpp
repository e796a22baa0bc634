#pragma once

#include "epg.hpp"
#include "gridding.hpp"
#include "phantom.hpp"
#include "series.hpp"

#include <map>
#include <optional>

namespace mrf {

/// Archimedean spiral in-out readout. TR 0 holds `base`; TR i is base rotated by i * rotation_per_tr.
struct SpiralTrajectory
{
  Index matrix = 0;
  Index n_tr = 0;
  Index samples_per_tr = 0;
  Index turns = 0;
  double rotation_per_tr = deg2rad(9.0);
  double inout_rotation = kPi;
  double readout_ms = 6.0;
  std::vector<KPoint> base;
  std::vector<double> dwell_times; // ms from readout start
  std::vector<double> density;     // per-sample area weights, identical for every TR

  double kmax() const { return static_cast<double>(matrix) / 2.0; }

  std::vector<KPoint> coords(Index tr) const
  {
    require(tr >= 0 && tr < n_tr, "SpiralTrajectory: TR index out of range");
    double const a = rotation_per_tr * static_cast<double>(tr);
    double const c = std::cos(a), s = std::sin(a);
    std::vector<KPoint> out(base.size());
    for (std::size_t j = 0; j < base.size(); ++j) {
      out[j] = {c * base[j][0] - s * base[j][1], s * base[j][0] + c * base[j][1]};
    }
    return out;
  }

  /// Sample times relative to excitation, with the k-space centre crossing at te_ms.
  std::vector<double> sample_times_ms(double te_ms) const
  {
    std::vector<double> t(dwell_times.size());
    for (std::size_t j = 0; j < t.size(); ++j) { t[j] = te_ms - readout_ms / 2.0 + dwell_times[j]; }
    return t;
  }
};

/// Single-arm, single-shot spiral in-out. The in-arm runs from the edge to the centre; the out-arm
/// is the same arm turned by `inout_rotation`, so the two arms interleave.
inline SpiralTrajectory gen_spiral(Index matrix, Index n_tr, Index samples_per_tr, Index turns,
                                   double rotation_per_tr = deg2rad(9.0), double inout_rotation = kPi,
                                   double readout_ms = 6.0)
{
  require(matrix > 0 && n_tr > 0 && samples_per_tr > 0 && turns > 0, "gen_spiral: counts must be positive");
  require(matrix % 2 == 0, "gen_spiral: matrix must be even");
  require(readout_ms > 0.0, "gen_spiral: readout must be positive");
  SpiralTrajectory tr;
  tr.matrix = matrix;
  tr.n_tr = n_tr;
  tr.samples_per_tr = samples_per_tr;
  tr.turns = turns;
  tr.rotation_per_tr = rotation_per_tr;
  tr.inout_rotation = inout_rotation;
  tr.readout_ms = readout_ms;

  double const kmax = tr.kmax();
  double const T = static_cast<double>(turns);
  auto arm = [&](double tau) {
    double const ph = 2.0 * kPi * T * tau;
    return KPoint{kmax * tau * std::cos(ph), kmax * tau * std::sin(ph)};
  };
  // Area per sample from the Jacobian of the rotated-arm family k(tau, theta) = kmax tau e^{i(2 pi T tau + theta)}:
  // dA = kmax^2 tau dtau dtheta, with the two arms sharing theta in steps of pi. Proportional to |k|,
  // so consistent with the union of rotated TRs; the first sample sits at tau = dtau / 2, which caps
  // the DC weight at the area of the innermost disc.
  auto weight = [&](double tau, double dtau) { return kPi * kmax * kmax * tau * dtau; };

  Index const n_in = samples_per_tr / 2;
  Index const n_out = samples_per_tr - n_in;
  double const ci = std::cos(inout_rotation), si = std::sin(inout_rotation);
  for (Index j = 0; j < n_in; ++j) {
    double const tau = (static_cast<double>(n_in - 1 - j) + 0.5) / static_cast<double>(n_in);
    tr.base.push_back(arm(tau));
    tr.density.push_back(weight(tau, 1.0 / static_cast<double>(n_in)));
  }
  for (Index j = 0; j < n_out; ++j) {
    double const tau = (static_cast<double>(j) + 0.5) / static_cast<double>(n_out);
    auto const k = arm(tau);
    tr.base.push_back({ci * k[0] - si * k[1], si * k[0] + ci * k[1]});
    tr.density.push_back(weight(tau, 1.0 / static_cast<double>(n_out)));
  }
  double const dwell = readout_ms / static_cast<double>(samples_per_tr);
  for (Index j = 0; j < samples_per_tr; ++j) { tr.dwell_times.push_back((static_cast<double>(j) + 0.5) * dwell); }
  return tr;
}

/// Trajectory presets. `undersampled` is the desk default: 2 turns leave single-TR frames heavily
/// aliased; `dense` satisfies Nyquist at 64 x 64.
inline SpiralTrajectory spiral_preset(std::string const &name, Index matrix, Index n_tr)
{
  if (name == "undersampled") { return gen_spiral(matrix, n_tr, 1024, 2); }
  if (name == "dense") {
    Index const turns = std::max<Index>(1, matrix / 2);
    return gen_spiral(matrix, n_tr, 128 * matrix, turns);
  }
  throw InvalidArgument("unknown trajectory preset '" + name + "' (expected undersampled or dense)");
}

enum class SamplingMode
{
  Spiral,
  Cartesian,
};

/// Per-TR k-space samples, stored TR-major (n_tr x samples_per_tr).
struct KSpace
{
  SamplingMode mode = SamplingMode::Spiral;
  Index matrix = 0;
  Index n_tr = 0;
  Index samples_per_tr = 0;
  std::vector<Cx> data;
  FispMrf spec;
  double noise_sigma = 0.0;

  std::span<Cx const> tr(Index i) const
  {
    return {data.data() + i * samples_per_tr, static_cast<std::size_t>(samples_per_tr)};
  }
  std::span<Cx> tr(Index i) { return {data.data() + i * samples_per_tr, static_cast<std::size_t>(samples_per_tr)}; }
};

struct AcquireOptions
{
  std::optional<double> snr_db;
  bool model_b0 = false;
  Index time_segments = 8;
  std::uint64_t seed = 0;
};

namespace detail {

/// Image-domain series from per-pixel fingerprints. One simulation per distinct (T1, T2);
/// PD enters linearly.
inline MrfSeries fingerprint_series(PhantomSlice const &ph, FispMrf const &spec)
{
  validate(spec);
  MrfSeries s(spec.n_tr, ph.h, ph.w, spec);
  std::map<std::pair<double, double>, Fingerprint> cache;
  Index const np = ph.h * ph.w;
  for (Index p = 0; p < np; ++p) {
    auto const params = pixel_params(ph, p);
    if (!params || params->pd() == 0.0) { continue; }
    auto key = std::make_pair(params->t1_ms(), params->t2_ms());
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, simulate_fingerprint(TissueParams(key.first, key.second, 1.0), spec)).first;
    }
    for (Index ti = 0; ti < spec.n_tr; ++ti) {
      s.data[static_cast<std::size_t>(ti * np + p)] = params->pd() * it->second.samples[static_cast<std::size_t>(ti)];
    }
  }
  return s;
}

/// Centred unitary-free 2D DFT of an N x N image (pixel and frequency indices both in [-N/2, N/2)).
inline std::vector<Cx> centered_dft2(std::span<Cx const> in, Index n, bool inverse)
{
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  auto wrap = [n](Index i) { return ((i % n) + n) % n; };
  std::vector<Cx> grid(static_cast<std::size_t>(n * n));
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      grid[static_cast<std::size_t>(wrap(r - n / 2) * n + wrap(c - n / 2))] = in[static_cast<std::size_t>(r * n + c)];
    }
  }
  std::vector<Cx> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
  auto run = [&] { inverse ? fft.inv(b, a) : fft.fwd(b, a); };
  for (Index r = 0; r < n; ++r) {
    std::copy_n(grid.begin() + r * n, n, a.begin());
    run();
    std::copy_n(b.begin(), n, grid.begin() + r * n);
  }
  for (Index c = 0; c < n; ++c) {
    for (Index r = 0; r < n; ++r) { a[static_cast<std::size_t>(r)] = grid[static_cast<std::size_t>(r * n + c)]; }
    run();
    for (Index r = 0; r < n; ++r) { grid[static_cast<std::size_t>(r * n + c)] = b[static_cast<std::size_t>(r)]; }
  }
  std::vector<Cx> out(grid.size());
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      out[static_cast<std::size_t>(r * n + c)] = grid[static_cast<std::size_t>(wrap(r - n / 2) * n + wrap(c - n / 2))];
    }
  }
  return out;
}

inline void add_noise(KSpace &ks, std::vector<double> const &center_mask_weights, double snr_db, std::uint64_t seed)
{
  double sum = 0.0;
  double count = 0.0;
  for (Index i = 0; i < ks.n_tr; ++i) {
    auto const y = ks.tr(i);
    for (Index j = 0; j < ks.samples_per_tr; ++j) {
      double const m = center_mask_weights[static_cast<std::size_t>(j)];
      sum += m * std::abs(y[static_cast<std::size_t>(j)]);
      count += m;
    }
  }
  require(count > 0.0, "forward_acquire: no samples in the k-space centre to define SNR");
  double const mean = sum / count;
  ks.noise_sigma = mean / std::pow(10.0, snr_db / 20.0);
  Rng rng(seed);
  for (auto &v : ks.data) { v += rng.complex_normal(ks.noise_sigma); }
}

} // namespace detail

/// Spiral acquisition of the phantom's FISP-MRF series. Optional off-resonance via time-segmented
/// phase exp(-i 2 pi df t), hat-interpolated between segment centres, and optional complex noise
/// with sigma = mean |y| over |k| <= 2 divided by 10^(snr/20).
inline KSpace forward_acquire(PhantomSlice const &ph, FispMrf const &spec, SpiralTrajectory const &traj,
                              AcquireOptions const &opt = {})
{
  require(ph.h == ph.w && ph.h == traj.matrix, "forward_acquire: phantom dimensions differ from trajectory matrix");
  require(traj.n_tr == spec.n_tr, "forward_acquire: trajectory TR count differs from sequence");
  require(opt.time_segments >= 2, "forward_acquire: need at least two time segments");
  auto const series = detail::fingerprint_series(ph, spec);
  Index const n = traj.matrix;
  Index const ns = traj.samples_per_tr;

  KSpace ks;
  ks.mode = SamplingMode::Spiral;
  ks.matrix = n;
  ks.n_tr = traj.n_tr;
  ks.samples_per_tr = ns;
  ks.spec = spec;
  ks.data.assign(static_cast<std::size_t>(ks.n_tr * ns), Cx{});

  bool const b0 = opt.model_b0 && std::any_of(ph.b0.data.begin(), ph.b0.data.end(), [](double v) { return v != 0.0; });
  Index const L = opt.time_segments;
  std::vector<double> seg_t;
  std::vector<double> hat; // ns x L interpolation weights
  std::vector<CxImage> seg_phase;
  if (b0) {
    auto const t = traj.sample_times_ms(spec.te_ms);
    double const t0 = *std::min_element(t.begin(), t.end());
    double const t1 = *std::max_element(t.begin(), t.end());
    double const step = (t1 - t0) / static_cast<double>(L - 1);
    hat.assign(static_cast<std::size_t>(ns * L), 0.0);
    for (Index j = 0; j < ns; ++j) {
      double const u = step > 0.0 ? (t[static_cast<std::size_t>(j)] - t0) / step : 0.0;
      auto const l = std::min<Index>(L - 2, static_cast<Index>(std::floor(u)));
      double const f = u - static_cast<double>(l);
      hat[static_cast<std::size_t>(j * L + l)] = 1.0 - f;
      hat[static_cast<std::size_t>(j * L + l + 1)] = f;
    }
    for (Index l = 0; l < L; ++l) {
      double const tl = (t0 + step * static_cast<double>(l)) * 1e-3;
      CxImage ph_img(n, n);
      for (Index p = 0; p < n * n; ++p) {
        ph_img.data[static_cast<std::size_t>(p)] = std::polar(1.0, -2.0 * kPi * ph.b0.data[static_cast<std::size_t>(p)] * tl);
      }
      seg_phase.push_back(std::move(ph_img));
    }
  }

  parallel_for(traj.n_tr, [&](Index b, Index e) {
    std::vector<Cx> img(static_cast<std::size_t>(n * n));
    for (Index i = b; i < e; ++i) {
      auto const coords = traj.coords(i);
      GriddingOperator const op(n, coords);
      auto const frame = series.frame(i);
      auto out = ks.tr(i);
      if (!b0) {
        auto const y = op.forward(frame);
        std::copy(y.begin(), y.end(), out.begin());
        continue;
      }
      for (Index l = 0; l < L; ++l) {
        auto const &phase = seg_phase[static_cast<std::size_t>(l)].data;
        for (std::size_t p = 0; p < img.size(); ++p) { img[p] = frame[p] * phase[p]; }
        auto const y = op.forward(img);
        for (Index j = 0; j < ns; ++j) {
          double const wgt = hat[static_cast<std::size_t>(j * L + l)];
          if (wgt != 0.0) { out[static_cast<std::size_t>(j)] += wgt * y[static_cast<std::size_t>(j)]; }
        }
      }
    }
  });

  if (opt.snr_db) {
    std::vector<double> centre(static_cast<std::size_t>(ns));
    for (Index j = 0; j < ns; ++j) {
      auto const &k = traj.base[static_cast<std::size_t>(j)];
      centre[static_cast<std::size_t>(j)] = std::hypot(k[0], k[1]) <= 2.0 ? 1.0 : 0.0;
    }
    detail::add_noise(ks, centre, *opt.snr_db, opt.seed);
  }
  return ks;
}

/// Fully sampled Cartesian acquisition: every frame's exact DFT on the N x N grid. No B0 model.
inline KSpace cartesian_acquire(PhantomSlice const &ph, FispMrf const &spec, AcquireOptions const &opt = {})
{
  require(ph.h == ph.w && ph.h % 2 == 0, "cartesian_acquire: phantom must be square with even size");
  require(!opt.model_b0, "cartesian_acquire: off-resonance is only modelled for spiral sampling");
  auto const series = detail::fingerprint_series(ph, spec);
  Index const n = ph.h;
  KSpace ks;
  ks.mode = SamplingMode::Cartesian;
  ks.matrix = n;
  ks.n_tr = spec.n_tr;
  ks.samples_per_tr = n * n;
  ks.spec = spec;
  ks.data.assign(static_cast<std::size_t>(ks.n_tr * n * n), Cx{});
  parallel_for(ks.n_tr, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      auto const y = detail::centered_dft2(series.frame(i), n, false);
      std::copy(y.begin(), y.end(), ks.tr(i).begin());
    }
  });
  if (opt.snr_db) {
    std::vector<double> centre(static_cast<std::size_t>(n * n));
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) {
        centre[static_cast<std::size_t>(r * n + c)] = std::hypot(static_cast<double>(r - n / 2), static_cast<double>(c - n / 2)) <= 2.0;
      }
    }
    detail::add_noise(ks, centre, *opt.snr_db, opt.seed);
  }
  return ks;
}

/// Image-domain shortcut equal (to round-off) to cartesian_acquire followed by recon.
inline MrfSeries cartesian_series(PhantomSlice const &ph, FispMrf const &spec) { return detail::fingerprint_series(ph, spec); }

/// Density-compensated Kaiser-Bessel gridding per TR: x = A^H (w .* y) / N^2.
/// With density_compensation=false this is the plain adjoint A^H y.
inline MrfSeries grid_recon(KSpace const &ks, SpiralTrajectory const &traj, bool density_compensation = true)
{
  require(ks.mode == SamplingMode::Spiral, "grid_recon: k-space is Cartesian; use cartesian_recon");
  require(ks.n_tr == traj.n_tr && ks.samples_per_tr == traj.samples_per_tr && ks.matrix == traj.matrix,
          "grid_recon: samples do not align with trajectory");
  Index const n = traj.matrix;
  MrfSeries s(ks.n_tr, n, n, ks.spec);
  double const scale = 1.0 / static_cast<double>(n * n);
  parallel_for(ks.n_tr, [&](Index b, Index e) {
    std::vector<Cx> y(static_cast<std::size_t>(ks.samples_per_tr));
    for (Index i = b; i < e; ++i) {
      auto const coords = traj.coords(i);
      GriddingOperator const op(n, coords);
      auto const in = ks.tr(i);
      for (std::size_t j = 0; j < y.size(); ++j) { y[j] = density_compensation ? in[j] * traj.density[j] * scale : in[j]; }
      auto const img = op.adjoint(y);
      std::copy(img.data.begin(), img.data.end(), s.frame(i).begin());
    }
  });
  return s;
}

inline MrfSeries cartesian_recon(KSpace const &ks)
{
  require(ks.mode == SamplingMode::Cartesian && ks.samples_per_tr == ks.matrix * ks.matrix,
          "cartesian_recon: k-space is not a full Cartesian grid");
  Index const n = ks.matrix;
  MrfSeries s(ks.n_tr, n, n, ks.spec);
  double const scale = 1.0 / static_cast<double>(n * n);
  parallel_for(ks.n_tr, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) {
      auto img = detail::centered_dft2(ks.tr(i), n, true);
      for (auto &v : img) { v *= scale; }
      std::copy(img.begin(), img.end(), s.frame(i).begin());
    }
  });
  return s;
}

/// Image-domain complex Gaussian noise at the given SNR, with sigma = RMS of the nonzero
/// pixel-samples / 10^(snr/20). Returns sigma.
inline double add_series_noise(MrfSeries &series, double snr_db, std::uint64_t seed)
{
  double energy = 0.0;
  double count = 0.0;
  for (auto const &v : series.data) {
    if (v != Cx{}) {
      energy += std::norm(v);
      count += 1.0;
    }
  }
  require(count > 0.0, "add_series_noise: series is all zero");
  double const sigma = std::sqrt(energy / count) / std::pow(10.0, snr_db / 20.0);
  Rng rng(seed);
  for (auto &v : series.data) { v += rng.complex_normal(sigma); }
  return sigma;
}

/// |mean over time| per pixel.
inline RealImage time_average(MrfSeries const &series)
{
  require(series.t >= 1, "time_average: empty series");
  Index const np = series.pixels();
  std::vector<Cx> acc(static_cast<std::size_t>(np));
  for (Index ti = 0; ti < series.t; ++ti) {
    auto const f = series.frame(ti);
    for (std::size_t p = 0; p < acc.size(); ++p) { acc[p] += f[p]; }
  }
  RealImage out(series.h, series.w);
  for (std::size_t p = 0; p < acc.size(); ++p) { out.data[p] = std::abs(acc[p] / static_cast<double>(series.t)); }
  return out;
}

/// 95th percentile (nearest rank, ceil(0.95 n)) of |values| over every pixel.
inline double percentile95_magnitude(RealImage const &img)
{
  require(img.size() > 0, "normalize_95th: empty image");
  std::vector<double> mags(img.data.size());
  std::transform(img.data.begin(), img.data.end(), mags.begin(), [](double v) { return std::abs(v); });
  return percentile_nearest_rank(std::move(mags), 0.95);
}

/// Divides the image by its own 95th percentile in place; returns the divisor.
inline double normalize_95th(RealImage &img)
{
  double const s = percentile95_magnitude(img);
  require(s > 0.0, "normalize_95th: 95th percentile is zero; normalization undefined");
  for (auto &v : img.data) { v /= s; }
  return s;
}

/// Divides the series by the 95th percentile of its time-average magnitude in place; returns the
/// divisor and folds it into series.normalization.
inline double normalize_95th(MrfSeries &series)
{
  double const s = percentile95_magnitude(time_average(series));
  require(s > 0.0, "normalize_95th: 95th percentile is zero; normalization undefined");
  for (auto &v : series.data) { v /= s; }
  series.normalization *= s;
  return s;
}

} // namespace mrf
