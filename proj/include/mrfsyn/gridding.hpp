#pragma once

#include "core.hpp"

#include <unsupported/Eigen/FFT>

#include <array>

namespace mrf {

using KPoint = std::array<double, 2>; // (kx, ky) in cycles/FOV

struct GriddingParams
{
  double oversampling = 1.5;
  Index kernel_width = 4; // grid cells on the oversampled grid

  /// Beatty et al. minimal-oversampling choice of the Kaiser-Bessel shape parameter.
  double beta() const
  {
    double const w = static_cast<double>(kernel_width);
    return kPi * std::sqrt((w / oversampling) * (w / oversampling) * (oversampling - 0.5) * (oversampling - 0.5) - 0.8);
  }
};

inline Index oversampled_size(Index matrix, double oversampling)
{
  auto g = static_cast<Index>(std::ceil(oversampling * static_cast<double>(matrix)));
  return g + (g % 2);
}

/// Kaiser-Bessel kernel normalized to 1 at the centre; zero outside |u| <= width/2.
inline double kaiser_bessel(double u, double width, double beta)
{
  double const x = 2.0 * u / width;
  if (std::abs(x) > 1.0) { return 0.0; }
  return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

/// Continuous Fourier transform of kaiser_bessel at nu cycles per grid cell.
inline double kaiser_bessel_ft(double nu, double width, double beta)
{
  double const a = kPi * width * nu;
  double const s = beta * beta - a * a;
  double v;
  if (s > 1e-12) {
    double const r = std::sqrt(s);
    v = std::sinh(r) / r;
  } else if (s < -1e-12) {
    double const r = std::sqrt(-s);
    v = std::sin(r) / r;
  } else {
    v = 1.0;
  }
  return width * v / std::cyl_bessel_i(0.0, beta);
}

/// Non-uniform FFT on an N x N image with pixel coordinates r in [-N/2, N/2):
///   forward: y_j = sum_r x(r) exp(-i 2 pi k_j . r / N)
///   adjoint: exact conjugate transpose of the discrete forward operator.
/// Kaiser-Bessel interpolation on a sigma-oversampled grid with analytic deapodization.
class GriddingOperator
{
public:
  GriddingOperator(Index matrix, std::span<KPoint const> coords, GriddingParams params = {})
    : n_(matrix)
    , g_(oversampled_size(matrix, params.oversampling))
    , width_(params.kernel_width)
    , n_samples_(static_cast<Index>(coords.size()))
  {
    require(matrix >= 2 && matrix % 2 == 0, "GriddingOperator: matrix must be even and >= 2");
    require(params.oversampling >= 1.0 && params.kernel_width >= 2, "GriddingOperator: invalid kernel parameters");
    double const beta = params.beta();
    double const w = static_cast<double>(width_);
    deapod_.resize(static_cast<std::size_t>(n_));
    for (Index i = 0; i < n_; ++i) {
      double const r = static_cast<double>(i - n_ / 2);
      deapod_[static_cast<std::size_t>(i)] = kaiser_bessel_ft(r / static_cast<double>(g_), w, beta);
    }
    base_.resize(static_cast<std::size_t>(2 * n_samples_));
    weights_.resize(static_cast<std::size_t>(2 * width_ * n_samples_));
    double const to_grid = static_cast<double>(g_) / static_cast<double>(n_);
    Index const half_taps = (width_ - 1) / 2;
    for (Index j = 0; j < n_samples_; ++j) {
      for (int d = 0; d < 2; ++d) {
        double const k = coords[static_cast<std::size_t>(j)][static_cast<std::size_t>(d)];
        double const g = k * to_grid;
        auto const first = static_cast<Index>(std::floor(g)) - half_taps;
        base_[static_cast<std::size_t>(2 * j + d)] = first;
        for (Index t = 0; t < width_; ++t) {
          weights_[static_cast<std::size_t>((2 * j + d) * width_ + t)] =
            kaiser_bessel(g - static_cast<double>(first + t), w, beta);
        }
      }
    }
    fft_.SetFlag(Eigen::FFT<double>::Unscaled);
  }

  Index matrix() const { return n_; }
  Index grid_size() const { return g_; }
  Index samples() const { return n_samples_; }

  std::vector<Cx> forward(std::span<Cx const> image) const
  {
    require(static_cast<Index>(image.size()) == n_ * n_, "GriddingOperator::forward: image size mismatch");
    std::vector<Cx> grid(static_cast<std::size_t>(g_ * g_));
    for (Index iy = 0; iy < n_; ++iy) {
      for (Index ix = 0; ix < n_; ++ix) {
        double const d = deapod_[static_cast<std::size_t>(iy)] * deapod_[static_cast<std::size_t>(ix)];
        grid[static_cast<std::size_t>(wrap(iy - n_ / 2) * g_ + wrap(ix - n_ / 2))] =
          image[static_cast<std::size_t>(iy * n_ + ix)] / d;
      }
    }
    fft2(grid, false);
    std::vector<Cx> out(static_cast<std::size_t>(n_samples_));
    for (Index j = 0; j < n_samples_; ++j) {
      Cx acc{};
      visit_taps(j, [&](std::size_t cell, double wgt) { acc += wgt * grid[cell]; });
      out[static_cast<std::size_t>(j)] = acc;
    }
    return out;
  }

  std::vector<Cx> forward(CxImage const &image) const { return forward(image.span()); }

  CxImage adjoint(std::span<Cx const> samples) const
  {
    require(static_cast<Index>(samples.size()) == n_samples_, "GriddingOperator::adjoint: sample count mismatch");
    std::vector<Cx> grid(static_cast<std::size_t>(g_ * g_));
    for (Index j = 0; j < n_samples_; ++j) {
      Cx const y = samples[static_cast<std::size_t>(j)];
      visit_taps(j, [&](std::size_t cell, double wgt) { grid[cell] += wgt * y; });
    }
    fft2(grid, true);
    CxImage out(n_, n_);
    for (Index iy = 0; iy < n_; ++iy) {
      for (Index ix = 0; ix < n_; ++ix) {
        double const d = deapod_[static_cast<std::size_t>(iy)] * deapod_[static_cast<std::size_t>(ix)];
        out(iy, ix) = grid[static_cast<std::size_t>(wrap(iy - n_ / 2) * g_ + wrap(ix - n_ / 2))] / d;
      }
    }
    return out;
  }

private:
  Index wrap(Index i) const { return ((i % g_) + g_) % g_; }

  /// Calls fn(cell, weight) for each of the width x width taps of sample j. Grid cell for
  /// frequency index m lives at wrap(m) (DC at 0).
  template <typename Fn>
  void visit_taps(Index j, Fn &&fn) const
  {
    Index const by = base_[static_cast<std::size_t>(2 * j + 1)];
    Index const bx = base_[static_cast<std::size_t>(2 * j)];
    double const *wy = &weights_[static_cast<std::size_t>((2 * j + 1) * width_)];
    double const *wx = &weights_[static_cast<std::size_t>((2 * j) * width_)];
    for (Index ty = 0; ty < width_; ++ty) {
      if (wy[ty] == 0.0) { continue; }
      Index const row = wrap(by + ty) * g_;
      for (Index tx = 0; tx < width_; ++tx) {
        if (wx[tx] == 0.0) { continue; }
        fn(static_cast<std::size_t>(row + wrap(bx + tx)), wy[ty] * wx[tx]);
      }
    }
  }

  /// Unnormalized 2D DFT in place; inverse uses exp(+i...).
  void fft2(std::vector<Cx> &grid, bool inverse) const
  {
    std::vector<Cx> in(static_cast<std::size_t>(g_)), out(static_cast<std::size_t>(g_));
    auto transform = [&](std::vector<Cx> &src, std::vector<Cx> &dst) {
      if (inverse) {
        fft_.inv(dst, src);
      } else {
        fft_.fwd(dst, src);
      }
    };
    for (Index r = 0; r < g_; ++r) {
      std::copy_n(grid.begin() + r * g_, g_, in.begin());
      transform(in, out);
      std::copy_n(out.begin(), g_, grid.begin() + r * g_);
    }
    for (Index c = 0; c < g_; ++c) {
      for (Index r = 0; r < g_; ++r) { in[static_cast<std::size_t>(r)] = grid[static_cast<std::size_t>(r * g_ + c)]; }
      transform(in, out);
      for (Index r = 0; r < g_; ++r) { grid[static_cast<std::size_t>(r * g_ + c)] = out[static_cast<std::size_t>(r)]; }
    }
  }

  Index n_;
  Index g_;
  Index width_;
  Index n_samples_;
  std::vector<double> deapod_;
  std::vector<Index> base_;     // first tap index per (sample, dim)
  std::vector<double> weights_; // kernel weights per (sample, dim, tap)
  mutable Eigen::FFT<double> fft_;
};

/// Exact non-uniform DFT, O(samples x pixels). Reference for GriddingOperator.
inline std::vector<Cx> nudft(std::span<Cx const> image, Index matrix, std::span<KPoint const> coords)
{
  std::vector<Cx> out(coords.size());
  for (std::size_t j = 0; j < coords.size(); ++j) {
    Cx acc{};
    for (Index iy = 0; iy < matrix; ++iy) {
      for (Index ix = 0; ix < matrix; ++ix) {
        double const ph = -2.0 * kPi *
                          (coords[j][0] * static_cast<double>(ix - matrix / 2) + coords[j][1] * static_cast<double>(iy - matrix / 2)) /
                          static_cast<double>(matrix);
        acc += image[static_cast<std::size_t>(iy * matrix + ix)] * std::polar(1.0, ph);
      }
    }
    out[j] = acc;
  }
  return out;
}

} // namespace mrf
