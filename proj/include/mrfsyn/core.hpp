#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mrf {

using Cx = std::complex<double>;
using Index = std::ptrdiff_t;

inline constexpr double kPi = std::numbers::pi;

/// Raised for violated preconditions on user-supplied values.
class InvalidArgument : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, std::string const &what)
{
  if (!cond) { throw InvalidArgument(what); }
}

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Row-major 2D image.
template <typename T>
struct Image
{
  Index h = 0;
  Index w = 0;
  std::vector<T> data;

  Image() = default;
  Image(Index rows, Index cols, T fill = T{})
    : h(rows)
    , w(cols)
    , data(static_cast<std::size_t>(rows * cols), fill)
  {
  }

  T &operator()(Index r, Index c) { return data[static_cast<std::size_t>(r * w + c)]; }
  T const &operator()(Index r, Index c) const { return data[static_cast<std::size_t>(r * w + c)]; }
  Index size() const { return h * w; }
  bool same_shape(Image const &o) const { return h == o.h && w == o.w; }

  std::span<T> span() { return data; }
  std::span<T const> span() const { return data; }

  friend bool operator==(Image const &, Image const &) = default;
};

using RealImage = Image<double>;
using CxImage = Image<Cx>;
using LabelImage = Image<int>;

template <typename T>
Image<T> crop(Image<T> const &img, Index r0, Index c0, Index rows, Index cols)
{
  require(r0 >= 0 && c0 >= 0 && r0 + rows <= img.h && c0 + cols <= img.w, "crop: window outside image");
  Image<T> out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) { out(r, c) = img(r0 + r, c0 + c); }
  }
  return out;
}

/// Nearest-rank percentile: sorted[ceil(p*n) - 1] (1-based rank ceil(p*n)).
inline double percentile_nearest_rank(std::vector<double> values, double p)
{
  require(!values.empty(), "percentile of empty set");
  require(p > 0.0 && p <= 1.0, "percentile must lie in (0, 1]");
  auto const n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<Index>(rank - 1), values.end());
  return values[rank - 1];
}

/// splitmix64-seeded xoshiro256**. Bit-stable across platforms, unlike std distributions.
class Rng
{
public:
  explicit Rng(std::uint64_t seed)
  {
    for (auto &s : state_) {
      seed += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  std::uint64_t next()
  {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    std::uint64_t const result = rotl(state_[1] * 5, 7) * 9;
    std::uint64_t const t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  /// Standard normal via Box-Muller (no cached second value, so draws are order-independent).
  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0) { u1 = uniform(); }
    double const u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Circular complex Gaussian with E|z|^2 = sigma^2.
  Cx complex_normal(double sigma)
  {
    double const s = sigma / std::sqrt(2.0);
    double const re = normal();
    double const im = normal();
    return {s * re, s * im};
  }

private:
  std::uint64_t state_[4];
};

template <typename T>
void seeded_shuffle(std::vector<T> &v, std::uint64_t seed)
{
  Rng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    auto const j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

/// Worker count; MRFSYN_THREADS overrides hardware concurrency.
inline int thread_count()
{
  if (char const *env = std::getenv("MRFSYN_THREADS")) {
    int const n = std::atoi(env);
    if (n > 0) { return n; }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks write disjoint outputs.
inline void parallel_for(Index n, std::function<void(Index, Index)> const &fn, Index min_chunk = 1)
{
  if (n <= 0) { return; }
  Index const workers = std::min<Index>(thread_count(), std::max<Index>(1, n / std::max<Index>(1, min_chunk)));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr failure;
  std::mutex failure_lock;
  Index const step = (n + workers - 1) / workers;
  for (Index b = 0; b < n; b += step) {
    pool.emplace_back([&, b, e = std::min(n, b + step)] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard const lock(failure_lock);
        if (!failure) { failure = std::current_exception(); }
      }
    });
  }
  for (auto &t : pool) { t.join(); }
  if (failure) { std::rethrow_exception(failure); }
}

/// 64-bit FNV-1a over raw bytes; content digest for artifacts.
class Fnv1a
{
public:
  Fnv1a &add(void const *bytes, std::size_t n)
  {
    auto const *p = static_cast<unsigned char const *>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  template <typename T>
  Fnv1a &add_values(std::span<T const> v)
  {
    return add(v.data(), v.size_bytes());
  }
  Fnv1a &add_string(std::string const &s) { return add(s.data(), s.size()); }
  std::uint64_t value() const { return h_; }
  std::string hex() const
  {
    static char const digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) { out[static_cast<std::size_t>(15 - i)] = digits[(h_ >> (4 * i)) & 0xF]; }
    return out;
  }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

} // namespace mrf
