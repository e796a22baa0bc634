#include "mrfsyn/acquisition.hpp"

#include <numeric>

#include <catch_amalgamated.hpp>

using namespace mrf;
using Catch::Approx;

namespace {

double rel_l2(std::span<Cx const> a, std::span<Cx const> b)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

Cx dot(std::span<Cx const> a, std::span<Cx const> b)
{
  Cx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) { acc += a[i] * std::conj(b[i]); }
  return acc;
}

std::vector<Cx> random_vector(Rng &rng, std::size_t n)
{
  std::vector<Cx> v(n);
  for (auto &x : v) { x = rng.complex_normal(1.0); }
  return v;
}

/// Smooth, band-limited-ish test object: a sum of wide Gaussians.
std::vector<Cx> smooth_object(Index n)
{
  std::vector<Cx> img(static_cast<std::size_t>(n * n));
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      double const y = static_cast<double>(r - n / 2) / static_cast<double>(n);
      double const x = static_cast<double>(c - n / 2) / static_cast<double>(n);
      double v = std::exp(-(x * x + y * y) / (2 * 0.12 * 0.12));
      v += 0.5 * std::exp(-((x - 0.15) * (x - 0.15) + (y + 0.1) * (y + 0.1)) / (2 * 0.05 * 0.05));
      img[static_cast<std::size_t>(r * n + c)] = Cx(v, 0.3 * v * x);
    }
  }
  return img;
}

FispMrf short_fisp(Index n_tr) { return default_fisp(n_tr, 11); }

} // namespace

TEST_CASE("spiral geometry", "[acquisition]")
{
  auto const traj = gen_spiral(64, 5, 1024, 2);
  REQUIRE(traj.base.size() == 1024);
  REQUIRE(traj.density.size() == 1024);
  for (auto const &k : traj.base) { CHECK(std::hypot(k[0], k[1]) <= 32.0 + 1e-12); }

  SECTION("successive TRs rotate by 9 degrees")
  {
    auto const a = traj.coords(0);
    auto const b = traj.coords(1);
    for (std::size_t j = 0; j < a.size(); j += 37) {
      double const d = std::arg(Cx(b[j][0], b[j][1]) / Cx(a[j][0], a[j][1]));
      CHECK(rad2deg(d) == Approx(9.0).margin(1e-9));
    }
  }
  SECTION("spiral-out starts opposite to where spiral-in ends")
  {
    auto const &in_last = traj.base[511];
    auto const &out_first = traj.base[512];
    double const d = std::arg(Cx(out_first[0], out_first[1]) / Cx(in_last[0], in_last[1]));
    CHECK(std::abs(std::abs(rad2deg(d)) - 180.0) < 1e-9);
  }
  SECTION("readout is centred on the echo time")
  {
    auto const t = traj.sample_times_ms(3.3);
    CHECK(t.front() > 3.3 - 3.0);
    CHECK(t.back() < 3.3 + 3.0);
    CHECK((t[511] + t[512]) / 2 == Approx(3.3));
  }
  SECTION("density weights cover the k-space disc")
  {
    double const area = std::accumulate(traj.density.begin(), traj.density.end(), 0.0);
    CHECK(area == Approx(kPi * 32 * 32).epsilon(0.05));
  }
  CHECK_THROWS_AS(gen_spiral(64, 0, 1024, 2), InvalidArgument);
  CHECK_THROWS_AS(gen_spiral(64, 1, 1024, 0), InvalidArgument);
}

TEST_CASE("gridding operator", "[acquisition][nufft]")
{
  Index const n = 32;
  Rng rng(5);
  std::vector<KPoint> coords(300);
  for (auto &k : coords) { k = {rng.uniform(-16, 16), rng.uniform(-16, 16)}; }
  GriddingOperator const op(n, coords);

  SECTION("forward agrees with the exact non-uniform DFT")
  {
    auto const x = random_vector(rng, static_cast<std::size_t>(n * n));
    CHECK(rel_l2(op.forward(x), nudft(x, n, coords)) < 5e-3);
  }
  SECTION("adjoint identity on random pairs")
  {
    for (int trial = 0; trial < 10; ++trial) {
      auto const x = random_vector(rng, static_cast<std::size_t>(n * n));
      auto const y = random_vector(rng, coords.size());
      Cx const lhs = dot(op.forward(x), y);
      Cx const rhs = dot(x, op.adjoint(y).data);
      CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
    }
  }
  SECTION("zero samples give a zero image")
  {
    for (auto const &v : op.adjoint(std::vector<Cx>(coords.size())).data) { CHECK(v == Cx{}); }
  }
  SECTION("centre-pixel delta has a flat spectrum")
  {
    std::vector<Cx> delta(static_cast<std::size_t>(n * n));
    delta[static_cast<std::size_t>((n / 2) * n + n / 2)] = 1.0;
    for (auto const &y : op.forward(delta)) { CHECK(std::abs(y) == Approx(1.0).epsilon(5e-3)); }
  }
}

TEST_CASE("dense spiral reconstructs a smooth object", "[acquisition]")
{
  Index const n = 64;
  auto const traj = spiral_preset("dense", n, 1);
  auto const truth = smooth_object(n);
  GriddingOperator const op(n, traj.coords(0));
  KSpace ks;
  ks.matrix = n;
  ks.n_tr = 1;
  ks.samples_per_tr = traj.samples_per_tr;
  ks.data = op.forward(truth);
  auto const rec = grid_recon(ks, traj);
  double const err = 100.0 * rel_l2(rec.frame(0), truth);
  INFO("nRMSE % = " << err);
  CHECK(err < 2.0);
}

TEST_CASE("forward_acquire", "[acquisition]")
{
  Index const n = 64;
  auto const spec = short_fisp(40);
  auto const traj = gen_spiral(n, spec.n_tr, 1024, 2);

  SECTION("zero phantom gives zero samples")
  {
    auto table = TissueTable::defaults();
    for (auto &e : table.entries) { e.pd = 0.0; }
    auto const ks = forward_acquire(make_phantom(n, n, 1, table), spec, traj);
    for (auto const &v : ks.data) { CHECK(v == Cx{}); }
  }
  SECTION("adjoint consistency of acquisition and plain gridding")
  {
    // With PD carried by a single pixel-independent tissue, the acquisition of frame i is A_i x_i.
    auto const ph = make_phantom(n, n, 3);
    auto const ks = forward_acquire(ph, spec, traj);
    auto const images = cartesian_series(ph, spec);
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      Index const i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(spec.n_tr)));
      auto const y = random_vector(rng, static_cast<std::size_t>(ks.samples_per_tr));
      KSpace probe = ks;
      std::fill(probe.data.begin(), probe.data.end(), Cx{});
      std::copy(y.begin(), y.end(), probe.tr(i).begin());
      auto const back = grid_recon(probe, traj, false);
      Cx const lhs = dot(ks.tr(i), y);
      Cx const rhs = dot(images.frame(i), back.frame(i));
      CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-3);
    }
  }
  SECTION("linearity in PD")
  {
    auto table = TissueTable::defaults();
    auto const a = forward_acquire(make_phantom(n, n, 4, table), spec, traj);
    for (auto &e : table.entries) { e.pd *= 2.0; }
    auto const b = forward_acquire(make_phantom(n, n, 4, table), spec, traj);
    for (std::size_t j = 0; j < a.data.size(); j += 101) { CHECK(std::abs(b.data[j] - 2.0 * a.data[j]) < 1e-12); }
  }
  SECTION("dimension mismatch")
  {
    CHECK_THROWS_AS(forward_acquire(make_phantom(48, 48, 1), spec, traj), InvalidArgument);
    CHECK_THROWS_AS(forward_acquire(make_phantom(n, n, 1), short_fisp(41), traj), InvalidArgument);
  }
  SECTION("noise is reproducible and scales with SNR")
  {
    auto const ph = make_phantom(n, n, 2);
    AcquireOptions o;
    o.snr_db = 30.0;
    o.seed = 99;
    auto const a = forward_acquire(ph, spec, traj, o);
    auto const b = forward_acquire(ph, spec, traj, o);
    CHECK(a.data == b.data);
    o.snr_db = 10.0;
    auto const c = forward_acquire(ph, spec, traj, o);
    CHECK(c.noise_sigma == Approx(a.noise_sigma * std::pow(10.0, 1.0)));
  }
}

TEST_CASE("off-resonance corrupts only near the field blob", "[acquisition][b0]")
{
  // Smooth single-tissue object, so edge ringing does not mask the locality of the field model.
  Index const n = 64;
  auto const spec = short_fisp(40);
  auto const traj = spiral_preset("dense", n, spec.n_tr);
  auto ph = make_phantom(n, n, 6, TissueTable::defaults(), B0Spec::default_blob());
  auto norm_xy = [n](Index i) { return (static_cast<double>(i) + 0.5 - static_cast<double>(n) / 2.0) / (static_cast<double>(n) / 2.0); };
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      double const x = norm_xy(c), y = norm_xy(r);
      ph.labels(r, c) = static_cast<int>(Tissue::GreyMatter);
      ph.t1(r, c) = 950;
      ph.t2(r, c) = 100;
      ph.pd(r, c) = std::exp(-(x * x + y * y) / (2 * 0.35 * 0.35));
    }
  }
  AcquireOptions with;
  with.model_b0 = true;
  auto const clean = time_average(grid_recon(forward_acquire(ph, spec, traj), traj));
  auto const blurred = time_average(grid_recon(forward_acquire(ph, spec, traj, with), traj));

  double near_num = 0, near_den = 0, far_num = 0, far_den = 0;
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      // Periodic distance to the blob centre: the reconstruction FOV wraps.
      double dy = std::abs(norm_xy(r) + 0.8);
      dy = std::min(dy, 2.0 - dy);
      double const d = std::hypot(norm_xy(c), dy);
      double const e = std::pow(clean(r, c) - blurred(r, c), 2);
      double const ref = clean(r, c) * clean(r, c);
      if (d < 0.2) {
        near_num += e;
        near_den += ref;
      } else if (d > 0.5) {
        far_num += e;
        far_den += ref;
      }
    }
  }
  double const near = std::sqrt(near_num / near_den);
  double const far = std::sqrt(far_num / far_den);
  INFO("near " << near << " far " << far);
  CHECK(near > 1e-2);
  CHECK(far < 2e-3);
  CHECK(near > 10 * far);

  SECTION("no field map, no change")
  {
    auto flat = ph;
    std::fill(flat.b0.data.begin(), flat.b0.data.end(), 0.0);
    CHECK(forward_acquire(flat, spec, traj, with).data == forward_acquire(flat, spec, traj).data);
  }
}

TEST_CASE("cartesian bypass is exact", "[acquisition]")
{
  auto const spec = short_fisp(20);
  auto const ph = make_phantom(32, 32, 5);
  auto const direct = cartesian_series(ph, spec);
  auto const rec = cartesian_recon(cartesian_acquire(ph, spec));
  CHECK(rel_l2(rec.data, direct.data) < 1e-13);
}

TEST_CASE("time average", "[acquisition]")
{
  SECTION("constant series")
  {
    MrfSeries s(7, 4, 4);
    std::fill(s.data.begin(), s.data.end(), Cx(0.6, -0.8));
    for (double v : time_average(s).data) { CHECK(v == Approx(1.0)); }
  }
  SECTION("global phase invariance")
  {
    Rng rng(3);
    MrfSeries s(5, 6, 6);
    for (auto &v : s.data) { v = rng.complex_normal(1.0); }
    MrfSeries r = s;
    for (auto &v : r.data) { v *= std::polar(1.0, 1.234); }
    auto const a = time_average(s), b = time_average(r);
    for (std::size_t i = 0; i < a.data.size(); ++i) { CHECK(a.data[i] == Approx(b.data[i]).epsilon(1e-12)); }
  }
  SECTION("averaging over rotated spirals suppresses aliasing")
  {
    Index const n = 64;
    auto const spec = default_fisp(); // full 500-TR schedule, 9 degree rotation per TR
    auto const traj = spiral_preset("undersampled", n, spec.n_tr);
    auto const ph = make_phantom(n, n, 12);
    auto const series = grid_recon(forward_acquire(ph, spec, traj), traj);
    auto outside_fraction = [&](std::span<Cx const> img) {
      double out = 0, all = 0;
      for (Index p = 0; p < n * n; ++p) {
        double const e = std::norm(img[static_cast<std::size_t>(p)]);
        all += e;
        if (!ph.labeled(p)) { out += e; }
      }
      return out / all;
    };
    auto const avg = time_average(series);
    std::vector<Cx> avg_cx(avg.data.begin(), avg.data.end());
    double const avg_frac = outside_fraction(avg_cx);
    double best_frame = 1.0;
    for (Index ti = 0; ti < series.t; ++ti) { best_frame = std::min(best_frame, outside_fraction(series.frame(ti))); }
    INFO("average " << avg_frac << " best frame " << best_frame);
    CHECK(avg_frac < 0.5 * best_frame);
  }
}

TEST_CASE("95th percentile normalization", "[acquisition]")
{
  SECTION("constant image")
  {
    RealImage img(5, 5, 3.5);
    CHECK(normalize_95th(img) == 3.5);
    for (double v : img.data) { CHECK(v == 1.0); }
  }
  SECTION("ramp 1..100 uses the 95th order statistic")
  {
    RealImage img(10, 10);
    std::vector<double> values(100);
    std::iota(values.begin(), values.end(), 1.0);
    seeded_shuffle(values, 4);
    img.data = values;
    CHECK(normalize_95th(img) == 95.0);
  }
  SECTION("scale equivariance and idempotence")
  {
    Rng rng(6);
    RealImage a(8, 8);
    for (auto &v : a.data) { v = rng.uniform(0, 5); }
    RealImage b = a;
    for (auto &v : b.data) { v *= 2.0; }
    double const sa = normalize_95th(a);
    double const sb = normalize_95th(b);
    CHECK(sb == Approx(2.0 * sa).epsilon(1e-15));
    for (std::size_t i = 0; i < a.data.size(); ++i) { CHECK(a.data[i] == Approx(b.data[i]).epsilon(1e-15)); }
    CHECK(normalize_95th(a) == Approx(1.0).margin(1e-9));
  }
  SECTION("series uses its time average")
  {
    auto const spec = short_fisp(30);
    auto s = cartesian_series(make_phantom(32, 32, 2), spec);
    normalize_95th(s);
    CHECK(percentile95_magnitude(time_average(s)) == Approx(1.0).margin(1e-6));
    CHECK(normalize_95th(s) == Approx(1.0).margin(1e-9));
  }
  SECTION("all-zero input is an error")
  {
    RealImage z(4, 4);
    CHECK_THROWS_AS(normalize_95th(z), InvalidArgument);
    MrfSeries s(3, 4, 4);
    CHECK_THROWS_AS(normalize_95th(s), InvalidArgument);
  }
}

TEST_CASE("rotated trajectory and rotated image give the rotated reconstruction", "[acquisition]")
{
  Index const n = 64;
  auto const traj = spiral_preset("dense", n, 11); // TR 10 is TR 0 turned by 90 degrees
  auto const obj = smooth_object(n);
  // Image turned by +90 degrees about the pixel centre (n/2, n/2): (x, y) -> (-y, x).
  std::vector<Cx> turned(obj.size());
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      Index const x = c - n / 2, y = r - n / 2;
      Index const xr = -y, yr = x;
      if (xr + n / 2 < 0 || xr + n / 2 >= n || yr + n / 2 < 0 || yr + n / 2 >= n) { continue; }
      turned[static_cast<std::size_t>((yr + n / 2) * n + xr + n / 2)] = obj[static_cast<std::size_t>(r * n + c)];
    }
  }
  GriddingOperator const a(n, traj.coords(0));
  GriddingOperator const b(n, traj.coords(10));
  KSpace ks;
  ks.matrix = n;
  ks.n_tr = 11;
  ks.samples_per_tr = traj.samples_per_tr;
  ks.data.assign(static_cast<std::size_t>(11 * traj.samples_per_tr), Cx{});
  auto const y0 = a.forward(obj);
  auto const y10 = b.forward(turned);
  std::copy(y0.begin(), y0.end(), ks.tr(0).begin());
  std::copy(y10.begin(), y10.end(), ks.tr(10).begin());
  auto const rec = grid_recon(ks, traj);
  std::vector<Cx> rec0_turned(obj.size());
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      Index const x = c - n / 2, y = r - n / 2;
      Index const xr = -y, yr = x;
      if (xr + n / 2 < 0 || xr + n / 2 >= n || yr + n / 2 < 0 || yr + n / 2 >= n) { continue; }
      rec0_turned[static_cast<std::size_t>((yr + n / 2) * n + xr + n / 2)] = rec.frame(0)[static_cast<std::size_t>(r * n + c)];
    }
  }
  CHECK(rel_l2(rec.frame(10), rec0_turned) < 0.01);
}
