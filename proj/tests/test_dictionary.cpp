#include "mrfsyn/acquisition.hpp"
#include "mrfsyn/dictionary.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>

using namespace mrf;
using Catch::Approx;

namespace {

FispMrf desk_spec() { return default_fisp(200, 3); }

Dictionary const &desk_dict()
{
  static Dictionary const d = build_dictionary(ParamGrid::desk(), desk_spec());
  return d;
}

std::size_t count_admissible(std::vector<double> const &t1, std::vector<double> const &t2)
{
  std::size_t n = 0;
  for (double a : t1) {
    for (double b : t2) { n += b <= a ? 1 : 0; }
  }
  return n;
}

} // namespace

TEST_CASE("param grid", "[dictionary]")
{
  auto const desk = ParamGrid::desk();
  CHECK(desk.t1_values_ms.size() == 60);
  CHECK(desk.t2_values_ms.size() == 50);
  CHECK(desk.t1_values_ms.front() == 4.0);
  CHECK(desk.t1_values_ms.back() == 4000.0);
  CHECK(desk.t2_values_ms.front() == 2.0);
  CHECK(desk.t2_values_ms.back() == 2000.0);
  CHECK(desk.pairs().size() == count_admissible(desk.t1_values_ms, desk.t2_values_ms));

  auto const full = ParamGrid::full();
  CHECK(full.pairs().size() == count_admissible(full.t1_values_ms, full.t2_values_ms));
  CHECK(full.pairs().size() == 22030);

  ParamGrid bad{{10, 5}, {1}, true};
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);

  SECTION("snap lands on an admissible grid point")
  {
    auto const s = desk.snap(TissueParams(700, 90, 0.4));
    CHECK(std::find(desk.t1_values_ms.begin(), desk.t1_values_ms.end(), s.t1_ms()) != desk.t1_values_ms.end());
    CHECK(std::find(desk.t2_values_ms.begin(), desk.t2_values_ms.end(), s.t2_ms()) != desk.t2_values_ms.end());
    CHECK(s.pd() == 0.4);
    CHECK(desk.step_distance(s.t1_ms(), s.t2_ms(), s.t1_ms(), s.t2_ms()) == 0);
  }
}

TEST_CASE("build dictionary", "[dictionary]")
{
  SECTION("small grid counts")
  {
    auto const d = build_dictionary(ParamGrid{{500, 1000}, {50, 100}, true}, desk_spec());
    CHECK(d.n_atoms == 4);
    CHECK(d.params.size() == 4);
    CHECK_THROWS_AS(build_dictionary(ParamGrid{{50}, {100}, true}, desk_spec()), InvalidArgument);
    // T2 > T1 cannot form a TissueParams, so switching the exclusion off does not admit it.
    CHECK_THROWS_AS(build_dictionary(ParamGrid{{50}, {100}, false}, desk_spec()), InvalidArgument);
    CHECK(build_dictionary(ParamGrid{{50}, {50}, false}, desk_spec()).n_atoms == 1);
  }
  SECTION("desk atoms are unit norm")
  {
    auto const &d = desk_dict();
    REQUIRE(d.n_atoms == static_cast<Index>(count_admissible(d.grid.t1_values_ms, d.grid.t2_values_ms)));
    for (Index a = 0; a < d.n_atoms; ++a) { CHECK(std::abs(l2_norm(d.row(a)) - 1.0) < 1e-9); }
  }
  SECTION("deterministic and independent of thread count")
  {
    ParamGrid const g{ParamGrid::log_spaced(7, 50, 3000), ParamGrid::log_spaced(6, 10, 1000), true};
    ::setenv("MRFSYN_THREADS", "1", 1);
    auto const a = build_dictionary(g, desk_spec());
    ::setenv("MRFSYN_THREADS", "4", 1);
    auto const b = build_dictionary(g, desk_spec());
    ::unsetenv("MRFSYN_THREADS");
    CHECK(a.atoms == b.atoms);
    CHECK(a.manifest_hash == b.manifest_hash);
    CHECK(a.manifest_hash == a.compute_hash());
  }
}

TEST_CASE("match", "[dictionary]")
{
  auto const &d = desk_dict();

  SECTION("every atom matches itself; blocked matcher equals the naive scan")
  {
    Eigen::MatrixXcd signals(d.length, d.n_atoms);
    for (Index a = 0; a < d.n_atoms; ++a) {
      for (Index t = 0; t < d.length; ++t) { signals(t, a) = d.row(a)[static_cast<std::size_t>(t)]; }
    }
    std::vector<MatchResult> fast(static_cast<std::size_t>(d.n_atoms));
    BlockMatcher(d).run(signals, fast);
    Index self = 0, agree = 0;
    for (Index a = 0; a < d.n_atoms; ++a) {
      auto const &r = fast[static_cast<std::size_t>(a)];
      self += r.atom_index == a;
      agree += r.atom_index == match_naive(d.row(a), d).atom_index;
      if (r.atom_index == a) {
        CHECK(r.similarity == Approx(1.0).margin(1e-12));
        CHECK(r.pd == Approx(1.0).margin(1e-12));
      }
    }
    CHECK(self == d.n_atoms);
    CHECK(agree == d.n_atoms);
  }
  SECTION("scale and phase invariance")
  {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      auto const j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(d.n_atoms)));
      double const c = rng.uniform(0.01, 50.0);
      Cx const rot = std::polar(c, rng.uniform(0, 2 * kPi));
      std::vector<Cx> s(d.row(j).begin(), d.row(j).end());
      for (auto &v : s) { v *= rot; }
      auto const r = match(s, d);
      CHECK(r.atom_index == j);
      CHECK(r.pd == Approx(c).epsilon(1e-12));
      CHECK(r.proton_density == Approx(c / d.atom_norms[static_cast<std::size_t>(j)]).epsilon(1e-12));
    }
  }
  SECTION("off-grid fingerprint goes to the exhaustive-scan optimum")
  {
    auto const fp = simulate_fingerprint(TissueParams(700, 90), d.spec);
    auto const r = match(fp, d);
    // Independent scan: minimize the phase-optimal distance between the normalized signal and each atom.
    std::vector<Cx> u(fp.samples);
    for (auto &v : u) { v /= fp.norm; }
    Index best = -1;
    double best_d = INFINITY;
    for (Index a = 0; a < d.n_atoms; ++a) {
      Cx ip{};
      for (Index t = 0; t < d.length; ++t) { ip += std::conj(d.row(a)[static_cast<std::size_t>(t)]) * u[static_cast<std::size_t>(t)]; }
      Cx const phase = std::abs(ip) > 0 ? ip / std::abs(ip) : Cx(1.0);
      double dist = 0.0;
      for (Index t = 0; t < d.length; ++t) { dist += std::norm(u[static_cast<std::size_t>(t)] - phase * d.row(a)[static_cast<std::size_t>(t)]); }
      if (dist < best_d) {
        best_d = dist;
        best = a;
      }
    }
    CHECK(r.atom_index == best);
    CHECK(r.similarity < 1.0);
  }
  SECTION("ties go to the lowest index")
  {
    auto dup = build_dictionary(ParamGrid{{500, 1000}, {50, 100}, true}, desk_spec());
    std::copy_n(dup.atoms.begin() + dup.length, dup.length, dup.atoms.begin() + 3 * dup.length);
    std::vector<Cx> s(dup.row(1).begin(), dup.row(1).end());
    CHECK(match(s, dup).atom_index == 1);
    CHECK(match_naive(s, dup).atom_index == 1);
  }
  SECTION("zero signal is the null result")
  {
    auto const r = match(std::vector<Cx>(static_cast<std::size_t>(d.length)), d);
    CHECK_FALSE(r.valid());
    CHECK(r.pd == 0.0);
    CHECK(r.similarity == 0.0);
    CHECK(r.atom_index == -1);
  }
  CHECK_THROWS_AS(match(std::vector<Cx>(3, Cx(1.0)), d), InvalidArgument);
}

TEST_CASE("match image", "[dictionary]")
{
  auto const &d = desk_dict();
  Index const n = 64;
  auto const table = snap_to_grid(TissueTable::defaults(), d.grid);
  auto const ph = make_phantom(n, n, 7, table);

  SECTION("noiseless series recovers the generating parameters")
  {
    auto const series = cartesian_series(ph, d.spec);
    auto const maps = match_image(series, d);
    for (Index p = 0; p < n * n; ++p) {
      auto const u = static_cast<std::size_t>(p);
      if (ph.labeled(p)) {
        CHECK(maps.t1.data[u] == ph.t1.data[u]);
        CHECK(maps.t2.data[u] == ph.t2.data[u]);
        CHECK(maps.pd.data[u] == Approx(ph.pd.data[u]).epsilon(1e-9));
        CHECK(maps.similarity.data[u] == Approx(1.0).margin(1e-9));
      } else {
        CHECK(maps.atom_index.data[u] == -1);
        CHECK(maps.pd.data[u] == 0.0);
      }
    }
  }
  SECTION("all-zero series gives null maps")
  {
    MrfSeries zero(d.length, 8, 8, d.spec);
    auto const maps = match_image(zero, d);
    for (Index p = 0; p < 64; ++p) { CHECK(maps.atom_index.data[static_cast<std::size_t>(p)] == -1); }
  }
  SECTION("30 dB noise: at least 95% of the foreground within one grid step")
  {
    auto series = cartesian_series(ph, d.spec);
    add_series_noise(series, 30.0, 2024);
    auto const maps = match_image(series, d);
    Index fg = 0, close = 0;
    for (Index p = 0; p < n * n; ++p) {
      if (!ph.labeled(p)) { continue; }
      auto const u = static_cast<std::size_t>(p);
      ++fg;
      if (maps.atom_index.data[u] >= 0 &&
          d.grid.step_distance(maps.t1.data[u], maps.t2.data[u], ph.t1.data[u], ph.t2.data[u]) <= 1) {
        ++close;
      }
    }
    double const frac = static_cast<double>(close) / static_cast<double>(fg);
    INFO("fraction within one step: " << frac);
    CHECK(frac >= 0.95);
  }
  SECTION("pd scales linearly, parameters unchanged")
  {
    auto series = cartesian_series(ph, d.spec);
    auto const a = match_image(series, d);
    for (auto &v : series.data) { v *= Cx(0, 3.0); }
    auto const b = match_image(series, d);
    CHECK(a.atom_index == b.atom_index);
    for (std::size_t i = 0; i < a.pd.data.size(); ++i) { CHECK(b.pd.data[i] == Approx(3.0 * a.pd.data[i]).margin(1e-12)); }
  }
  CHECK_THROWS_AS(match_image(MrfSeries(d.length + 1, 4, 4), d), InvalidArgument);
}
