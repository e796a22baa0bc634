#include "mrfsyn/dictionary.hpp"
#include "mrfsyn/phantom.hpp"

#include <catch_amalgamated.hpp>

using namespace mrf;

TEST_CASE("phantom determinism", "[phantom]")
{
  auto const a = make_phantom(64, 64, 7);
  auto const b = make_phantom(64, 64, 7);
  CHECK(a.labels == b.labels);
  CHECK(a.t1 == b.t1);
  CHECK(a.t2 == b.t2);
  CHECK(a.pd == b.pd);
  CHECK(a.b0 == b.b0);
  CHECK(make_phantom(64, 64, 8).labels != a.labels);
}

TEST_CASE("phantom contents", "[phantom]")
{
  auto const table = TissueTable::defaults();
  auto const ph = make_phantom(64, 48, 3, table);
  REQUIRE(ph.t1.h == 64);
  REQUIRE(ph.t1.w == 48);
  for (double v : ph.b0.data) { CHECK(v == 0.0); }

  std::array<int, kTissueCount> seen{};
  for (Index p = 0; p < ph.h * ph.w; ++p) {
    auto const u = static_cast<std::size_t>(p);
    int const label = ph.labels.data[u];
    REQUIRE(label >= 0);
    REQUIRE(label < kTissueCount);
    ++seen[static_cast<std::size_t>(label)];
    auto const &e = table[static_cast<Tissue>(label)];
    if (label == 0) {
      CHECK(ph.pd.data[u] == 0.0);
    } else {
      CHECK(ph.t1.data[u] == e.t1_ms);
      CHECK(ph.t2.data[u] == e.t2_ms);
      CHECK(ph.pd.data[u] == e.pd);
    }
  }
  for (int c = 0; c < kTissueCount; ++c) {
    INFO(tissue_name(static_cast<Tissue>(c)));
    CHECK(seen[static_cast<std::size_t>(c)] > 0);
  }
}

TEST_CASE("labeled pixels lie inside the full grid", "[phantom]")
{
  auto const grid = ParamGrid::full();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto const ph = make_phantom(64, 64, seed);
    for (Index p = 0; p < ph.h * ph.w; ++p) {
      if (!ph.labeled(p)) { continue; }
      auto const u = static_cast<std::size_t>(p);
      double const t1 = ph.t1.data[u], t2 = ph.t2.data[u];
      CHECK(t1 >= grid.t1_values_ms.front());
      CHECK(t1 <= grid.t1_values_ms.back());
      CHECK(t2 >= grid.t2_values_ms.front());
      CHECK(t2 <= grid.t2_values_ms.back());
      CHECK(grid.admissible(t1, t2));
    }
  }
}

TEST_CASE("off-resonance field", "[phantom]")
{
  auto const ph = make_phantom(64, 64, 1, TissueTable::defaults(), B0Spec::default_blob());
  double peak = 0.0;
  Index peak_row = -1;
  for (Index r = 0; r < 64; ++r) {
    for (Index c = 0; c < 64; ++c) {
      if (ph.b0(r, c) > peak) {
        peak = ph.b0(r, c);
        peak_row = r;
      }
    }
  }
  CHECK(peak > 100.0);
  CHECK(peak <= 120.0);
  CHECK(peak_row < 10); // near the top edge
  CHECK(ph.b0(63, 32) < 1e-6);
  CHECK(B0Spec::none().is_zero());
  CHECK_FALSE(B0Spec::default_blob().is_zero());
}

TEST_CASE("phantom preconditions", "[phantom]")
{
  CHECK_THROWS_AS(make_phantom(31, 64, 1), InvalidArgument);
  CHECK_THROWS_AS(make_phantom(64, 16, 1), InvalidArgument);
  auto bad = TissueTable::defaults();
  bad[Tissue::Background].pd = 0.5;
  CHECK_THROWS_AS(make_phantom(64, 64, 1, bad), InvalidArgument);
  bad = TissueTable::defaults();
  bad[Tissue::Csf].t2_ms = 5000;
  CHECK_THROWS_AS(make_phantom(64, 64, 1, bad), InvalidArgument);
}
