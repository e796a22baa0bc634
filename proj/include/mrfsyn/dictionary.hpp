#pragma once

#include "epg.hpp"
#include "phantom.hpp"
#include "series.hpp"

#include <Eigen/Dense>

#include <optional>

namespace mrf {

/// (T1, T2) grid over which fingerprints are simulated.
struct ParamGrid
{
  std::vector<double> t1_values_ms;
  std::vector<double> t2_values_ms;
  bool exclude_t2_gt_t1 = true;

  static std::vector<double> log_spaced(Index n, double lo, double hi)
  {
    require(n >= 1 && lo > 0.0 && hi >= lo, "log_spaced: invalid range");
    std::vector<double> v(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      double const f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      v[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, f);
    }
    v.back() = hi;
    return v;
  }

  /// 60 x 50 log-spaced grid for desk-scale experiments.
  static ParamGrid desk() { return {log_spaced(60, 4.0, 4000.0), log_spaced(50, 2.0, 2000.0), true}; }

  /// 188 x 197 log-spaced grid; 22,030 admissible atoms.
  static ParamGrid full() { return {log_spaced(188, 4.0, 4000.0), log_spaced(197, 2.0, 2000.0), true}; }

  bool admissible(double t1, double t2) const { return !exclude_t2_gt_t1 || t2 <= t1; }

  void validate() const
  {
    require(!t1_values_ms.empty() && !t2_values_ms.empty(), "ParamGrid: empty axis");
    for (auto const *axis : {&t1_values_ms, &t2_values_ms}) {
      for (std::size_t i = 0; i < axis->size(); ++i) {
        require((*axis)[i] > 0.0 && std::isfinite((*axis)[i]), "ParamGrid: values must be positive");
        require(i == 0 || (*axis)[i] > (*axis)[i - 1], "ParamGrid: values must be strictly increasing");
      }
    }
  }

  /// Admissible (T1 index, T2 index) pairs in T1-major order.
  std::vector<std::pair<Index, Index>> pairs() const
  {
    std::vector<std::pair<Index, Index>> out;
    for (std::size_t i = 0; i < t1_values_ms.size(); ++i) {
      for (std::size_t j = 0; j < t2_values_ms.size(); ++j) {
        if (admissible(t1_values_ms[i], t2_values_ms[j])) { out.emplace_back(i, j); }
      }
    }
    return out;
  }

  /// Index of the axis value nearest v in log distance.
  static Index nearest(std::vector<double> const &axis, double v)
  {
    Index best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < axis.size(); ++i) {
      double const d = std::abs(std::log(axis[i] / v));
      if (d < best_d) {
        best_d = d;
        best = static_cast<Index>(i);
      }
    }
    return best;
  }

  /// Nearest admissible grid point to (t1, t2), keeping PD.
  TissueParams snap(TissueParams const &p) const
  {
    Index const i = nearest(t1_values_ms, p.t1_ms());
    Index j = nearest(t2_values_ms, p.t2_ms());
    double const t1 = t1_values_ms[static_cast<std::size_t>(i)];
    while (j > 0 && !admissible(t1, t2_values_ms[static_cast<std::size_t>(j)])) { --j; }
    return {t1, t2_values_ms[static_cast<std::size_t>(j)], p.pd()};
  }

  /// Chebyshev distance in grid indices between two on-grid parameter pairs.
  Index step_distance(double t1a, double t2a, double t1b, double t2b) const
  {
    return std::max(std::abs(nearest(t1_values_ms, t1a) - nearest(t1_values_ms, t1b)),
                    std::abs(nearest(t2_values_ms, t2a) - nearest(t2_values_ms, t2b)));
  }
};

/// Unit-norm simulated fingerprints, one row per admissible grid point.
struct Dictionary
{
  Index n_atoms = 0;
  Index length = 0;
  std::vector<Cx> atoms;          // row-major n_atoms x length
  std::vector<TissueParams> params; // pd = 1
  std::vector<double> atom_norms; // norm of each fingerprint before normalization
  FispMrf spec;
  ParamGrid grid;
  std::string manifest_hash;

  std::span<Cx const> row(Index i) const
  {
    return {atoms.data() + i * length, static_cast<std::size_t>(length)};
  }

  std::string compute_hash() const
  {
    Fnv1a h;
    h.add_values(std::span<Cx const>(atoms));
    h.add_values(std::span<double const>(atom_norms));
    h.add_values(std::span<double const>(grid.t1_values_ms));
    h.add_values(std::span<double const>(grid.t2_values_ms));
    h.add_values(std::span<double const>(spec.flip_schedule));
    double const timing[] = {spec.te_ms, spec.tr_ms, spec.inversion_prep ? 1.0 : 0.0, spec.inversion_delay_ms};
    h.add(timing, sizeof(timing));
    return h.hex();
  }
};

inline Dictionary build_dictionary(ParamGrid const &grid, FispMrf const &spec)
{
  grid.validate();
  validate(spec);
  auto const pairs = grid.pairs();
  require(!pairs.empty(), "build_dictionary: grid has no admissible (T1, T2) pairs");
  Dictionary d;
  d.n_atoms = static_cast<Index>(pairs.size());
  d.length = spec.n_tr;
  d.spec = spec;
  d.grid = grid;
  d.atoms.resize(static_cast<std::size_t>(d.n_atoms * d.length));
  d.atom_norms.resize(pairs.size());
  d.params.reserve(pairs.size());
  for (auto const &[i, j] : pairs) {
    d.params.emplace_back(grid.t1_values_ms[static_cast<std::size_t>(i)], grid.t2_values_ms[static_cast<std::size_t>(j)], 1.0);
  }
  parallel_for(d.n_atoms, [&](Index b, Index e) {
    for (Index a = b; a < e; ++a) {
      auto const fp = simulate_fingerprint(d.params[static_cast<std::size_t>(a)], spec);
      double const scale = fp.norm > 0.0 ? 1.0 / fp.norm : 0.0;
      for (Index t = 0; t < d.length; ++t) {
        d.atoms[static_cast<std::size_t>(a * d.length + t)] = fp.samples[static_cast<std::size_t>(t)] * scale;
      }
      d.atom_norms[static_cast<std::size_t>(a)] = fp.norm;
    }
  });
  d.manifest_hash = d.compute_hash();
  return d;
}

/// Table with every labeled class moved onto its nearest admissible grid point.
inline TissueTable snap_to_grid(TissueTable table, ParamGrid const &grid)
{
  for (std::size_t i = 1; i < table.entries.size(); ++i) {
    auto &e = table.entries[i];
    auto const s = grid.snap(TissueParams(e.t1_ms, e.t2_ms, e.pd));
    e.t1_ms = s.t1_ms();
    e.t2_ms = s.t2_ms();
  }
  return table;
}

struct MatchResult
{
  std::optional<TissueParams> params; // empty for the null result
  double pd = 0.0;                     // |<signal, atom>|
  double similarity = 0.0;             // pd / |signal|
  Index atom_index = -1;
  double proton_density = 0.0;         // pd / norm of the unnormalized atom

  bool valid() const { return params.has_value(); }
};

namespace detail {

inline MatchResult make_result(Dictionary const &dict, Index atom, double magnitude, double signal_norm)
{
  MatchResult r;
  r.atom_index = atom;
  r.params = dict.params[static_cast<std::size_t>(atom)];
  r.pd = magnitude;
  r.similarity = std::min(1.0, magnitude / signal_norm);
  double const an = dict.atom_norms[static_cast<std::size_t>(atom)];
  r.proton_density = an > 0.0 ? magnitude / an : 0.0;
  return r;
}

/// Atoms whose |<s, a>| lies within a relative 1e-10 of the running best. Very short T1/T2 atoms
/// are collinear to round-off (T2 only scales them), so the Gram magnitude cannot order them;
/// those near-ties are re-ranked by the phase-aligned residual |s/|s| - e^{i phi} a|^2, which is
/// exactly zero for an exact match. Remaining exact ties keep the lowest index.
class NearTies
{
public:
  static constexpr double kRelTol = 1e-10;

  void offer(Index atom, double mag)
  {
    if (mag > best_) {
      best_ = mag;
      double const cut = best_ * (1.0 - kRelTol);
      std::erase_if(items_, [cut](auto const &it) { return it.second < cut; });
    }
    if (mag >= best_ * (1.0 - kRelTol)) { items_.emplace_back(atom, mag); }
  }

  std::pair<Index, double> resolve(Dictionary const &dict, std::span<Cx const> signal, double norm) const
  {
    if (items_.size() == 1) { return items_.front(); }
    std::pair<Index, double> best = items_.front();
    double best_res = INFINITY;
    for (auto const &[atom, mag] : items_) {
      auto const a = dict.row(atom);
      Cx ip{};
      for (std::size_t t = 0; t < a.size(); ++t) { ip += std::conj(a[t]) * signal[t]; }
      Cx const phase = std::abs(ip) > 0.0 ? ip / std::abs(ip) : Cx(1.0);
      double res = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) { res += std::norm(signal[t] / norm - phase * a[t]); }
      if (res < best_res) {
        best_res = res;
        best = {atom, mag};
      }
    }
    return best;
  }

private:
  double best_ = -1.0;
  std::vector<std::pair<Index, double>> items_;
};

} // namespace detail

/// Reference matcher: one inner product per atom.
inline MatchResult match_naive(std::span<Cx const> signal, Dictionary const &dict)
{
  require(static_cast<Index>(signal.size()) == dict.length, "match: signal length differs from atom length");
  double const norm = l2_norm(signal);
  if (!(norm > 0.0)) { return {}; }
  detail::NearTies ties;
  for (Index a = 0; a < dict.n_atoms; ++a) {
    auto const atom = dict.row(a);
    Cx acc{};
    for (Index t = 0; t < dict.length; ++t) {
      acc += std::conj(atom[static_cast<std::size_t>(t)]) * signal[static_cast<std::size_t>(t)];
    }
    ties.offer(a, std::abs(acc));
  }
  auto const [best, best_mag] = ties.resolve(dict, signal, norm);
  return detail::make_result(dict, best, best_mag, norm);
}

/// Blocked matcher. Signals are columns of a (length x n) matrix; the complex Gram product
/// |A conj(S)| is formed in atom panels and reduced to a running argmax per column.
class BlockMatcher
{
public:
  static constexpr Index kAtomPanel = 1024;
  static constexpr Index kSignalBlock = 64;

  explicit BlockMatcher(Dictionary const &dict)
    : dict_(dict)
  {
  }

  /// signals: column-major (length x n). Writes one result per column.
  void run(Eigen::Ref<Eigen::MatrixXcd const> signals, std::span<MatchResult> out) const
  {
    using RowMajor = Eigen::Matrix<Cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<RowMajor const> const atoms(dict_.atoms.data(), dict_.n_atoms, dict_.length);
    Index const n = signals.cols();
    Eigen::VectorXd norms = signals.colwise().norm().transpose();
    std::vector<detail::NearTies> ties(static_cast<std::size_t>(n));
    Eigen::MatrixXcd const conj_s = signals.conjugate();
    Eigen::MatrixXcd gram;
    for (Index a0 = 0; a0 < dict_.n_atoms; a0 += kAtomPanel) {
      Index const na = std::min(kAtomPanel, dict_.n_atoms - a0);
      gram.noalias() = atoms.middleRows(a0, na) * conj_s;
      for (Index c = 0; c < n; ++c) {
        auto &t = ties[static_cast<std::size_t>(c)];
        for (Index a = 0; a < na; ++a) { t.offer(a0 + a, std::abs(gram(a, c))); }
      }
    }
    for (Index c = 0; c < n; ++c) {
      auto const uc = static_cast<std::size_t>(c);
      if (!(norms(c) > 0.0)) {
        out[uc] = MatchResult{};
        continue;
      }
      std::span<Cx const> const col(signals.col(c).data(), static_cast<std::size_t>(signals.rows()));
      auto const [atom, mag] = ties[uc].resolve(dict_, col, norms(c));
      out[uc] = detail::make_result(dict_, atom, mag, norms(c));
    }
  }

private:
  Dictionary const &dict_;
};

inline MatchResult match(std::span<Cx const> signal, Dictionary const &dict)
{
  require(static_cast<Index>(signal.size()) == dict.length, "match: signal length differs from atom length");
  Eigen::Map<Eigen::VectorXcd const> const s(signal.data(), dict.length);
  MatchResult r;
  BlockMatcher(dict).run(s, std::span<MatchResult>(&r, 1));
  return r;
}

inline MatchResult match(Fingerprint const &signal, Dictionary const &dict) { return match(signal.samples, dict); }

struct MatchMaps
{
  RealImage t1;
  RealImage t2;
  RealImage pd; // proton density in simulation units (|<s, atom>| / atom norm)
  RealImage similarity;
  Image<Index> atom_index; // -1 for null pixels
};

/// Per-pixel matching. Pixels whose series norm is at most 1e-6 x the 95th percentile of all
/// pixel norms are null (0 in every map).
inline MatchMaps match_image(MrfSeries const &series, Dictionary const &dict)
{
  require(series.t == dict.length, "match_image: series length differs from dictionary atom length");
  require(series.h > 0 && series.w > 0, "match_image: empty series");
  Index const np = series.pixels();
  std::vector<double> norms(static_cast<std::size_t>(np), 0.0);
  for (Index ti = 0; ti < series.t; ++ti) {
    auto const f = series.frame(ti);
    for (Index p = 0; p < np; ++p) { norms[static_cast<std::size_t>(p)] += std::norm(f[static_cast<std::size_t>(p)]); }
  }
  for (auto &n : norms) { n = std::sqrt(n); }
  double const floor = 1e-6 * percentile_nearest_rank(norms, 0.95);

  std::vector<Index> active;
  for (Index p = 0; p < np; ++p) {
    if (norms[static_cast<std::size_t>(p)] > floor) { active.push_back(p); }
  }

  MatchMaps m{RealImage(series.h, series.w), RealImage(series.h, series.w), RealImage(series.h, series.w),
              RealImage(series.h, series.w), Image<Index>(series.h, series.w, -1)};
  Index const nb = (static_cast<Index>(active.size()) + BlockMatcher::kSignalBlock - 1) / BlockMatcher::kSignalBlock;
  parallel_for(nb, [&](Index b0, Index b1) {
    BlockMatcher const matcher(dict);
    Eigen::MatrixXcd block;
    std::vector<MatchResult> results;
    for (Index b = b0; b < b1; ++b) {
      Index const first = b * BlockMatcher::kSignalBlock;
      Index const cnt = std::min<Index>(BlockMatcher::kSignalBlock, static_cast<Index>(active.size()) - first);
      block.resize(series.t, cnt);
      for (Index c = 0; c < cnt; ++c) {
        Index const p = active[static_cast<std::size_t>(first + c)];
        for (Index ti = 0; ti < series.t; ++ti) { block(ti, c) = series.data[static_cast<std::size_t>(ti * np + p)]; }
      }
      results.assign(static_cast<std::size_t>(cnt), MatchResult{});
      matcher.run(block, results);
      for (Index c = 0; c < cnt; ++c) {
        auto const &r = results[static_cast<std::size_t>(c)];
        if (!r.valid()) { continue; }
        auto const p = static_cast<std::size_t>(active[static_cast<std::size_t>(first + c)]);
        m.t1.data[p] = r.params->t1_ms();
        m.t2.data[p] = r.params->t2_ms();
        m.pd.data[p] = r.proton_density;
        m.similarity.data[p] = r.similarity;
        m.atom_index.data[p] = r.atom_index;
      }
    }
  });
  return m;
}

} // namespace mrf
