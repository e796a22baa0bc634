#pragma once

#include "sequence.hpp"

namespace mrf {

/// Extended phase graph configuration states F+_k, F-_k, Z_k for k = 0..K.
///
/// The ladder is truncated at order K. Occupancy pushed past K by a gradient is dropped and its
/// energy accumulated in dropped_energy() so truncation is observable.
class EpgState
{
public:
  explicit EpgState(Index max_order, double m0 = 1.0)
    : fp_(static_cast<std::size_t>(max_order + 1))
    , fm_(static_cast<std::size_t>(max_order + 1))
    , z_(static_cast<std::size_t>(max_order + 1))
    , m0_(m0)
  {
    require(max_order >= 0, "EpgState: max order must be non-negative");
    z_[0] = m0;
  }

  Index max_order() const { return static_cast<Index>(z_.size()) - 1; }
  double m0() const { return m0_; }
  double dropped_energy() const { return dropped_; }

  std::vector<Cx> const &f_plus() const { return fp_; }
  std::vector<Cx> const &f_minus() const { return fm_; }
  std::vector<Cx> const &z() const { return z_; }
  std::vector<Cx> &mutable_f_plus() { touch_all(); return fp_; }
  std::vector<Cx> &mutable_f_minus() { touch_all(); return fm_; }
  std::vector<Cx> &mutable_z() { touch_all(); return z_; }

  /// Sets Z_0 only; other orders untouched.
  void set_z0(Cx value) { z_[0] = value; }

  /// Instantaneous rotation by flip about the transverse axis at angle phase.
  void rf(double flip, double phase)
  {
    require(std::isfinite(flip) && std::isfinite(phase), "epg_rf: non-finite flip or phase");
    if (flip == 0.0) { return; }
    double const c2 = std::cos(flip / 2.0) * std::cos(flip / 2.0);
    double const s2 = std::sin(flip / 2.0) * std::sin(flip / 2.0);
    double const sa = std::sin(flip);
    double const ca = std::cos(flip);
    Cx const e1 = std::polar(1.0, phase);
    Cx const e2 = e1 * e1;
    Cx const i{0.0, 1.0};
    Cx const t01 = e2 * s2;
    Cx const t02 = -i * e1 * sa;
    Cx const t10 = std::conj(e2) * s2;
    Cx const t12 = i * std::conj(e1) * sa;
    Cx const t20 = -0.5 * i * std::conj(e1) * sa;
    Cx const t21 = 0.5 * i * e1 * sa;
    for (Index k = 0; k <= active_; ++k) {
      auto const u = static_cast<std::size_t>(k);
      Cx const fp = fp_[u], fm = fm_[u], z = z_[u];
      fp_[u] = c2 * fp + t01 * fm + t02 * z;
      fm_[u] = t10 * fp + c2 * fm + t12 * z;
      z_[u] = t20 * fp + t21 * fm + ca * z;
    }
  }

  void relax(double dt_ms, double t1_ms, double t2_ms)
  {
    require(std::isfinite(dt_ms) && dt_ms >= 0.0, "epg_relax: duration must be non-negative");
    relax_factors(std::exp(-dt_ms / t1_ms), std::exp(-dt_ms / t2_ms));
  }

  /// Relaxation with precomputed E1 = exp(-dt/T1), E2 = exp(-dt/T2).
  void relax_factors(double e1, double e2)
  {
    for (Index k = 0; k <= active_; ++k) {
      auto const u = static_cast<std::size_t>(k);
      fp_[u] *= e2;
      fm_[u] *= e2;
      z_[u] *= e1;
    }
    z_[0] += (1.0 - e1) * m0_;
  }

  /// Dephasing by `shifts` unit gradient moments (negative shifts rephase).
  void grad(Index shifts)
  {
    require(std::abs(shifts) <= max_order(), "epg_grad: shift exceeds ladder size");
    for (Index s = 0; s < std::abs(shifts); ++s) {
      if (shifts > 0) {
        shift_up();
      } else {
        shift_down();
      }
    }
  }

  /// Keep only Z_0 (ideal crusher that removes all transverse and modulated longitudinal states).
  void spoil_all()
  {
    std::fill(fp_.begin(), fp_.end(), Cx{});
    std::fill(fm_.begin(), fm_.end(), Cx{});
    std::fill(z_.begin() + 1, z_.end(), Cx{});
    active_ = 0;
  }

  friend bool operator==(EpgState const &a, EpgState const &b)
  {
    return a.fp_ == b.fp_ && a.fm_ == b.fm_ && a.z_ == b.z_ && a.m0_ == b.m0_;
  }

private:
  void touch_all() { active_ = max_order(); }

  void shift_up()
  {
    Index const K = max_order();
    auto const uK = static_cast<std::size_t>(K);
    dropped_ += std::norm(fp_[uK]);
    Cx const refocused = K >= 1 ? std::conj(fm_[1]) : Cx{};
    for (std::size_t k = uK; k >= 1; --k) { fp_[k] = fp_[k - 1]; }
    for (std::size_t k = 0; k < uK; ++k) { fm_[k] = fm_[k + 1]; }
    if (K >= 1) {
      fm_[uK] = Cx{};
      fp_[0] = refocused;
    } else {
      fp_[0] = Cx{};
      fm_[0] = Cx{};
    }
    fm_[0] = std::conj(fp_[0]);
    active_ = std::min(K, active_ + 1);
  }

  void shift_down()
  {
    Index const K = max_order();
    auto const uK = static_cast<std::size_t>(K);
    dropped_ += std::norm(fm_[uK]);
    Cx const refocused = K >= 1 ? std::conj(fp_[1]) : Cx{};
    for (std::size_t k = uK; k >= 1; --k) { fm_[k] = fm_[k - 1]; }
    for (std::size_t k = 0; k < uK; ++k) { fp_[k] = fp_[k + 1]; }
    if (K >= 1) {
      fp_[uK] = Cx{};
      fm_[0] = refocused;
    } else {
      fp_[0] = Cx{};
      fm_[0] = Cx{};
    }
    fp_[0] = std::conj(fm_[0]);
    active_ = std::min(K, active_ + 1);
  }

  std::vector<Cx> fp_, fm_, z_;
  double m0_;
  double dropped_ = 0.0;
  Index active_ = 0; // highest order that may be occupied
};

inline EpgState epg_rf(EpgState state, double flip, double phase)
{
  state.rf(flip, phase);
  return state;
}

inline EpgState epg_relax(EpgState state, double dt_ms, TissueParams const &p)
{
  state.relax(dt_ms, p.t1_ms(), p.t2_ms());
  return state;
}

inline EpgState epg_grad(EpgState state, Index shifts)
{
  state.grad(shifts);
  return state;
}

struct Fingerprint
{
  std::vector<Cx> samples;
  double norm = 0.0;

  Index size() const { return static_cast<Index>(samples.size()); }
};

inline double l2_norm(std::span<Cx const> v)
{
  double s = 0.0;
  for (auto const &x : v) { s += std::norm(x); }
  return std::sqrt(s);
}

inline Fingerprint make_fingerprint(std::vector<Cx> samples)
{
  double const n = l2_norm(samples);
  return {std::move(samples), n};
}

/// FISP MRF signal: per TR, RF -> relax to TE -> sample F+_0 -> relax to TR -> one spoiler shift.
inline Fingerprint simulate_fingerprint(TissueParams const &p, FispMrf const &spec)
{
  validate(spec);
  EpgState st(spec.n_tr + 1);
  if (spec.inversion_prep) {
    st.rf(kPi, 0.0);
    st.relax(spec.inversion_delay_ms, p.t1_ms(), p.t2_ms());
  }
  double const e1_te = std::exp(-spec.te_ms / p.t1_ms());
  double const e2_te = std::exp(-spec.te_ms / p.t2_ms());
  double const e1_rest = std::exp(-(spec.tr_ms - spec.te_ms) / p.t1_ms());
  double const e2_rest = std::exp(-(spec.tr_ms - spec.te_ms) / p.t2_ms());
  std::vector<Cx> out(static_cast<std::size_t>(spec.n_tr));
  for (Index i = 0; i < spec.n_tr; ++i) {
    st.rf(spec.flip_schedule[static_cast<std::size_t>(i)], 0.0);
    st.relax_factors(e1_te, e2_te);
    out[static_cast<std::size_t>(i)] = p.pd() * st.f_plus()[0];
    st.relax_factors(e1_rest, e2_rest);
    st.grad(1);
  }
  return make_fingerprint(std::move(out));
}

/// Spin-echo closed form PD (1 - exp(-(TR-TE)/T1)) exp(-TE/T2).
inline double simulate_se_closed_form(TissueParams const &p, SpinEcho const &spec)
{
  validate(spec);
  return p.pd() * (1.0 - std::exp(-(spec.tr_ms - spec.te_ms) / p.t1_ms())) * std::exp(-spec.te_ms / p.t2_ms());
}

namespace detail {

struct TrainResult
{
  std::vector<Cx> echoes;
  double z_end = 0.0;
};

/// One TR of a (optionally inversion-prepared) CPMG echo train starting from pure Z_0 = z_start,
/// ending just before the end-of-TR crusher. Unit M0.
inline TrainResult cpmg_repetition(
  double t1, double t2, double z_start, double ti_ms, Index etl, double esp_ms, double refocus, double tr_ms)
{
  EpgState st(2 * etl + 1);
  st.set_z0(z_start);
  double elapsed = 0.0;
  if (ti_ms > 0.0) {
    st.rf(kPi, 0.0);
    st.relax(ti_ms, t1, t2);
    elapsed += ti_ms;
  }
  st.rf(kPi / 2.0, 0.0);
  double const e1 = std::exp(-esp_ms / 2.0 / t1);
  double const e2 = std::exp(-esp_ms / 2.0 / t2);
  TrainResult r;
  r.echoes.reserve(static_cast<std::size_t>(etl));
  for (Index e = 0; e < etl; ++e) {
    st.relax_factors(e1, e2);
    st.grad(1);
    st.rf(refocus, kPi / 2.0);
    st.grad(1);
    st.relax_factors(e1, e2);
    r.echoes.push_back(st.f_plus()[0]);
  }
  elapsed += static_cast<double>(etl) * esp_ms;
  st.relax(tr_ms - elapsed, t1, t2);
  r.z_end = st.z()[0].real();
  return r;
}

/// Echoes of the train, either from equilibrium or in the TR-periodic steady state. Each TR ends
/// with an ideal crusher, so the start of a TR is fully described by Z_0 and the per-TR map
/// Z_0 -> Z_0 is affine; its fixed point is solved directly.
inline std::vector<Cx> cpmg_echoes(
  double t1, double t2, double ti_ms, Index etl, double esp_ms, double refocus, double tr_ms, bool steady_state)
{
  if (!steady_state) { return cpmg_repetition(t1, t2, 1.0, ti_ms, etl, esp_ms, refocus, tr_ms).echoes; }
  double const b = cpmg_repetition(t1, t2, 0.0, ti_ms, etl, esp_ms, refocus, tr_ms).z_end;
  double const a = cpmg_repetition(t1, t2, 1.0, ti_ms, etl, esp_ms, refocus, tr_ms).z_end - b;
  double const z_ss = b / (1.0 - a);
  return cpmg_repetition(t1, t2, z_ss, ti_ms, etl, esp_ms, refocus, tr_ms).echoes;
}

} // namespace detail

/// Echo magnitudes of the T2w train, scaled by PD.
inline std::vector<double> tse_echo_train(TissueParams const &p, Tse const &spec)
{
  validate(spec);
  auto const echoes = detail::cpmg_echoes(
    p.t1_ms(), p.t2_ms(), 0.0, spec.etl, spec.esp_ms, spec.refocus_rad, spec.tr_ms, spec.steady_state);
  std::vector<double> mags;
  mags.reserve(echoes.size());
  for (auto const &e : echoes) { mags.push_back(p.pd() * std::abs(e)); }
  return mags;
}

inline double simulate_tse(TissueParams const &p, Tse const &spec)
{
  validate(spec);
  Index const k = effective_echo(spec.te_eff_ms, spec.esp_ms, spec.etl);
  return tse_echo_train(p, spec)[static_cast<std::size_t>(k - 1)];
}

inline std::vector<double> flair_echo_train(TissueParams const &p, FlairTse const &spec)
{
  validate(spec);
  auto const echoes = detail::cpmg_echoes(
    p.t1_ms(), p.t2_ms(), spec.ti_ms, spec.etl, spec.esp_ms, spec.refocus_rad, spec.tr_ms, spec.steady_state);
  std::vector<double> mags;
  mags.reserve(echoes.size());
  for (auto const &e : echoes) { mags.push_back(p.pd() * std::abs(e)); }
  return mags;
}

inline double simulate_flair(TissueParams const &p, FlairTse const &spec)
{
  validate(spec);
  Index const k = effective_echo(spec.te_eff_ms, spec.esp_ms, spec.etl);
  return flair_echo_train(p, spec)[static_cast<std::size_t>(k - 1)];
}

} // namespace mrf
