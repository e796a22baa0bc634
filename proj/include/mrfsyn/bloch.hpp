#pragma once

#include "epg.hpp"

#include <variant>

namespace mrf {

/// Brute-force voxel model: n isochromats with phases uniformly spread over one cycle per unit
/// gradient moment. Exact Bloch rotation and relaxation per spin, signal = complex mean.
///
/// Used as an independent reference for the EPG simulators.
class IsochromatEnsemble
{
public:
  IsochromatEnsemble(Index n_spins, double m0 = 1.0)
    : mxy_(static_cast<std::size_t>(n_spins))
    , mz_(static_cast<std::size_t>(n_spins), m0)
    , twist_(static_cast<std::size_t>(n_spins))
    , m0_(m0)
  {
    require(n_spins >= 1, "IsochromatEnsemble: need at least one spin");
    for (Index j = 0; j < n_spins; ++j) {
      twist_[static_cast<std::size_t>(j)] = std::polar(1.0, 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n_spins));
    }
  }

  Index size() const { return static_cast<Index>(mz_.size()); }

  /// Right-handed rotation by flip about the axis (cos phase, sin phase, 0).
  void rf(double flip, double phase)
  {
    double const ux = std::cos(phase), uy = std::sin(phase);
    double const c = std::cos(flip), s = std::sin(flip), t = 1.0 - c;
    double const r00 = c + ux * ux * t, r01 = ux * uy * t, r02 = uy * s;
    double const r10 = ux * uy * t, r11 = c + uy * uy * t, r12 = -ux * s;
    double const r20 = -uy * s, r21 = ux * s, r22 = c;
    for (std::size_t j = 0; j < mz_.size(); ++j) {
      double const x = mxy_[j].real(), y = mxy_[j].imag(), z = mz_[j];
      mxy_[j] = {r00 * x + r01 * y + r02 * z, r10 * x + r11 * y + r12 * z};
      mz_[j] = r20 * x + r21 * y + r22 * z;
    }
  }

  void relax(double dt_ms, double t1_ms, double t2_ms)
  {
    double const e1 = std::exp(-dt_ms / t1_ms), e2 = std::exp(-dt_ms / t2_ms);
    for (std::size_t j = 0; j < mz_.size(); ++j) {
      mxy_[j] *= e2;
      mz_[j] = e1 * mz_[j] + (1.0 - e1) * m0_;
    }
  }

  /// Each spin precesses by shifts * 2 pi j / n.
  void dephase(Index shifts)
  {
    for (std::size_t j = 0; j < mz_.size(); ++j) {
      Cx tw{1.0, 0.0};
      for (Index s = 0; s < std::abs(shifts); ++s) { tw *= twist_[j]; }
      mxy_[j] *= shifts >= 0 ? tw : std::conj(tw);
    }
  }

  /// Ideal crusher: transverse destroyed, longitudinal averaged over the voxel.
  void spoil_all()
  {
    double const mean_z = mean_mz();
    std::fill(mxy_.begin(), mxy_.end(), Cx{});
    std::fill(mz_.begin(), mz_.end(), mean_z);
  }

  Cx signal() const
  {
    Cx s{};
    for (auto const &m : mxy_) { s += m; }
    return s / static_cast<double>(mxy_.size());
  }

  double mean_mz() const
  {
    double s = 0.0;
    for (double z : mz_) { s += z; }
    return s / static_cast<double>(mz_.size());
  }

private:
  std::vector<Cx> mxy_;
  std::vector<double> mz_;
  std::vector<Cx> twist_;
  double m0_;
};

inline Fingerprint bloch_isochromat_oracle(TissueParams const &p, FispMrf const &spec, Index n_spins)
{
  validate(spec);
  require(n_spins >= 100, "isochromat oracle: need at least 100 spins");
  IsochromatEnsemble ens(n_spins);
  double const t1 = p.t1_ms(), t2 = p.t2_ms();
  if (spec.inversion_prep) {
    ens.rf(kPi, 0.0);
    ens.relax(spec.inversion_delay_ms, t1, t2);
  }
  std::vector<Cx> out;
  out.reserve(static_cast<std::size_t>(spec.n_tr));
  for (double flip : spec.flip_schedule) {
    ens.rf(flip, 0.0);
    ens.relax(spec.te_ms, t1, t2);
    out.push_back(p.pd() * ens.signal());
    ens.relax(spec.tr_ms - spec.te_ms, t1, t2);
    ens.dephase(1);
  }
  return make_fingerprint(std::move(out));
}

namespace detail {

/// Runs the CPMG TR on isochromats once from equilibrium, or repeats it until the sampled echo
/// stops changing.
inline double isochromat_cpmg(TissueParams const &p, double ti_ms, Index etl, double esp_ms, double refocus,
                              double tr_ms, Index echo, Index n_spins, bool steady_state)
{
  require(n_spins >= 100, "isochromat oracle: need at least 100 spins");
  double const t1 = p.t1_ms(), t2 = p.t2_ms();
  IsochromatEnsemble ens(n_spins);
  double previous = -1.0;
  for (int rep = 0; rep < 1000; ++rep) {
    double elapsed = 0.0;
    if (ti_ms > 0.0) {
      ens.rf(kPi, 0.0);
      ens.relax(ti_ms, t1, t2);
      elapsed += ti_ms;
    }
    ens.rf(kPi / 2.0, 0.0);
    double sample = 0.0;
    for (Index e = 1; e <= etl; ++e) {
      ens.relax(esp_ms / 2.0, t1, t2);
      ens.dephase(1);
      ens.rf(refocus, kPi / 2.0);
      ens.dephase(1);
      ens.relax(esp_ms / 2.0, t1, t2);
      if (e == echo) { sample = std::abs(ens.signal()); }
    }
    elapsed += static_cast<double>(etl) * esp_ms;
    ens.relax(tr_ms - elapsed, t1, t2);
    ens.spoil_all();
    if (!steady_state || std::abs(sample - previous) <= 1e-15) { return p.pd() * sample; }
    previous = sample;
  }
  return p.pd() * previous;
}

} // namespace detail

inline double bloch_isochromat_oracle(TissueParams const &p, Tse const &spec, Index n_spins)
{
  validate(spec);
  Index const k = effective_echo(spec.te_eff_ms, spec.esp_ms, spec.etl);
  return detail::isochromat_cpmg(p, 0.0, spec.etl, spec.esp_ms, spec.refocus_rad, spec.tr_ms, k, n_spins, spec.steady_state);
}

inline double bloch_isochromat_oracle(TissueParams const &p, FlairTse const &spec, Index n_spins)
{
  validate(spec);
  Index const k = effective_echo(spec.te_eff_ms, spec.esp_ms, spec.etl);
  return detail::isochromat_cpmg(p, spec.ti_ms, spec.etl, spec.esp_ms, spec.refocus_rad, spec.tr_ms, k, n_spins, spec.steady_state);
}

/// Physical 90-180 spin echo in steady state with an ideal end-of-TR crusher. Differs from the
/// closed form by the T1 recovery during TE/2 around the refocusing pulse.
inline double bloch_isochromat_oracle(TissueParams const &p, SpinEcho const &spec, Index n_spins)
{
  validate(spec);
  return detail::isochromat_cpmg(p, 0.0, 1, spec.te_ms, kPi, spec.tr_ms, 1, n_spins, true);
}

using OracleOutput = std::variant<Fingerprint, double>;

inline OracleOutput bloch_isochromat_oracle(TissueParams const &p, SequenceSpec const &spec, Index n_spins)
{
  return std::visit([&](auto const &s) -> OracleOutput { return bloch_isochromat_oracle(p, s, n_spins); }, spec);
}

} // namespace mrf
