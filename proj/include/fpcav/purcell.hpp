#pragma once

#include "fpcav/tmm.hpp"

namespace fpcav {

/// Optical emitter parameters used by the Purcell bookkeeping.
struct EmitterParams {
  double zpl_wavelength_nm = 917.0;
  double free_lifetime_tau0_ns = 0.0;
  double debye_waller = 1.0;         // ZPL fraction of the emission
  double quantum_efficiency = 1.0;
  double host_index = 1.0;           // index at the emitter, extraordinary axis
};

/// Energy-weighted cavity length of an on-resonance profile, in micrometres:
///   L_eff = integral |n(z) E(z)|^2 dz / max |n(z) E(z)|^2
/// (trapezoidal quadrature over the profile samples).
double effective_length_um(const FieldProfile& profile);

/// V = pi w0^2 L_eff / 4, expressed in units of the ZPL wavelength cubed.
double mode_volume_lambda3(double w0_um, double l_eff_um, double zpl_wavelength_nm);

/// Fundamental-mode waist of the plano-concave fiber cavity with the membrane
/// treated as a reduced-optical-path slab (propagation distance d/n). The
/// waist sits at the planar mirror, i.e. inside the membrane. Throws for an
/// unstable geometry (radius of curvature not exceeding the effective length).
double gaussian_waist_um(double fiber_roc_um, double air_gap_um, double membrane_thickness_um,
                         double membrane_index, double wavelength_nm);

/// Ideal Purcell factor C0 = 3 Q / (4 pi^2 V n^3), V in lambda^3 units.
double purcell_ideal(double quality_factor, double mode_volume_lambda3, double host_index);

/// Effective Purcell factor from a lifetime pair: C_eff = tau0/tau_cav - 1.
/// Negative (anti-enhancement or noise) is reported, not thrown; the optional
/// flag is set when that happens.
double purcell_effective(double tau0_ns, double tau_cav_ns, bool* anti_enhancement = nullptr);

/// C0 = C_eff / (DWF * QE).
double purcell_corrected(double c_eff, double debye_waller, double quantum_efficiency);

/// Detuning-dependent lifetime
///   tau(D) = tau0 / (1 + C_peak / (1 + (2 D / kappa)^2)),
/// kappa = cavity linewidth FWHM. Even in D, bounded by [tau0/(1+C_peak), tau0].
double lifetime_vs_detuning_ns(const EmitterParams& emitter, double c_eff_peak,
                               double linewidth_fwhm_ghz, double detuning_ghz);

}  // namespace fpcav
