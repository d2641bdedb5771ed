#include "fpcav/purcell.hpp"

#include <cmath>
#include <numbers>

namespace fpcav {

double effective_length_um(const FieldProfile& profile) {
  const Eigen::Index n = profile.z_nm.size();
  if (n < 3) throw DataError("effective_length: profile too short");
  double integral = 0.0;
  double peak = 0.0;
  Eigen::Index i_peak = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = std::norm(profile.n_of_z[i] * profile.e_of_z[i]);
    if (f > peak) {
      peak = f;
      i_peak = i;
    }
    if (i + 1 < n) {
      const double fj = std::norm(profile.n_of_z[i + 1] * profile.e_of_z[i + 1]);
      integral += 0.5 * (f + fj) * (profile.z_nm[i + 1] - profile.z_nm[i]);
    }
  }
  if (!(peak > 0.0)) throw NumericalError("effective_length: degenerate profile, zero field");

  // The sampled maximum sits up to half a sample off the true antinode;
  // refine it with the parabola through the three surrounding samples, but
  // only within one medium (|nE|^2 jumps at interfaces).
  if (i_peak > 0 && i_peak + 1 < n && profile.n_of_z[i_peak - 1] == profile.n_of_z[i_peak] &&
      profile.n_of_z[i_peak + 1] == profile.n_of_z[i_peak]) {
    const double h_left = profile.z_nm[i_peak] - profile.z_nm[i_peak - 1];
    const double h_right = profile.z_nm[i_peak + 1] - profile.z_nm[i_peak];
    if (std::abs(h_left - h_right) < 1e-9 * h_left) {
      const double fm = std::norm(profile.n_of_z[i_peak - 1] * profile.e_of_z[i_peak - 1]);
      const double f0 = peak;
      const double fp = std::norm(profile.n_of_z[i_peak + 1] * profile.e_of_z[i_peak + 1]);
      const double denom = fm - 2.0 * f0 + fp;
      if (denom < 0.0) {
        const double vertex = f0 - 0.125 * (fp - fm) * (fp - fm) / denom;
        peak = std::max(peak, vertex);
      }
    }
  }
  return integral / peak / 1000.0;
}

double mode_volume_lambda3(double w0_um, double l_eff_um, double zpl_wavelength_nm) {
  if (!(w0_um > 0.0) || !(l_eff_um > 0.0) || !(zpl_wavelength_nm > 0.0)) {
    throw DataError("mode_volume: inputs must be positive");
  }
  const double lambda_um = zpl_wavelength_nm / 1000.0;
  return std::numbers::pi * w0_um * w0_um * l_eff_um / 4.0 / (lambda_um * lambda_um * lambda_um);
}

double gaussian_waist_um(double fiber_roc_um, double air_gap_um, double membrane_thickness_um,
                         double membrane_index, double wavelength_nm) {
  if (!(air_gap_um >= 0.0) || !(membrane_thickness_um >= 0.0) || !(membrane_index >= 1.0)) {
    throw DataError("gaussian_waist: invalid geometry");
  }
  // Plano-concave equivalent: the slab shortens the propagation path to d/n.
  const double effective_length_um = air_gap_um + membrane_thickness_um / membrane_index;
  if (!std::isfinite(fiber_roc_um) || !(fiber_roc_um > effective_length_um)) {
    throw DataError("gaussian_waist: unstable resonator (radius of curvature " +
                    std::to_string(fiber_roc_um) + " um must exceed the effective length " +
                    std::to_string(effective_length_um) + " um)");
  }
  const double lambda_um = wavelength_nm / 1000.0;
  // Wavefront curvature matches the concave mirror: z_R^2 = L (R - L).
  const double rayleigh_sq = effective_length_um * (fiber_roc_um - effective_length_um);
  return std::sqrt(lambda_um / std::numbers::pi * std::sqrt(rayleigh_sq));
}

double purcell_ideal(double quality_factor, double mode_volume_lambda3, double host_index) {
  if (!(quality_factor >= 0.0) || !(mode_volume_lambda3 > 0.0) || !(host_index > 0.0)) {
    throw DataError("purcell_ideal: Q must be >= 0 and V, n positive");
  }
  return 3.0 * quality_factor /
         (4.0 * std::numbers::pi * std::numbers::pi * mode_volume_lambda3 *
          host_index * host_index * host_index);
}

double purcell_effective(double tau0_ns, double tau_cav_ns, bool* anti_enhancement) {
  if (!(tau0_ns > 0.0) || !(tau_cav_ns > 0.0)) {
    throw DataError("purcell_effective: lifetimes must be positive");
  }
  const double c_eff = tau0_ns / tau_cav_ns - 1.0;
  if (anti_enhancement) *anti_enhancement = c_eff < 0.0;
  return c_eff;
}

double purcell_corrected(double c_eff, double debye_waller, double quantum_efficiency) {
  if (!(debye_waller > 0.0) || debye_waller > 1.0 || !(quantum_efficiency > 0.0) ||
      quantum_efficiency > 1.0) {
    throw DataError("purcell_corrected: DWF and QE must lie in (0, 1]");
  }
  return c_eff / (debye_waller * quantum_efficiency);
}

double lifetime_vs_detuning_ns(const EmitterParams& emitter, double c_eff_peak,
                               double linewidth_fwhm_ghz, double detuning_ghz) {
  if (!(linewidth_fwhm_ghz > 0.0)) {
    throw DataError("lifetime_vs_detuning: linewidth must be positive");
  }
  if (!(emitter.free_lifetime_tau0_ns > 0.0)) {
    throw DataError("lifetime_vs_detuning: free lifetime must be positive");
  }
  const double u = 2.0 * detuning_ghz / linewidth_fwhm_ghz;
  return emitter.free_lifetime_tau0_ns / (1.0 + c_eff_peak / (1.0 + u * u));
}

}  // namespace fpcav
