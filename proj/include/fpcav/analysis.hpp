#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fpcav/fit.hpp"

namespace fpcav {

/// A measured trace: sorted abscissa with unit metadata plus ordinates.
struct Trace {
  Eigen::ArrayXd x;
  Eigen::ArrayXd y;
  std::string x_unit;  // s, nm, ghz, v, ns, hz, ...
  std::string y_unit;  // counts, volts, rel, pm, ...
};

/// Throws DataError unless x is strictly increasing and sizes match.
void validate_trace(const Trace& trace);

/// Pulsed photon-correlation histogram with uniform bins.
struct CorrelationHistogram {
  Eigen::ArrayXd tau_ns;        // bin centers
  Eigen::ArrayXd coincidences;  // counts per bin, >= 0
  double repetition_period_ns = 0.0;
};

/// Sum of `n_peaks` Lorentzians plus a constant baseline. Initial guesses are
/// taken from iterative peak finding (maximum + half-maximum crossings) when
/// not supplied. Peaks are reported sorted by center as amplitude_k/center_k/
/// fwhm_k. Non-convergence returns a diagnostic result, converged = false.
FitResult fit_lorentzian(const Trace& trace, int n_peaks,
                         const std::optional<Eigen::VectorXd>& init = std::nullopt);

/// Ordinary least-squares slope of a wavemeter ramp, with its standard error.
struct Slope {
  double value = 0.0;  // y-unit per x-unit
  double sigma = 0.0;
};
Slope calibrate_scan_slope(const Trace& wavemeter_trace);

/// Finesse from a transmission scan spanning at least two fundamental
/// resonances: mean adjacent-peak spacing over mean FWHM, uncertainties
/// propagated from the scatter of both.
struct FinesseEstimate {
  double finesse = 0.0;
  double sigma = 0.0;
  double mean_spacing = 0.0;
  double mean_fwhm = 0.0;
  int n_peaks = 0;
};
FinesseEstimate finesse_from_scan(const Trace& trace);

/// Integrates each spectrum of a cavity-step stack, calibrates step index to
/// relative frequency with the local dispersion slope, and fits Lorentzians
/// to the resulting ZPL frequency distribution. n_peaks == 0 selects the
/// model order automatically by residual improvement.
struct ZplDistribution {
  Trace integrated;  // GHz -> integrated counts
  FitResult fit;
};
ZplDistribution zpl_frequency_distribution(const std::vector<Trace>& spectra_stack,
                                           double dispersion_slope_ghz_per_step, int n_peaks = 0);

/// Monoexponential decay A exp(-t/tau) + B fitted for t >= t_start_ns.
/// A trace with no decaying component comes back converged = false.
FitResult fit_lifetime(const Trace& histogram, double t_start_ns);

/// Pulsed g2: a comb of two-sided exponential peaks at multiples of the
/// repetition period with a shared decay time; bins inside the exclusion
/// windows are ignored. g2_zero is the fitted central-peak area over the mean
/// side-peak area (independent of overall count scaling).
FitResult fit_g2_pulsed(const CorrelationHistogram& histogram,
                        const std::vector<std::pair<double, double>>& exclusion_windows_ns = {});

/// Exclusion windows used when the caller does not supply any:
/// +/-17 ns detector-recombination artifacts, 5 ns half width.
std::vector<std::pair<double, double>> default_g2_exclusions();

/// Side-of-fringe length-noise calibration. The spectrum holds one-sided
/// sinusoid amplitudes of the relative transmission; the half-maximum slope
/// of a Lorentzian line converts them to length as dL = dT/Tmax * lambda/(2F).
/// Returns sigma_RMS up to f_max plus the cumulative curve (Hz -> pm).
struct NoiseRms {
  double sigma_rms_pm = 0.0;
  Trace cumulative;
};
NoiseRms noise_rms_from_fft(const Trace& amplitude_spectrum, double finesse,
                            double wavelength_nm, double f_max_hz);

/// Mean and population standard deviation of the FWHM parameters of the
/// converged fits in a series; non-converged fits are dropped.
struct LineAggregate {
  double mean_fwhm = 0.0;
  double std_fwhm = 0.0;
  int n_used = 0;
};
LineAggregate aggregate_line_series(const std::vector<FitResult>& fits);

}  // namespace fpcav
