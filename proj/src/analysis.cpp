#include "fpcav/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fpcav {

void validate_trace(const Trace& trace) {
  if (trace.x.size() != trace.y.size()) {
    throw DataError("trace: x and y lengths differ (" + std::to_string(trace.x.size()) + " vs " +
                    std::to_string(trace.y.size()) + ")");
  }
  if (trace.x.size() == 0) throw DataError("trace: empty");
  for (Eigen::Index i = 1; i < trace.x.size(); ++i) {
    if (!(trace.x[i] > trace.x[i - 1])) {
      throw DataError("trace: x not strictly increasing at sample " + std::to_string(i) +
                      " (x = " + std::to_string(trace.x[i]) + ")");
    }
  }
}

namespace {

double lorentz(double x, double center, double fwhm) {
  const double u = 2.0 * (x - center) / fwhm;
  return 1.0 / (1.0 + u * u);
}

/// Iterative peak guessing: take the maximum of the residual, estimate the
/// width from the half-maximum crossings, subtract, repeat.
Eigen::VectorXd guess_lorentzians(const Trace& trace, int n_peaks) {
  const Eigen::Index n = trace.x.size();
  const double baseline = trace.y.minCoeff();
  Eigen::ArrayXd res = trace.y - baseline;
  const double dx_med = (trace.x[n - 1] - trace.x[0]) / static_cast<double>(n - 1);

  Eigen::VectorXd p(1 + 3 * n_peaks);
  p[0] = baseline;
  for (int k = 0; k < n_peaks; ++k) {
    Eigen::Index imax = 0;
    res.maxCoeff(&imax);
    const double amp = std::max(res[imax], 1e-12);
    const double half = amp / 2.0;
    Eigen::Index left = imax;
    while (left > 0 && res[left] > half) --left;
    Eigen::Index right = imax;
    while (right + 1 < n && res[right] > half) ++right;
    double fwhm = trace.x[right] - trace.x[left];
    if (!(fwhm > 0.0)) fwhm = 4.0 * dx_med;
    p[1 + 3 * k] = amp;
    p[2 + 3 * k] = trace.x[imax];
    p[3 + 3 * k] = fwhm;
    for (Eigen::Index i = 0; i < n; ++i) {
      res[i] -= amp * lorentz(trace.x[i], trace.x[imax], fwhm);
    }
  }
  return p;
}

Eigen::VectorXd lorentzian_residuals(const Trace& trace, const Eigen::VectorXd& p, int n_peaks) {
  Eigen::VectorXd r(trace.x.size());
  for (Eigen::Index i = 0; i < trace.x.size(); ++i) {
    double v = p[0];
    for (int k = 0; k < n_peaks; ++k) {
      v += p[1 + 3 * k] * lorentz(trace.x[i], p[2 + 3 * k], p[3 + 3 * k]);
    }
    r[i] = v - trace.y[i];
  }
  return r;
}

struct PeakTriple {
  double amplitude, center, fwhm;
  double s_amplitude, s_center, s_fwhm;
};

}  // namespace

FitResult fit_lorentzian(const Trace& trace, int n_peaks,
                         const std::optional<Eigen::VectorXd>& init) {
  validate_trace(trace);
  if (n_peaks < 1) throw DataError("fit_lorentzian: n_peaks must be >= 1");
  if (trace.x.size() < 9 * n_peaks) {
    throw DataError("fit_lorentzian: trace too short for " + std::to_string(n_peaks) + " peaks");
  }
  Eigen::VectorXd p0 = init ? *init : guess_lorentzians(trace, n_peaks);
  if (p0.size() != 1 + 3 * n_peaks) {
    throw DataError("fit_lorentzian: init must hold baseline + 3 values per peak");
  }

  const auto residuals = [&](const Eigen::VectorXd& p) {
    return lorentzian_residuals(trace, p, n_peaks);
  };
  const LeastSquaresResult res = fit_least_squares(residuals, p0);

  std::vector<PeakTriple> peaks(static_cast<size_t>(n_peaks));
  for (int k = 0; k < n_peaks; ++k) {
    peaks[static_cast<size_t>(k)] = {res.params[1 + 3 * k],          res.params[2 + 3 * k],
                                     std::abs(res.params[3 + 3 * k]), res.sigma[1 + 3 * k],
                                     res.sigma[2 + 3 * k],            res.sigma[3 + 3 * k]};
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const PeakTriple& a, const PeakTriple& b) { return a.center < b.center; });

  FitResult out;
  out.model = "lorentzian_sum";
  out.params.push_back({"baseline", res.params[0], res.sigma[0]});
  for (int k = 0; k < n_peaks; ++k) {
    const PeakTriple& peak = peaks[static_cast<size_t>(k)];
    const std::string idx = "_" + std::to_string(k + 1);
    out.params.push_back({"amplitude" + idx, peak.amplitude, peak.s_amplitude});
    out.params.push_back({"center" + idx, peak.center, peak.s_center});
    out.params.push_back({"fwhm" + idx, peak.fwhm, peak.s_fwhm});
  }
  out.residual_rms = res.residual_rms;
  out.converged = res.converged;
  out.n_iterations = res.iterations;
  out.message = res.message;
  return out;
}

Slope calibrate_scan_slope(const Trace& trace) {
  validate_trace(trace);
  const Eigen::Index n = trace.x.size();
  if (n < 2) throw DataError("calibrate_scan_slope: need at least 2 samples");
  const double x_mean = trace.x.mean();
  const double y_mean = trace.y.mean();
  const Eigen::ArrayXd dx = trace.x - x_mean;
  const Eigen::ArrayXd dy = trace.y - y_mean;
  const double sxx = (dx * dx).sum();
  if (!(sxx > 0.0)) throw DataError("calibrate_scan_slope: degenerate abscissa");
  Slope slope;
  slope.value = (dx * dy).sum() / sxx;
  if (n > 2) {
    const Eigen::ArrayXd resid = dy - slope.value * dx;
    const double variance = (resid * resid).sum() / static_cast<double>(n - 2);
    slope.sigma = std::sqrt(variance / sxx);
  }
  return slope;
}

FinesseEstimate finesse_from_scan(const Trace& trace) {
  validate_trace(trace);
  const Eigen::Index n = trace.x.size();
  const double baseline = trace.y.minCoeff();
  const double top = trace.y.maxCoeff();
  const double threshold = baseline + 0.5 * (top - baseline);

  // Fundamental peaks: local maxima above half of the global span.
  std::vector<Eigen::Index> peak_idx;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (trace.y[i] >= threshold && trace.y[i] > trace.y[i - 1] && trace.y[i] >= trace.y[i + 1]) {
      peak_idx.push_back(i);
    }
  }
  if (peak_idx.size() < 2) {
    throw DataError("finesse_from_scan: fewer than 2 fundamental peaks detected");
  }

  std::vector<double> centers, widths;
  for (Eigen::Index idx : peak_idx) {
    // Local single-Lorentzian fit in a window reaching halfway to the
    // neighbouring peaks.
    Eigen::Index lo = idx, hi = idx;
    while (lo > 0 && trace.y[lo - 1] < trace.y[lo]) --lo;
    while (hi + 1 < n && trace.y[hi + 1] < trace.y[hi]) ++hi;
    const Eigen::Index count = hi - lo + 1;
    if (count < 9) {
      throw DataError("finesse_from_scan: too few samples across a resonance for a fit");
    }
    Trace window;
    window.x = trace.x.segment(lo, count);
    window.y = trace.y.segment(lo, count);
    const FitResult fit = fit_lorentzian(window, 1);
    if (!fit.converged) continue;
    centers.push_back(fit.value("center_1"));
    widths.push_back(fit.value("fwhm_1"));
  }
  if (centers.size() < 2) {
    throw DataError("finesse_from_scan: fewer than 2 resonances could be fitted");
  }

  std::vector<double> spacings(centers.size() - 1);
  for (size_t i = 0; i + 1 < centers.size(); ++i) spacings[i] = centers[i + 1] - centers[i];

  auto mean_std = [](const std::vector<double>& v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double value : v) ss += (value - mean) * (value - mean);
    const double sem = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) /
                                                static_cast<double>(v.size()))
                                    : 0.0;
    return std::pair<double, double>{mean, sem};
  };
  const auto [mean_spacing, sem_spacing] = mean_std(spacings);
  const auto [mean_fwhm, sem_fwhm] = mean_std(widths);

  FinesseEstimate est;
  est.mean_spacing = mean_spacing;
  est.mean_fwhm = mean_fwhm;
  est.n_peaks = static_cast<int>(centers.size());
  est.finesse = mean_spacing / mean_fwhm;
  est.sigma = est.finesse * std::sqrt(std::pow(sem_spacing / mean_spacing, 2) +
                                      std::pow(sem_fwhm / mean_fwhm, 2));
  return est;
}

ZplDistribution zpl_frequency_distribution(const std::vector<Trace>& spectra_stack,
                                           double dispersion_slope_ghz_per_step, int n_peaks) {
  if (dispersion_slope_ghz_per_step == 0.0) {
    throw DataError("zpl_frequency_distribution: dispersion slope must be nonzero");
  }
  if (spectra_stack.size() < 3) {
    throw DataError("zpl_frequency_distribution: need at least 3 spectra");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(spectra_stack.size());
  Eigen::ArrayXd freq(n), integrated(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Trace& spectrum = spectra_stack[static_cast<size_t>(i)];
    validate_trace(spectrum);
    double sum = 0.0;
    for (Eigen::Index j = 0; j + 1 < spectrum.x.size(); ++j) {
      sum += 0.5 * (spectrum.y[j] + spectrum.y[j + 1]) * (spectrum.x[j + 1] - spectrum.x[j]);
    }
    freq[i] = static_cast<double>(i) * dispersion_slope_ghz_per_step;
    integrated[i] = sum;
  }

  ZplDistribution out;
  out.integrated.x_unit = "ghz";
  out.integrated.y_unit = "counts";
  if (dispersion_slope_ghz_per_step > 0.0) {
    out.integrated.x = freq;
    out.integrated.y = integrated;
  } else {
    out.integrated.x = freq.reverse();
    out.integrated.y = integrated.reverse();
  }

  if (n_peaks > 0) {
    out.fit = fit_lorentzian(out.integrated, n_peaks);
    return out;
  }

  // Model selection by residual threshold: grow the peak count while it still
  // buys a substantial residual reduction.
  FitResult best = fit_lorentzian(out.integrated, 1);
  for (int k = 2; k <= 8; ++k) {
    if (out.integrated.x.size() < 9 * k) break;
    FitResult next = fit_lorentzian(out.integrated, k);
    if (!next.converged) break;
    if (next.residual_rms < 0.8 * best.residual_rms) {
      best = std::move(next);
    } else {
      break;
    }
  }
  out.fit = std::move(best);
  return out;
}

FitResult fit_lifetime(const Trace& histogram, double t_start_ns) {
  validate_trace(histogram);
  std::vector<double> xs, ys;
  for (Eigen::Index i = 0; i < histogram.x.size(); ++i) {
    if (histogram.x[i] >= t_start_ns) {
      xs.push_back(histogram.x[i]);
      ys.push_back(histogram.y[i]);
    }
  }
  if (xs.size() < 8) throw DataError("fit_lifetime: fewer than 8 samples after t_start");
  const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Map<const Eigen::ArrayXd> x(xs.data(), n), y(ys.data(), n);

  // Initial guesses: offset from the tail, decay rate from a log-linear fit.
  const Eigen::Index tail = std::max<Eigen::Index>(n / 10, 2);
  double b0 = y.tail(tail).mean();
  double a0 = std::max(y[0] - b0, 1e-9);
  double tau0 = (x[n - 1] - x[0]) / 3.0;
  {
    std::vector<double> lx, ly;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = y[i] - b0;
      if (v > 1e-12 * std::max(a0, 1.0)) {
        lx.push_back(x[i]);
        ly.push_back(std::log(v));
      }
    }
    if (lx.size() >= 3) {
      Trace logtrace;
      logtrace.x = Eigen::Map<const Eigen::ArrayXd>(lx.data(), static_cast<Eigen::Index>(lx.size()));
      logtrace.y = Eigen::Map<const Eigen::ArrayXd>(ly.data(), static_cast<Eigen::Index>(ly.size()));
      const Slope slope = calibrate_scan_slope(logtrace);
      if (slope.value < -1e-12) {
        tau0 = -1.0 / slope.value;
        a0 = std::exp(logtrace.y[0] + x[0] / tau0);
      }
    }
  }

  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      r[i] = p[0] * std::exp(-x[i] / std::max(p[1], 1e-9)) + p[2] - y[i];
    }
    return r;
  };
  Eigen::VectorXd init(3);
  init << a0, tau0, b0;
  const LeastSquaresResult res = fit_least_squares(residuals, init);

  FitResult out;
  out.model = "monoexponential";
  out.params.push_back({"amplitude", res.params[0], res.sigma[0]});
  out.params.push_back({"tau_ns", res.params[1], res.sigma[1]});
  out.params.push_back({"offset", res.params[2], res.sigma[2]});
  out.residual_rms = res.residual_rms;
  out.n_iterations = res.iterations;

  const double span = y.maxCoeff() - y.minCoeff();
  const bool decaying = res.params[0] > 0.0 && res.params[1] > 0.0 &&
                        res.params[0] > 1e-6 * std::max(span, 1.0) && span > 0.0;
  out.converged = res.converged && decaying;
  out.message = decaying ? res.message : "no positive decay detected";
  return out;
}

std::vector<std::pair<double, double>> default_g2_exclusions() {
  return {{-22.0, -12.0}, {12.0, 22.0}};
}

FitResult fit_g2_pulsed(const CorrelationHistogram& histogram,
                        const std::vector<std::pair<double, double>>& exclusion_windows_ns) {
  const Eigen::Index n = histogram.tau_ns.size();
  if (n != histogram.coincidences.size() || n < 16) {
    throw DataError("fit_g2_pulsed: malformed histogram");
  }
  const double period = histogram.repetition_period_ns;
  if (!(period > 0.0)) throw DataError("fit_g2_pulsed: repetition period must be positive");
  const double span = histogram.tau_ns[n - 1] - histogram.tau_ns[0];
  if (span < 5.0 * period) {
    throw DataError("fit_g2_pulsed: histogram must span at least 5 repetition periods");
  }

  auto excluded = [&](double tau) {
    for (const auto& [lo, hi] : exclusion_windows_ns) {
      if (tau >= lo && tau <= hi) return true;
    }
    return false;
  };

  std::vector<double> taus, counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!excluded(histogram.tau_ns[i])) {
      taus.push_back(histogram.tau_ns[i]);
      counts.push_back(histogram.coincidences[i]);
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(taus.size());
  if (m < 12) throw DataError("fit_g2_pulsed: exclusion windows leave too few bins");

  const int k_max = static_cast<int>(std::floor(
      std::max(std::abs(histogram.tau_ns[0]), std::abs(histogram.tau_ns[n - 1])) / period));
  // The central-peak amplitude is only constrained by bins reasonably close
  // to zero delay; when the exclusion windows swallow that whole region the
  // ratio is unidentifiable.
  bool central_seen = false;
  for (double tau : taus) {
    if (std::abs(tau) < 0.3 * period) central_seen = true;
  }
  if (!central_seen) {
    throw NumericalError("fit_g2_pulsed: all central-peak bins excluded, g2(0) unidentifiable");
  }

  // Parameters: [tau_decay, period, A_{-k_max} .. A_{+k_max}].
  const int n_amp = 2 * k_max + 1;
  Eigen::VectorXd init(2 + n_amp);
  const double bin = histogram.tau_ns[1] - histogram.tau_ns[0];
  init[0] = std::max(2.0 * bin, period / 20.0);
  init[1] = period;
  for (int k = -k_max; k <= k_max; ++k) {
    double nearest = 0.0;
    double best = std::numeric_limits<double>::max();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = std::abs(taus[static_cast<size_t>(i)] - k * period);
      if (d < best) {
        best = d;
        nearest = counts[static_cast<size_t>(i)];
      }
    }
    init[2 + k + k_max] = std::max(nearest, 0.0);
  }

  auto residuals = [&](const Eigen::VectorXd& p) {
    const double tau_d = std::max(std::abs(p[0]), 1e-6);
    const double per = p[1];
    Eigen::VectorXd r(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double tau = taus[static_cast<size_t>(i)];
      double v = 0.0;
      for (int k = -k_max; k <= k_max; ++k) {
        v += p[2 + k + k_max] * std::exp(-std::abs(tau - k * per) / tau_d);
      }
      r[i] = v - counts[static_cast<size_t>(i)];
    }
    return r;
  };
  const LeastSquaresResult res = fit_least_squares(residuals, init);

  const double a0 = res.params[2 + k_max];
  double side_sum = 0.0, side_var = 0.0;
  for (int k = -k_max; k <= k_max; ++k) {
    if (k == 0) continue;
    side_sum += res.params[2 + k + k_max];
    side_var += res.sigma[2 + k + k_max] * res.sigma[2 + k + k_max];
  }
  const double side_mean = side_sum / (n_amp - 1);
  const double side_mean_sigma = std::sqrt(side_var) / (n_amp - 1);
  if (!(side_mean > 0.0)) {
    throw NumericalError("fit_g2_pulsed: side peaks vanish, ratio undefined");
  }
  const double g2 = a0 / side_mean;
  const double g2_sigma =
      std::sqrt(std::pow(res.sigma[2 + k_max] / side_mean, 2) +
                std::pow(a0 * side_mean_sigma / (side_mean * side_mean), 2));

  FitResult out;
  out.model = "g2_pulsed_comb";
  out.params.push_back({"g2_zero", g2, g2_sigma});
  out.params.push_back({"tau_decay_ns", std::abs(res.params[0]), res.sigma[0]});
  out.params.push_back({"peak_period_ns", res.params[1], res.sigma[1]});
  out.params.push_back({"central_area", 2.0 * a0 * std::abs(res.params[0]), 0.0});
  out.params.push_back({"mean_side_area", 2.0 * side_mean * std::abs(res.params[0]), 0.0});
  out.residual_rms = res.residual_rms;
  out.converged = res.converged;
  out.n_iterations = res.iterations;
  out.message = res.message;
  out.exclusion_windows = exclusion_windows_ns;
  return out;
}

NoiseRms noise_rms_from_fft(const Trace& amplitude_spectrum, double finesse,
                            double wavelength_nm, double f_max_hz) {
  validate_trace(amplitude_spectrum);
  if (!(finesse > 0.0)) throw DataError("noise_rms_from_fft: finesse must be positive");
  if (!(wavelength_nm > 0.0)) throw DataError("noise_rms_from_fft: wavelength must be positive");

  // Lorentzian side-of-fringe slope: a length excursion of one linewidth
  // (lambda / 2F) changes the relative transmission by one.
  const double pm_per_rel = wavelength_nm * 1000.0 / (2.0 * finesse);

  NoiseRms out;
  out.cumulative.x_unit = "hz";
  out.cumulative.y_unit = "pm";
  out.cumulative.x = amplitude_spectrum.x;
  out.cumulative.y.resize(amplitude_spectrum.x.size());
  double power = 0.0;  // accumulated sigma^2 in pm^2
  for (Eigen::Index i = 0; i < amplitude_spectrum.x.size(); ++i) {
    if (amplitude_spectrum.x[i] <= f_max_hz) {
      const double amp_pm = amplitude_spectrum.y[i] * pm_per_rel;
      power += 0.5 * amp_pm * amp_pm;  // sinusoid amplitude -> RMS^2
    }
    out.cumulative.y[i] = std::sqrt(power);
  }
  out.sigma_rms_pm = std::sqrt(power);
  return out;
}

LineAggregate aggregate_line_series(const std::vector<FitResult>& fits) {
  std::vector<double> widths;
  for (const FitResult& fit : fits) {
    if (!fit.converged) continue;
    for (const FitParam& p : fit.params) {
      if (p.name.rfind("fwhm", 0) == 0) widths.push_back(p.value);
    }
  }
  if (widths.empty()) {
    throw DataError("aggregate_line_series: no converged fits with a FWHM parameter");
  }
  LineAggregate agg;
  agg.n_used = static_cast<int>(widths.size());
  agg.mean_fwhm = std::accumulate(widths.begin(), widths.end(), 0.0) /
                  static_cast<double>(widths.size());
  double ss = 0.0;
  for (double w : widths) ss += (w - agg.mean_fwhm) * (w - agg.mean_fwhm);
  agg.std_fwhm = std::sqrt(ss / static_cast<double>(widths.size()));
  return agg;
}

}  // namespace fpcav
