#include "fpcav/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace fpcav {

namespace {

constexpr double kGoldenTolNm = 1e-4;
constexpr double kAirLikeThreshold = 0.35;
constexpr double kDielectricLikeThreshold = 0.65;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

/// Golden-section maximization of f on [a, b]; assumes a single interior peak.
template <typename F>
double golden_max(const F& f, double a, double b, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  return 0.5 * (a + b);
}

struct PeakEstimate {
  double center_nm = 0.0;
  double t_peak = 0.0;
};

/// Coarse local maxima of T(lambda) on a uniform grid, each refined by
/// golden-section search between its neighbours.
template <typename F>
std::vector<PeakEstimate> scan_peaks(const F& transmission, double lo, double hi, double spacing,
                                     double refine_tol) {
  const int n = std::max(3, static_cast<int>(std::ceil((hi - lo) / spacing)) + 1);
  std::vector<double> t(static_cast<size_t>(n));
  auto grid = [&](int i) { return lo + (hi - lo) * static_cast<double>(i) / (n - 1); };
  for (int i = 0; i < n; ++i) t[static_cast<size_t>(i)] = transmission(grid(i));

  std::vector<PeakEstimate> peaks;
  for (int i = 1; i + 1 < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (t[si] > t[si - 1] && t[si] >= t[si + 1]) {
      const double center = golden_max(transmission, grid(i - 1), grid(i + 1), refine_tol);
      peaks.push_back({center, transmission(center)});
    }
  }
  return peaks;
}

/// Half-maximum crossing of T around a refined peak, by outward doubling then
/// bisection. `direction` is +1 or -1.
template <typename F>
double half_crossing(const F& transmission, double center, double half, double direction,
                     double max_span) {
  double step = 16.0 * kGoldenTolNm;
  double inside = center;
  double outside = center + direction * step;
  while (transmission(outside) > half) {
    inside = outside;
    step *= 2.0;
    outside = center + direction * step;
    if (step > max_span) return outside;  // peak broader than the search span
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (inside + outside);
    if (transmission(mid) > half) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return 0.5 * (inside + outside);
}

/// FWHM via a local four-parameter Lorentzian fit seeded from the half-maximum
/// crossings.
template <typename F>
double lorentzian_fwhm(const F& transmission, double center, double t_peak, double max_span) {
  const double half = 0.5 * t_peak;
  const double left = half_crossing(transmission, center, half, -1.0, max_span);
  const double right = half_crossing(transmission, center, half, +1.0, max_span);
  const double fwhm0 = std::max(right - left, 4.0 * kGoldenTolNm);

  const int n_samples = 31;
  Eigen::ArrayXd x(n_samples), y(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    x[i] = center + 2.0 * fwhm0 * (static_cast<double>(i) / (n_samples - 1) - 0.5);
    y[i] = transmission(x[i]);
  }
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(n_samples);
    for (int i = 0; i < n_samples; ++i) {
      const double u = 2.0 * (x[i] - p[1]) / p[2];
      r[i] = p[3] + p[0] / (1.0 + u * u) - y[i];
    }
    return r;
  };
  Eigen::VectorXd init(4);
  init << t_peak, center, fwhm0, 0.0;
  LeastSquaresOptions opts;
  opts.max_iterations = 60;
  const LeastSquaresResult res = fit_least_squares(residuals, init, opts);
  const double fitted = std::abs(res.params[2]);
  return res.converged && fitted > 0.0 ? fitted : fwhm0;
}

double trapezoid_abs_ne2(const Eigen::ArrayXd& z, const Eigen::ArrayXcd& n,
                         const Eigen::ArrayXcd& e, double lo, double hi) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i + 1 < z.size(); ++i) {
    if (z[i] < lo || z[i + 1] > hi) continue;
    const double fi = std::norm(n[i] * e[i]);
    const double fj = std::norm(n[i + 1] * e[i + 1]);
    sum += 0.5 * (fi + fj) * (z[i + 1] - z[i]);
  }
  return sum;
}

}  // namespace

CavityConfig assemble(const StackSpec& fiber_mirror, double air_gap_nm,
                      std::optional<Layer> membrane, const StackSpec& planar_mirror,
                      double excess_loss_ppm) {
  if (air_gap_nm < 0.0) throw DataError("assemble: air gap must be >= 0");
  if (membrane && !(membrane->thickness_nm > 0.0)) {
    throw DataError("assemble: membrane thickness must be > 0");
  }
  if (excess_loss_ppm < 0.0) throw DataError("assemble: excess loss must be >= 0");
  CavityConfig cavity;
  cavity.fiber_mirror = fiber_mirror;
  cavity.air_gap_nm = air_gap_nm;
  cavity.membrane = std::move(membrane);
  cavity.planar_mirror = planar_mirror;
  cavity.excess_loss_ppm = excess_loss_ppm;
  return cavity;
}

CavityConfig with_gap(CavityConfig cavity, double air_gap_nm) {
  if (air_gap_nm < 0.0) throw DataError("with_gap: air gap must be >= 0");
  cavity.air_gap_nm = air_gap_nm;
  return cavity;
}

StackSpec flattened(const CavityConfig& cavity) {
  StackSpec out;
  out.ambient = cavity.fiber_mirror.ambient;
  out.substrate = cavity.planar_mirror.ambient;
  out.layers = cavity.fiber_mirror.layers;
  if (cavity.air_gap_nm > 0.0) {
    out.layers.push_back({cavity.fiber_mirror.substrate, cavity.air_gap_nm});
  }
  if (cavity.membrane) out.layers.push_back(*cavity.membrane);
  const StackSpec planar = reversed(cavity.planar_mirror);
  out.layers.insert(out.layers.end(), planar.layers.begin(), planar.layers.end());
  return out;
}

StackSpec membrane_dressed_planar(const CavityConfig& cavity) {
  StackSpec out = reversed(cavity.planar_mirror);  // vacuum side first
  if (cavity.membrane) out.layers.insert(out.layers.begin(), *cavity.membrane);
  return out;
}

std::optional<Interval> membrane_interval(const CavityConfig& cavity) {
  if (!cavity.membrane) return std::nullopt;
  const double z0 = cavity.fiber_mirror.total_thickness_nm() + cavity.air_gap_nm;
  return Interval{z0, z0 + cavity.membrane->thickness_nm};
}

double estimate_fsr_nm(const CavityConfig& cavity, double wavelength_nm) {
  const StackSpec sys = flattened(cavity);
  double optical = 0.0;
  for (const Layer& layer : sys.layers) {
    optical += layer.medium.index(wavelength_nm, Polarization::ordinary).real() *
               layer.thickness_nm;
  }
  optical = std::max(optical, wavelength_nm);
  return wavelength_nm * wavelength_nm / (2.0 * optical);
}

std::vector<Resonance> find_resonances(const CavityConfig& cavity, double lambda_lo_nm,
                                       double lambda_hi_nm, Polarization pol, bool with_fwhm) {
  if (!(lambda_hi_nm > lambda_lo_nm) || !(lambda_lo_nm > 0.0)) {
    throw DataError("find_resonances: invalid wavelength range");
  }
  const StackSpec sys = flattened(cavity);
  auto transmission = [&](double wl) { return stack_response(sys, wl, pol).T; };

  const double fsr = estimate_fsr_nm(cavity, 0.5 * (lambda_lo_nm + lambda_hi_nm));
  const double spacing = fsr / 200.0;
  const auto peaks = scan_peaks(transmission, lambda_lo_nm, lambda_hi_nm, spacing, kGoldenTolNm);

  std::vector<Resonance> out;
  out.reserve(peaks.size());
  for (const PeakEstimate& peak : peaks) {
    Resonance res;
    res.wavelength_nm = peak.center_nm;
    res.t_peak = peak.t_peak;
    res.fwhm_nm =
        with_fwhm ? lorentzian_fwhm(transmission, peak.center_nm, peak.t_peak, fsr) : 0.0;
    out.push_back(res);
  }
  std::sort(out.begin(), out.end(),
            [](const Resonance& a, const Resonance& b) { return a.wavelength_nm < b.wavelength_nm; });
  return out;
}

double finesse_from_losses(double t1_ppm, double t2_ppm, double extra_loss_ppm) {
  if (t1_ppm < 0.0 || t2_ppm < 0.0 || extra_loss_ppm < 0.0) {
    throw DataError("finesse_from_losses: losses must be >= 0");
  }
  const double total = (t1_ppm + t2_ppm + extra_loss_ppm) * 1e-6;
  if (!(total > 0.0)) throw DataError("finesse_from_losses: total loss is zero");
  return 2.0 * std::numbers::pi / total;
}

std::vector<FinessePoint> finesse_spectrum(const CavityConfig& cavity,
                                           const Eigen::ArrayXd& wavelengths_nm, Polarization pol,
                                           int threads) {
  const Eigen::Index n = wavelengths_nm.size();
  if (n < 1) throw DataError("finesse_spectrum: empty wavelength grid");
  const StackSpec dressed = membrane_dressed_planar(cavity);
  const StackSpec fiber = cavity.fiber_mirror;
  std::vector<FinessePoint> out(static_cast<size_t>(n));

  auto eval = [&](Eigen::Index i) {
    const double wl = wavelengths_nm[i];
    FinessePoint p;
    p.wavelength_nm = wl;
    p.t1_ppm = stack_response(dressed, wl, pol).T * 1e6;
    p.t2_ppm = stack_response(fiber, wl, pol).T * 1e6;
    p.finesse = finesse_from_losses(p.t1_ppm, p.t2_ppm, cavity.excess_loss_ppm);
    out[static_cast<size_t>(i)] = p;
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp<int>(n_threads, 1, static_cast<int>(n));
  if (n_threads == 1) {
    for (Eigen::Index i = 0; i < n; ++i) eval(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t]() {
        for (Eigen::Index i = t; i < n; i += n_threads) eval(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

const char* to_string(ModeCharacter character) {
  switch (character) {
    case ModeCharacter::air_like: return "air_like";
    case ModeCharacter::dielectric_like: return "dielectric_like";
    case ModeCharacter::mixed: return "mixed";
    default: return "untagged";
  }
}

ModeMap dispersion_map(const CavityConfig& cavity, const Eigen::ArrayXd& gaps_nm,
                       const Eigen::ArrayXd& wavelengths_nm, int threads) {
  const Eigen::Index n_gaps = gaps_nm.size();
  const Eigen::Index n_wl = wavelengths_nm.size();
  if (n_gaps < 2) throw DataError("dispersion_map: need at least 2 gap values");
  if (n_wl < 2) throw DataError("dispersion_map: need at least 2 wavelengths");
  for (Eigen::Index i = 1; i < n_gaps; ++i) {
    if (!(gaps_nm[i] > gaps_nm[i - 1])) throw DataError("dispersion_map: gaps must be sorted");
  }

  ModeMap map;
  map.gap_nm = gaps_nm;
  map.wavelength_nm = wavelengths_nm;
  map.transmission_ordinary.resize(n_gaps, n_wl);
  map.transmission_extraordinary.resize(n_gaps, n_wl);

  // Transmission matrix, cell-parallel with a deterministic layout.
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp<int>(n_threads, 1, static_cast<int>(n_gaps));
  auto fill_rows = [&](int offset, int stride) {
    for (Eigen::Index g = offset; g < n_gaps; g += stride) {
      const StackSpec sys = flattened(with_gap(cavity, gaps_nm[g]));
      for (Eigen::Index w = 0; w < n_wl; ++w) {
        map.transmission_ordinary(g, w) =
            stack_response(sys, wavelengths_nm[w], Polarization::ordinary).T;
        map.transmission_extraordinary(g, w) =
            stack_response(sys, wavelengths_nm[w], Polarization::extraordinary).T;
      }
    }
  };
  if (n_threads == 1) {
    fill_rows(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(fill_rows, t, n_threads);
    for (auto& th : pool) th.join();
  }

  // Branch extraction: per-gap resonance lists, greedily continued across gap
  // steps by smallest wavelength jump. The continuation window is half the
  // local mode spacing, taken from the resonance list itself.
  const double lambda_lo = wavelengths_nm[0];
  const double lambda_hi = wavelengths_nm[n_wl - 1];
  const double fsr = estimate_fsr_nm(with_gap(cavity, gaps_nm[0]),
                                     0.5 * (lambda_lo + lambda_hi));

  for (Polarization pol : {Polarization::ordinary, Polarization::extraordinary}) {
    std::vector<size_t> open;  // indices into map.branches still being continued
    for (Eigen::Index g = 0; g < n_gaps; ++g) {
      const auto resonances =
          find_resonances(with_gap(cavity, gaps_nm[g]), lambda_lo, lambda_hi, pol, false);
      std::vector<bool> taken(resonances.size(), false);

      double max_jump = fsr;  // fallback when fewer than two resonances
      if (resonances.size() >= 2) {
        std::vector<double> spacing;
        for (size_t i = 1; i < resonances.size(); ++i) {
          spacing.push_back(resonances[i].wavelength_nm - resonances[i - 1].wavelength_nm);
        }
        std::nth_element(spacing.begin(), spacing.begin() + spacing.size() / 2, spacing.end());
        max_jump = 0.48 * spacing[spacing.size() / 2];
      }

      struct Candidate {
        double dist;
        size_t open_idx;
        size_t res_idx;
      };
      std::vector<Candidate> candidates;
      for (size_t oi = 0; oi < open.size(); ++oi) {
        const Branch& branch = map.branches[open[oi]];
        const double last = branch.points.back().wavelength_nm;
        for (size_t ri = 0; ri < resonances.size(); ++ri) {
          const double d = std::abs(resonances[ri].wavelength_nm - last);
          if (d <= max_jump) candidates.push_back({d, oi, ri});
        }
      }
      std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return resonances[a.res_idx].wavelength_nm < resonances[b.res_idx].wavelength_nm;
      });

      std::vector<bool> continued(open.size(), false);
      for (size_t ci = 0; ci < candidates.size(); ++ci) {
        const Candidate& c = candidates[ci];
        if (continued[c.open_idx] || taken[c.res_idx]) continue;
        if (ci + 1 < candidates.size() && candidates[ci + 1].open_idx == c.open_idx &&
            std::abs(candidates[ci + 1].dist - c.dist) < 1e-6 &&
            candidates[ci + 1].res_idx != c.res_idx) {
          map.warnings.push_back("ambiguous branch continuation at gap " + fmt(gaps_nm[g]) +
                                 " nm (" + std::string(to_string(pol)) +
                                 "): tie broken toward lower wavelength");
        }
        continued[c.open_idx] = true;
        taken[c.res_idx] = true;
        map.branches[open[c.open_idx]].points.push_back(
            {gaps_nm[g], resonances[c.res_idx].wavelength_nm, -1.0, ModeCharacter::untagged});
      }

      std::vector<size_t> still_open;
      for (size_t oi = 0; oi < open.size(); ++oi) {
        if (continued[oi]) still_open.push_back(open[oi]);
      }
      for (size_t ri = 0; ri < resonances.size(); ++ri) {
        if (taken[ri]) continue;
        Branch branch;
        branch.pol = pol;
        branch.points.push_back(
            {gaps_nm[g], resonances[ri].wavelength_nm, -1.0, ModeCharacter::untagged});
        map.branches.push_back(std::move(branch));
        still_open.push_back(map.branches.size() - 1);
      }
      open = std::move(still_open);
    }
  }
  return map;
}

double membrane_energy_fraction(const CavityConfig& cavity, double wavelength_nm,
                                Polarization pol) {
  const auto interval = membrane_interval(cavity);
  if (!interval) return 0.0;
  const StackSpec sys = flattened(cavity);
  const FieldProfile profile = field_profile(sys, wavelength_nm, pol);
  const double total = trapezoid_abs_ne2(profile.z_nm, profile.n_of_z, profile.e_of_z, 0.0,
                                         sys.total_thickness_nm());
  if (!(total > 0.0)) throw NumericalError("membrane_energy_fraction: zero field energy");
  const double inside = trapezoid_abs_ne2(profile.z_nm, profile.n_of_z, profile.e_of_z,
                                          interval->lo_nm, interval->hi_nm);
  return inside / total;
}

void classify_modes(ModeMap& map, const CavityConfig& cavity) {
  for (Branch& branch : map.branches) {
    for (BranchPoint& point : branch.points) {
      const CavityConfig at_gap = with_gap(cavity, point.gap_nm);
      point.membrane_fraction = membrane_energy_fraction(at_gap, point.wavelength_nm, branch.pol);
      if (point.membrane_fraction < kAirLikeThreshold) {
        point.character = ModeCharacter::air_like;
      } else if (point.membrane_fraction > kDielectricLikeThreshold) {
        point.character = ModeCharacter::dielectric_like;
      } else {
        point.character = ModeCharacter::mixed;
      }
    }
  }
}

namespace {

/// Wavelength of the simulated resonance nearest `target_nm`. The FSR
/// estimate errs low (mirror stacks fully counted), so the window is oversized
/// to guarantee at least one resonance.
double nearest_resonance(const CavityConfig& cavity, double target_nm, Polarization pol) {
  const StackSpec sys = flattened(cavity);
  auto transmission = [&](double wl) { return stack_response(sys, wl, pol).T; };
  const double window = 2.2 * estimate_fsr_nm(cavity, target_nm);
  const auto peaks = scan_peaks(transmission, target_nm - window, target_nm + window,
                                window / 250.0, 1e-5);
  if (peaks.empty()) return target_nm + window;  // continuous-ish penalty
  double best = peaks.front().center_nm;
  for (const PeakEstimate& peak : peaks) {
    if (std::abs(peak.center_nm - target_nm) < std::abs(best - target_nm)) {
      best = peak.center_nm;
    }
  }
  return best;
}

}  // namespace

FitResult fit_membrane_thickness(const ModeMap& measured, const CavityConfig& cavity_template,
                                 double d_initial_nm) {
  struct Point {
    double gap_nm;
    double wavelength_nm;
    Polarization pol;
  };
  std::vector<Point> points;
  for (const Branch& branch : measured.branches) {
    for (const BranchPoint& bp : branch.points) {
      points.push_back({bp.gap_nm, bp.wavelength_nm, branch.pol});
    }
  }
  if (points.size() < 4) {
    throw DataError("fit_membrane_thickness: need at least 4 measured branch points");
  }

  auto residuals = [&](const Eigen::VectorXd& p) {
    const double d = p[0];
    const double offset = p[1];
    Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
    CavityConfig cavity = cavity_template;
    if (!cavity.membrane) throw DataError("fit_membrane_thickness: template has no membrane");
    cavity.membrane->thickness_nm = std::max(d, 1.0);
    for (size_t i = 0; i < points.size(); ++i) {
      const double gap = std::max(points[i].gap_nm + offset, 0.0);
      const double sim =
          nearest_resonance(with_gap(cavity, gap), points[i].wavelength_nm, points[i].pol);
      r[static_cast<Eigen::Index>(i)] = sim - points[i].wavelength_nm;
    }
    return r;
  };

  // Mode orders reshuffle when the optical thickness moves by a fraction of
  // an FSR, which litters the landscape with false basins; a coarse scan over
  // the thickness picks the right basin before the damped iteration refines.
  double d_best = d_initial_nm;
  double cost_best = std::numeric_limits<double>::infinity();
  const double span = std::max(0.2 * d_initial_nm, 100.0);
  const int n_scan = 41;
  for (int i = 0; i < n_scan; ++i) {
    Eigen::VectorXd probe(2);
    probe << d_initial_nm - span + 2.0 * span * i / (n_scan - 1), 0.0;
    if (!(probe[0] > 1.0)) continue;
    const double cost = residuals(probe).squaredNorm();
    if (cost < cost_best) {
      cost_best = cost;
      d_best = probe[0];
    }
  }

  Eigen::VectorXd init(2);
  init << d_best, 0.0;
  LeastSquaresOptions opts;
  opts.max_iterations = 60;
  opts.rel_tolerance = 1e-12;
  // Resonance positions are refined to ~1e-5 nm; nm-scale difference steps
  // keep the numeric Jacobian well above that noise floor.
  opts.step_scale.resize(2);
  opts.step_scale << 1.0, 1.0;
  const LeastSquaresResult res = fit_least_squares(residuals, init, opts);

  FitResult out;
  out.model = "membrane_thickness";
  out.params.push_back({"thickness_nm", res.params[0], res.sigma[0]});
  out.params.push_back({"gap_offset_nm", res.params[1], res.sigma[1]});
  out.residual_rms = res.residual_rms;
  out.n_iterations = res.iterations;
  // The simulated resonance positions carry ~1e-5 nm search noise, which can
  // stall the damped iteration below the generic tolerance; branch points
  // matched to well under a picometre are a converged fit by any physical
  // standard.
  out.converged = (res.converged || res.residual_rms < 0.01) && res.identifiable;
  out.message = res.identifiable ? res.message
                                 : "unidentifiable: the map carries no thickness information";
  return out;
}

LossBudget loss_budget(double measured_finesse, const CavityConfig& cavity, double wavelength_nm,
                       Polarization pol) {
  if (!(measured_finesse > 0.0)) throw DataError("loss_budget: finesse must be positive");
  LossBudget budget;
  budget.wavelength_nm = wavelength_nm;
  budget.measured_finesse = measured_finesse;
  budget.t1_ppm = stack_response(membrane_dressed_planar(cavity), wavelength_nm, pol).T * 1e6;
  budget.t2_ppm = stack_response(cavity.fiber_mirror, wavelength_nm, pol).T * 1e6;
  const double total_ppm = 2.0 * std::numbers::pi / measured_finesse * 1e6;
  budget.inferred_extra_loss_ppm = total_ppm - budget.t1_ppm - budget.t2_ppm;
  if (budget.inferred_extra_loss_ppm < -5.0) {
    budget.warning = "model mirror transmissions exceed the measured total loss; "
                     "they overestimate the real losses at this wavelength";
  }
  return budget;
}

}  // namespace fpcav
