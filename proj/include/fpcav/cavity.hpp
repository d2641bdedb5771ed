#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpcav/fit.hpp"
#include "fpcav/tmm.hpp"

namespace fpcav {

/// Fiber mirror + air gap + membrane + planar mirror, in light-path order.
///
/// Mirror stacks are stored as deposited: ambient = mirror substrate glass,
/// layers outward, substrate = vacuum (the gap side). The planar mirror is
/// traversed in reverse when the full system is flattened. `excess_loss_ppm`
/// is a lumped per-round-trip scattering/absorption loss applied only in the
/// finesse bookkeeping; the transfer-matrix model itself stays lossless.
struct CavityConfig {
  StackSpec fiber_mirror;
  double air_gap_nm = 0.0;
  std::optional<Layer> membrane;
  StackSpec planar_mirror;
  double excess_loss_ppm = 0.0;
};

CavityConfig assemble(const StackSpec& fiber_mirror, double air_gap_nm,
                      std::optional<Layer> membrane, const StackSpec& planar_mirror,
                      double excess_loss_ppm = 0.0);

CavityConfig with_gap(CavityConfig cavity, double air_gap_nm);

/// Full layered system, fiber substrate through planar substrate, with the
/// gap as an air layer of the fiber mirror's exit medium.
StackSpec flattened(const CavityConfig& cavity);

/// Membrane + planar mirror composite as seen from the air gap. Its
/// transmission is the membrane-dressed effective planar-mirror transmission.
StackSpec membrane_dressed_planar(const CavityConfig& cavity);

struct Interval {
  double lo_nm = 0.0;
  double hi_nm = 0.0;
};

/// z range occupied by the membrane inside flattened(cavity); empty when the
/// cavity has no membrane.
std::optional<Interval> membrane_interval(const CavityConfig& cavity);

/// Crude free-spectral-range estimate at `wavelength_nm` from the total
/// optical thickness (mirror stacks fully counted, so the estimate errs low).
double estimate_fsr_nm(const CavityConfig& cavity, double wavelength_nm);

struct Resonance {
  double wavelength_nm = 0.0;
  double fwhm_nm = 0.0;
  double t_peak = 0.0;
};

/// Transmission resonances of the assembled cavity in [lambda_lo, lambda_hi]:
/// coarse scan at ~FSR/200 spacing, golden-section refinement of each peak to
/// 1e-4 nm, FWHM from a local Lorentzian fit. Sorted by wavelength; an empty
/// list simply means no peak in range.
std::vector<Resonance> find_resonances(const CavityConfig& cavity, double lambda_lo_nm,
                                       double lambda_hi_nm, Polarization pol,
                                       bool with_fwhm = true);

/// F = 2 pi / (T1 + T2 + L), arguments in ppm.
double finesse_from_losses(double t1_ppm, double t2_ppm, double extra_loss_ppm);

struct FinessePoint {
  double wavelength_nm = 0.0;
  double t1_ppm = 0.0;  // membrane-dressed planar-mirror transmission
  double t2_ppm = 0.0;  // bare fiber-mirror transmission
  double finesse = 0.0;
};

/// Finesse vs wavelength from the model mirror transmissions at each
/// wavelength (planar mirror dressed by the membrane) plus the lumped excess
/// loss of the config.
std::vector<FinessePoint> finesse_spectrum(const CavityConfig& cavity,
                                           const Eigen::ArrayXd& wavelengths_nm, Polarization pol,
                                           int threads = 1);

enum class ModeCharacter { untagged, air_like, dielectric_like, mixed };

const char* to_string(ModeCharacter character);

struct BranchPoint {
  double gap_nm = 0.0;
  double wavelength_nm = 0.0;
  double membrane_fraction = -1.0;  // filled by classify_modes, else -1
  ModeCharacter character = ModeCharacter::untagged;
};

struct Branch {
  Polarization pol = Polarization::ordinary;
  std::vector<BranchPoint> points;
};

/// Cavity transmission over (gap, wavelength) plus the resonance branches
/// tracked across gap steps, for both polarizations.
struct ModeMap {
  Eigen::ArrayXd gap_nm;
  Eigen::ArrayXd wavelength_nm;
  Eigen::MatrixXd transmission_ordinary;       // rows: gaps, cols: wavelengths
  Eigen::MatrixXd transmission_extraordinary;
  std::vector<Branch> branches;
  std::vector<std::string> warnings;           // ambiguous branch continuations
};

ModeMap dispersion_map(const CavityConfig& cavity, const Eigen::ArrayXd& gaps_nm,
                       const Eigen::ArrayXd& wavelengths_nm, int threads = 1);

/// Fraction of the integrated n^2 |E|^2 energy inside the membrane for the
/// cavity resonant at `wavelength_nm` (0 when there is no membrane).
double membrane_energy_fraction(const CavityConfig& cavity, double wavelength_nm,
                                Polarization pol);

/// Tags every branch point air-like (< 0.35), dielectric-like (> 0.65) or
/// mixed by its membrane energy fraction, computed from the on-resonance
/// field profile.
void classify_modes(ModeMap& map, const CavityConfig& cavity);

/// Least squares over (membrane thickness, global gap offset) matching the
/// simulated resonances to the measured branch points. Reports thickness_nm
/// and gap_offset_nm with 1-sigma uncertainties; a map carrying no thickness
/// information comes back converged=false with diverging sigma.
FitResult fit_membrane_thickness(const ModeMap& measured, const CavityConfig& cavity_template,
                                 double d_initial_nm);

struct LossBudget {
  double wavelength_nm = 0.0;
  double t1_ppm = 0.0;
  double t2_ppm = 0.0;
  double measured_finesse = 0.0;
  double inferred_extra_loss_ppm = 0.0;
  std::string warning;
};

/// L = 2 pi / F - T1(lambda) - T2(lambda), with the membrane-dressed model
/// transmissions. A significantly negative L sets a warning instead of
/// throwing: the model transmissions then overestimate the real losses.
LossBudget loss_budget(double measured_finesse, const CavityConfig& cavity, double wavelength_nm,
                       Polarization pol = Polarization::extraordinary);

}  // namespace fpcav
