#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "fpcav/cavity.hpp"
#include "fpcav/config.hpp"

using namespace fpcav;

namespace {

Preset sb_preset() {
  return load_preset(Config::from_file(std::string(FPCAV_PRESET_DIR) + "/SB.cfg"));
}
Preset sa_preset() {
  return load_preset(Config::from_file(std::string(FPCAV_PRESET_DIR) + "/SA.cfg"));
}
Preset bare_preset() {
  return load_preset(Config::from_file(std::string(FPCAV_PRESET_DIR) + "/bare.cfg"));
}

CavityConfig ideal_cavity(double gap_nm, double center_wl) {
  const Medium vac = Medium::constant("vacuum", {1.0, 0.0});
  const Medium mirror = Medium::constant("mirror", {1e4, 0.0});
  StackSpec m;
  m.ambient = vac;
  m.substrate = vac;
  m.layers.push_back({mirror, center_wl / (4.0 * 1e4)});
  return assemble(m, gap_nm, std::nullopt, m, 0.0);
}

double finesse_at(const std::vector<FinessePoint>& series, double wl) {
  double best = 1e18, f = 0.0;
  for (const FinessePoint& p : series) {
    if (std::abs(p.wavelength_nm - wl) < best) {
      best = std::abs(p.wavelength_nm - wl);
      f = p.finesse;
    }
  }
  return f;
}

int count_local_maxima(const std::vector<FinessePoint>& series) {
  int n = 0;
  for (size_t i = 1; i + 1 < series.size(); ++i) {
    if (series[i].finesse > series[i - 1].finesse && series[i].finesse > series[i + 1].finesse) {
      ++n;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("finesse_from_losses: transmission-limited values") {
  CHECK(finesse_from_losses(222.0, 25.0, 0.0) == doctest::Approx(25438.02).epsilon(1e-4));
  CHECK(finesse_from_losses(222.0, 25.0, 0.0) > 25200.0);
  CHECK(finesse_from_losses(222.0, 25.0, 0.0) < 25700.0);
  CHECK(finesse_from_losses(900.0, 100.0, 0.0) == doctest::Approx(6283.19).epsilon(1e-4));
  CHECK(finesse_from_losses(2.0 * std::numbers::pi * 1e6, 0.0, 0.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(finesse_from_losses(0.0, 0.0, 0.0), DataError);
  CHECK_THROWS_AS(finesse_from_losses(-1.0, 10.0, 0.0), DataError);
}

TEST_CASE("finesse_from_losses is strictly decreasing in each argument") {
  const double base = finesse_from_losses(200.0, 50.0, 30.0);
  CHECK(finesse_from_losses(201.0, 50.0, 30.0) < base);
  CHECK(finesse_from_losses(200.0, 51.0, 30.0) < base);
  CHECK(finesse_from_losses(200.0, 50.0, 31.0) < base);
}

TEST_CASE("assemble: validation and flattening") {
  const Preset sb = sb_preset();
  CHECK_THROWS_AS(assemble(sb.fiber_mirror, -1.0, sb.membrane, sb.planar_mirror), DataError);
  Layer bad = *sb.membrane;
  bad.thickness_nm = 0.0;
  CHECK_THROWS_AS(assemble(sb.fiber_mirror, 100.0, bad, sb.planar_mirror), DataError);

  const CavityConfig cavity = assemble(sb.fiber_mirror, 500.0, sb.membrane, sb.planar_mirror);
  const StackSpec sys = flattened(cavity);
  // fiber layers + gap + membrane + planar layers
  CHECK(sys.layers.size() ==
        sb.fiber_mirror.layers.size() + 1 + 1 + sb.planar_mirror.layers.size());
  CHECK(sys.ambient.name() == "fused_silica");
  CHECK(sys.substrate.name() == "fused_silica");
  // Gap of zero contributes no layer
  const StackSpec contact = flattened(assemble(sb.fiber_mirror, 0.0, sb.membrane,
                                               sb.planar_mirror));
  CHECK(contact.layers.size() == sys.layers.size() - 1);
  // Membrane interval sits right after fiber mirror + gap
  const auto interval = membrane_interval(cavity);
  REQUIRE(interval.has_value());
  CHECK(interval->lo_nm ==
        doctest::Approx(sb.fiber_mirror.total_thickness_nm() + 500.0).epsilon(1e-12));
  CHECK(interval->hi_nm == doctest::Approx(interval->lo_nm + 2850.0).epsilon(1e-12));
}

TEST_CASE("find_resonances: ideal Fabry-Perot modes at 2L/m") {
  const double wl = 1000.0;
  const double gap = 3000.0;
  const CavityConfig cavity = ideal_cavity(gap, wl);
  const auto resonances = find_resonances(cavity, 820.0, 1100.0, Polarization::ordinary, false);
  REQUIRE(resonances.size() >= 2);
  for (const Resonance& r : resonances) {
    const double m = std::round(2.0 * gap / r.wavelength_nm);
    CHECK(r.wavelength_nm == doctest::Approx(2.0 * gap / m).epsilon(1e-5));
  }
  // 2L/m for m = 6 lies at the mirror design wavelength: exact resonance.
  bool found_1000 = false;
  for (const Resonance& r : resonances) {
    if (std::abs(r.wavelength_nm - 1000.0) < 0.01) found_1000 = true;
  }
  CHECK(found_1000);
}

TEST_CASE("find_resonances: empty range without peaks is not an error") {
  const CavityConfig cavity = ideal_cavity(3000.0, 1000.0);
  // Between the m=6 (1000 nm) and m=7 (857 nm) modes.
  const auto resonances = find_resonances(cavity, 880.0, 980.0, Polarization::ordinary, false);
  CHECK(resonances.empty());
}

TEST_CASE("scan finesse FSR/FWHM matches the loss formula within 2%") {
  Preset bare = bare_preset();
  CavityConfig cavity = assemble(bare.fiber_mirror, 8000.0, std::nullopt, bare.planar_mirror, 0.0);
  const auto resonances = find_resonances(cavity, 920.0, 1050.0, Polarization::ordinary, true);
  REQUIRE(resonances.size() >= 3);
  // Peak closest to 985 with both neighbours.
  size_t center = 1;
  for (size_t i = 1; i + 1 < resonances.size(); ++i) {
    if (std::abs(resonances[i].wavelength_nm - 985.0) <
        std::abs(resonances[center].wavelength_nm - 985.0)) {
      center = i;
    }
  }
  const double fsr = 0.5 * (resonances[center + 1].wavelength_nm -
                            resonances[center - 1].wavelength_nm);
  const double f_scan = fsr / resonances[center].fwhm_nm;
  const double wl = resonances[center].wavelength_nm;
  const double t1 = stack_response(membrane_dressed_planar(cavity), wl,
                                   Polarization::ordinary).T * 1e6;
  const double t2 = stack_response(cavity.fiber_mirror, wl, Polarization::ordinary).T * 1e6;
  const double f_formula = finesse_from_losses(t1, t2, 0.0);
  CHECK(std::abs(f_scan - f_formula) / f_formula < 0.02);
}

TEST_CASE("SB preset shows two polarization mode families near the ZPL") {
  const Preset sb = sb_preset();
  const CavityConfig cavity = sb.cavity();
  // Window wider than one free spectral range so both families appear.
  const auto ord = find_resonances(cavity, 890.0, 950.0, Polarization::ordinary, false);
  const auto ext = find_resonances(cavity, 890.0, 950.0, Polarization::extraordinary, false);
  REQUIRE_FALSE(ord.empty());
  REQUIRE_FALSE(ext.empty());
  double min_split = 1e9;
  for (const Resonance& o : ord) {
    for (const Resonance& e : ext) {
      min_split = std::min(min_split, std::abs(o.wavelength_nm - e.wavelength_nm));
    }
  }
  CHECK(min_split > 0.5);  // distinct families, nm-scale birefringent splitting
}

TEST_CASE("finesse spectrum of the SB preset") {
  const Preset sb = sb_preset();
  const CavityConfig cavity = sb.cavity();
  Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(401, 900.0, 1000.0);
  const auto fo = finesse_spectrum(cavity, grid, Polarization::ordinary);
  const auto fe = finesse_spectrum(cavity, grid, Polarization::extraordinary);

  SUBCASE("high finesse near 980 nm") {
    const double f980 = std::max(finesse_at(fo, 980.0), finesse_at(fe, 980.0));
    CHECK(f980 > 34000.0);
    CHECK(f980 < 46000.0);
  }
  SUBCASE("finesse around 1e4 at the ZPL") {
    const double fo917 = finesse_at(fo, 917.0);
    const double fe917 = finesse_at(fe, 917.0);
    const double closer = std::abs(fo917 - 1e4) < std::abs(fe917 - 1e4) ? fo917 : fe917;
    CHECK(closer > 7500.0);
    CHECK(closer < 12500.0);
  }
  SUBCASE("periodic membrane modulation across the band") {
    CHECK(count_local_maxima(fo) + count_local_maxima(fe) >= 3);
  }
}

TEST_CASE("finesse spectrum without a membrane is smooth") {
  const Preset bare = bare_preset();
  CavityConfig cavity = bare.cavity();
  cavity.excess_loss_ppm = 70.0;
  Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(401, 900.0, 1000.0);
  const auto fo = finesse_spectrum(cavity, grid, Polarization::ordinary);
  CHECK(count_local_maxima(fo) <= 1);
}

TEST_CASE("finesse spectrum is deterministic under threading") {
  const Preset sb = sb_preset();
  Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(101, 950.0, 1000.0);
  const auto serial = finesse_spectrum(sb.cavity(), grid, Polarization::extraordinary, 1);
  const auto parallel = finesse_spectrum(sb.cavity(), grid, Polarization::extraordinary, 4);
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].finesse == parallel[i].finesse);
  }
}

TEST_CASE("dispersion map: membrane-free cavity has straight noncrossing branches") {
  const double wl = 1000.0;
  const CavityConfig cavity = ideal_cavity(2600.0, wl);
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(13, 2600.0, 3200.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(40, 850.0, 1100.0);
  const ModeMap map = dispersion_map(cavity, gaps, wavelengths);
  REQUIRE_FALSE(map.branches.empty());
  int long_branches = 0;
  for (const Branch& branch : map.branches) {
    if (branch.points.size() < 5) continue;
    ++long_branches;
    // Straight line: wavelength = 2 (L0 + dgap) / m.
    const double m = std::round(2.0 * branch.points[0].gap_nm / branch.points[0].wavelength_nm);
    for (const BranchPoint& p : branch.points) {
      CHECK(p.wavelength_nm == doctest::Approx(2.0 * p.gap_nm / m).epsilon(1e-4));
    }
    for (size_t i = 1; i < branch.points.size(); ++i) {
      CHECK(branch.points[i].wavelength_nm > branch.points[i - 1].wavelength_nm);
    }
  }
  CHECK(long_branches >= 2);
}

TEST_CASE("dispersion map: SB preset shows avoided crossings and both families") {
  const Preset sb = sb_preset();
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(25, 400.0, 2800.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(40, 900.0, 1000.0);
  const ModeMap map = dispersion_map(sb.cavity(), gaps, wavelengths);

  bool has_ordinary = false, has_extraordinary = false;
  double slope_min = 1e9, slope_max = 0.0;
  for (const Branch& branch : map.branches) {
    if (branch.pol == Polarization::ordinary) has_ordinary = true;
    if (branch.pol == Polarization::extraordinary) has_extraordinary = true;
    if (branch.points.size() < 6) continue;
    for (size_t i = 1; i < branch.points.size(); ++i) {
      const double dgap = branch.points[i].gap_nm - branch.points[i - 1].gap_nm;
      const double dwl = branch.points[i].wavelength_nm - branch.points[i - 1].wavelength_nm;
      CHECK(dwl > 0.0);  // monotone dispersion along a branch
      const double slope = dwl / dgap;
      slope_min = std::min(slope_min, slope);
      slope_max = std::max(slope_max, slope);
    }
  }
  CHECK(has_ordinary);
  CHECK(has_extraordinary);
  // Hybridization: branches alternate between steep (air-like) and flat
  // (dielectric-like) segments.
  CHECK(slope_max / slope_min > 3.0);

  // The membrane can only flatten the dispersion relative to the bare cavity.
  const Preset bare = bare_preset();
  const ModeMap bare_map = dispersion_map(bare.cavity(), gaps, wavelengths);
  double bare_slope_max = 0.0;
  for (const Branch& branch : bare_map.branches) {
    for (size_t i = 1; i < branch.points.size(); ++i) {
      const double dgap = branch.points[i].gap_nm - branch.points[i - 1].gap_nm;
      const double dwl = branch.points[i].wavelength_nm - branch.points[i - 1].wavelength_nm;
      bare_slope_max = std::max(bare_slope_max, dwl / dgap);
    }
  }
  CHECK(slope_max <= bare_slope_max * 1.05);
}

TEST_CASE("dispersion map is deterministic under threading") {
  const Preset sb = sb_preset();
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(5, 800.0, 1200.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(25, 930.0, 960.0);
  const ModeMap serial = dispersion_map(sb.cavity(), gaps, wavelengths, 1);
  const ModeMap parallel = dispersion_map(sb.cavity(), gaps, wavelengths, 4);
  CHECK((serial.transmission_ordinary - parallel.transmission_ordinary).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((serial.transmission_extraordinary - parallel.transmission_extraordinary)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("classify_modes: membrane-free branches are all air-like") {
  const double wl = 1000.0;
  const CavityConfig cavity = ideal_cavity(2600.0, wl);
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(5, 2600.0, 3000.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(25, 900.0, 1080.0);
  ModeMap map = dispersion_map(cavity, gaps, wavelengths);
  classify_modes(map, cavity);
  for (const Branch& branch : map.branches) {
    for (const BranchPoint& p : branch.points) {
      CHECK(p.character == ModeCharacter::air_like);
      CHECK(p.membrane_fraction == 0.0);
    }
  }
}

TEST_CASE("classify_modes: SB characters transition through mixed") {
  // Gap range on the scale of the membrane's optical thickness, where the
  // n^2|E|^2 fraction can swing below the air-like threshold.
  const Preset sb = sb_preset();
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(29, 4000.0, 6800.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(30, 920.0, 1000.0);
  ModeMap map = dispersion_map(sb.cavity(), gaps, wavelengths);
  classify_modes(map, sb.cavity());

  bool saw_air = false, saw_dielectric = false;
  for (const Branch& branch : map.branches) {
    ModeCharacter prev = ModeCharacter::untagged;
    for (const BranchPoint& p : branch.points) {
      if (p.character == ModeCharacter::air_like) saw_air = true;
      if (p.character == ModeCharacter::dielectric_like) saw_dielectric = true;
      if (prev != ModeCharacter::untagged) {
        const bool flip = (prev == ModeCharacter::air_like &&
                           p.character == ModeCharacter::dielectric_like) ||
                          (prev == ModeCharacter::dielectric_like &&
                           p.character == ModeCharacter::air_like);
        CHECK_FALSE(flip);  // no air <-> dielectric flip without passing mixed
      }
      prev = p.character;
    }
  }
  CHECK(saw_air);
  CHECK(saw_dielectric);
}

TEST_CASE("classify_modes: mode at a finesse maximum is air-like") {
  const Preset sb = sb_preset();
  const CavityConfig cavity = sb.cavity();
  // Dressed planar transmission minimum in the high-finesse region.
  Eigen::ArrayXd grid = Eigen::ArrayXd::LinSpaced(501, 950.0, 985.0);
  const auto fe = finesse_spectrum(cavity, grid, Polarization::extraordinary);
  double best_wl = 0.0, best_f = 0.0;
  for (const FinessePoint& p : fe) {
    if (p.finesse > best_f) {
      best_f = p.finesse;
      best_wl = p.wavelength_nm;
    }
  }
  // Gap tuned so an extraordinary resonance lands at that wavelength, at a
  // contact-scale gap where the air-like character is pronounced.
  for (double gap = 5600.0; gap < 7000.0; gap += 5.0) {
    const auto res = find_resonances(with_gap(cavity, gap), best_wl - 0.4, best_wl + 0.4,
                                     Polarization::extraordinary, false);
    if (!res.empty()) {
      const double frac = membrane_energy_fraction(with_gap(cavity, gap), res[0].wavelength_nm,
                                                   Polarization::extraordinary);
      CHECK(frac < 0.35);
      return;
    }
  }
  FAIL("no resonance found at the finesse maximum");
}

TEST_CASE("fit_membrane_thickness recovers synthetic thickness") {
  const Preset sb = sb_preset();
  CavityConfig truth = sb.cavity();
  truth.membrane->thickness_nm = 2850.0;
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(9, 700.0, 1500.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(30, 900.0, 980.0);
  ModeMap synthetic = dispersion_map(truth, gaps, wavelengths);
  // Keep the extraordinary branches only, as a single-polarization measured map.
  ModeMap measured;
  measured.gap_nm = synthetic.gap_nm;
  measured.wavelength_nm = synthetic.wavelength_nm;
  for (const Branch& branch : synthetic.branches) {
    if (branch.pol == Polarization::extraordinary && branch.points.size() >= 4) {
      measured.branches.push_back(branch);
    }
  }
  REQUIRE_FALSE(measured.branches.empty());

  const FitResult fit = fit_membrane_thickness(measured, sb.cavity(), 2500.0);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.value("thickness_nm") - 2850.0) / 2850.0 < 0.005);
  CHECK(std::abs(fit.value("gap_offset_nm")) < 5.0);
}

TEST_CASE("fit_membrane_thickness on a flat map is unidentifiable") {
  const Preset bare = bare_preset();
  const Preset sb = sb_preset();
  const double wl = 1000.0;
  const CavityConfig cavity = ideal_cavity(2600.0, wl);
  Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(7, 2600.0, 3200.0);
  Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(25, 900.0, 1080.0);
  ModeMap flat = dispersion_map(cavity, gaps, wavelengths);
  // Template with a membrane, measured map without membrane information at
  // all: thickness and offset trade off, sigma diverges.
  CavityConfig tmpl = sb.cavity();
  (void)bare;
  const FitResult fit = fit_membrane_thickness(flat, tmpl, 2500.0);
  CHECK((!fit.converged || std::isinf(fit.sigma("thickness_nm")) ||
         fit.sigma("thickness_nm") > 0.5 * 2850.0));
}

TEST_CASE("loss budget at the high-finesse point") {
  const Preset sb = sb_preset();
  const LossBudget budget = loss_budget(40000.0, sb.cavity(), 980.0,
                                        Polarization::extraordinary);
  CHECK(budget.inferred_extra_loss_ppm > 50.0);
  CHECK(budget.inferred_extra_loss_ppm < 90.0);
  CHECK(budget.warning.empty());
  // Components sum to 2*pi/F exactly.
  const double total = budget.t1_ppm + budget.t2_ppm + budget.inferred_extra_loss_ppm;
  CHECK(total == doctest::Approx(2.0 * std::numbers::pi / 40000.0 * 1e6).epsilon(1e-12));
}

TEST_CASE("loss budget: exact transmission-limited finesse gives zero extra loss") {
  const Preset bare = bare_preset();
  const CavityConfig cavity = bare.cavity();
  const double t1 = stack_response(membrane_dressed_planar(cavity), 985.0,
                                   Polarization::ordinary).T * 1e6;
  const double t2 = stack_response(cavity.fiber_mirror, 985.0, Polarization::ordinary).T * 1e6;
  const double f = finesse_from_losses(t1, t2, 0.0);
  const LossBudget budget = loss_budget(f, cavity, 985.0, Polarization::ordinary);
  CHECK(std::abs(budget.inferred_extra_loss_ppm) < 1e-9);
}

TEST_CASE("loss budget warns when the model overestimates losses") {
  const Preset sb = sb_preset();
  // A measured finesse far above what the model transmissions allow.
  const LossBudget budget = loss_budget(3e5, sb.cavity(), 917.0, Polarization::ordinary);
  CHECK(budget.inferred_extra_loss_ppm < 0.0);
  CHECK_FALSE(budget.warning.empty());
}

TEST_CASE("mode-coupling periodicity scales with membrane thickness") {
  // Avoided crossings pin to the membrane resonance wavelengths; their
  // spacing in the map scales inversely with the membrane thickness.
  auto crossing_spacing = [](const Preset& preset) {
    Eigen::ArrayXd gaps = Eigen::ArrayXd::LinSpaced(25, 400.0, 2800.0);
    Eigen::ArrayXd wavelengths = Eigen::ArrayXd::LinSpaced(30, 880.0, 1010.0);
    const ModeMap map = dispersion_map(preset.cavity(), gaps, wavelengths);

    // Bin the local slope of ordinary branches by wavelength; crossings show
    // up as slope minima at fixed wavelengths.
    const double lo = 880.0, hi = 1010.0, bin_w = 2.0;
    const int n_bins = static_cast<int>((hi - lo) / bin_w);
    std::vector<double> slope_sum(n_bins, 0.0);
    std::vector<int> slope_count(n_bins, 0);
    for (const Branch& branch : map.branches) {
      if (branch.pol != Polarization::ordinary) continue;
      for (size_t i = 1; i < branch.points.size(); ++i) {
        const double dgap = branch.points[i].gap_nm - branch.points[i - 1].gap_nm;
        const double dwl = branch.points[i].wavelength_nm - branch.points[i - 1].wavelength_nm;
        const double mid = 0.5 * (branch.points[i].wavelength_nm +
                                  branch.points[i - 1].wavelength_nm);
        const int b = static_cast<int>((mid - lo) / bin_w);
        if (b >= 0 && b < n_bins) {
          slope_sum[b] += dwl / dgap;
          ++slope_count[b];
        }
      }
    }
    std::vector<double> slope(n_bins, -1.0);
    for (int b = 0; b < n_bins; ++b) {
      if (slope_count[b] > 0) slope[b] = slope_sum[b] / slope_count[b];
    }
    // Local minima of the binned slope, with a 3-bin neighbourhood.
    std::vector<double> minima;
    for (int b = 2; b + 2 < n_bins; ++b) {
      if (slope[b] < 0) continue;
      bool is_min = true;
      for (int k = -2; k <= 2; ++k) {
        if (k == 0 || b + k < 0 || b + k >= n_bins) continue;
        if (slope[b + k] >= 0 && slope[b + k] < slope[b]) is_min = false;
      }
      if (is_min && slope[b] < 0.5 * *std::max_element(slope.begin(), slope.end())) {
        minima.push_back(lo + (b + 0.5) * bin_w);
      }
    }
    REQUIRE(minima.size() >= 2);
    double spacing = 0.0;
    for (size_t i = 1; i < minima.size(); ++i) spacing += minima[i] - minima[i - 1];
    return spacing / static_cast<double>(minima.size() - 1);
  };

  const double spacing_sa = crossing_spacing(sa_preset());
  const double spacing_sb = crossing_spacing(sb_preset());
  const double ratio = spacing_sb / spacing_sa;
  CHECK(std::abs(ratio - 6200.0 / 2850.0) / (6200.0 / 2850.0) < 0.10);
}
