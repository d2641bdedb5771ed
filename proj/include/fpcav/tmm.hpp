#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fpcav/materials.hpp"

namespace fpcav {

using Matrix2c = Eigen::Matrix2cd;

/// Complex reflection/transmission of a layered system at one wavelength.
///
/// T carries the substrate/ambient admittance ratio so that R + T + A = 1
/// holds exactly; A is the absorbed fraction (zero for lossless media up to
/// rounding).
struct ComplexResponse {
  double wavelength_nm = 0.0;
  Complex r{0.0, 0.0};
  Complex t{0.0, 0.0};
  double R = 0.0;
  double T = 0.0;
  double A = 0.0;
};

/// Sampled refractive index and standing-wave field through a layered system,
/// for a unit-amplitude wave incident from the ambient side. Positions are
/// measured from the first interface; the profile includes short margins in
/// the ambient and substrate. Every interface position appears twice, once
/// per adjacent medium, carrying the shared (continuous) boundary field, so
/// piecewise quadratures over |n E|^2 see the index jump exactly.
struct FieldProfile {
  Eigen::ArrayXd z_nm;
  Eigen::ArrayXcd n_of_z;
  Eigen::ArrayXcd e_of_z;
  std::vector<double> layer_boundaries_nm;
};

/// Characteristic matrix of one layer at normal incidence:
///   [cos d,  i sin d / n;  i n sin d,  cos d],  d = 2 pi n t / lambda.
/// Maps the tangential (E, H) pair across the layer in the propagation
/// direction; determinant is exactly 1. Convention: forward phase e^{+i d},
/// time dependence e^{-i w t}, absorption encoded as Im(n) >= 0.
Matrix2c layer_matrix(Complex n, double thickness_nm, double wavelength_nm);
Matrix2c layer_matrix(const Layer& layer, double wavelength_nm, Polarization pol);

/// Product of layer matrices for the whole stack, ordered so that
/// stack_matrix(s1 then s2) == stack_matrix(s2) * stack_matrix(s1).
Matrix2c stack_matrix(const StackSpec& stack, double wavelength_nm, Polarization pol);

/// Reflection/transmission amplitudes and powers of a stack.
ComplexResponse stack_response(const StackSpec& stack, double wavelength_nm, Polarization pol);

/// Response over a sorted wavelength grid. `threads` <= 0 picks the hardware
/// concurrency; the result is deterministic regardless of thread count.
std::vector<ComplexResponse> stopband(const StackSpec& stack, const Eigen::ArrayXd& wavelengths_nm,
                                      Polarization pol, int threads = 1);

/// Stopband detection on a response series: the contiguous region with
/// T < 10 * min(T) around the transmission minimum. Not detected when that
/// region reaches either end of the grid (no high-transmission flanks).
/// The center is the region midpoint in wavenumber, where a quarter-wave
/// stopband is symmetric.
struct StopbandSummary {
  bool detected = false;
  double center_nm = 0.0;
  double low_edge_nm = 0.0;
  double high_edge_nm = 0.0;
  double min_transmission = 0.0;
};
StopbandSummary find_stopband(const std::vector<ComplexResponse>& series);

/// Standing-wave profile through the stack. Interface amplitudes are
/// back-propagated from the substrate side; every interface is sampled
/// exactly and in-layer spacing is <= lambda / (samples_per_wavelength * Re n).
FieldProfile field_profile(const StackSpec& stack, double wavelength_nm, Polarization pol,
                           int samples_per_wavelength = 40);

namespace detail {
/// Tangential (E, H) at every interface, substrate-propagated; used by the
/// energy-flux tests. fields[k] belongs to boundary k (z = boundary position).
struct InterfaceFields {
  std::vector<double> z_nm;
  std::vector<Complex> e;
  std::vector<Complex> h;
};
InterfaceFields interface_fields(const StackSpec& stack, double wavelength_nm, Polarization pol);
}  // namespace detail

/// Independent multiple-beam (Airy) transmission oracle for a single lossless
/// layer: literal sum over 10^4 internal round trips, no matrix algebra.
double airy_etalon_oracle(double n, double thickness_nm, double wavelength_nm,
                          const Medium& ambient, const Medium& substrate);

}  // namespace fpcav
