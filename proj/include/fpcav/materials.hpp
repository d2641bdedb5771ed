#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpcav/errors.hpp"

namespace fpcav {

using Complex = std::complex<double>;

enum class Polarization { ordinary, extraordinary };

const char* to_string(Polarization pol);
Polarization polarization_from_string(const std::string& s);

/// Tabulated refractive index samples, strictly increasing in wavelength.
/// Lookups interpolate linearly; querying outside the table range is an error
/// (no extrapolation).
struct DispersionTable {
  Eigen::ArrayXd wavelength_nm;
  Eigen::ArrayXcd n;
};

/// An optical medium: complex refractive index, optionally uniaxial
/// (distinct ordinary/extraordinary indices) and optionally dispersive.
///
/// Invariants enforced at construction: Re(n) >= 1 and Im(n) >= 0 for every
/// stored index (passive media only), and dispersion tables sorted strictly
/// by wavelength. A non-birefringent medium reports the ordinary index when
/// queried for the extraordinary one.
class Medium {
 public:
  Medium() = default;

  static Medium constant(std::string name, Complex n);
  static Medium uniaxial(std::string name, Complex n_ordinary, Complex n_extraordinary);
  static Medium tabulated(std::string name, DispersionTable ordinary,
                          std::optional<DispersionTable> extraordinary = std::nullopt);

  const std::string& name() const { return name_; }
  bool birefringent() const { return birefringent_; }

  /// Refractive index at the given wavelength and polarization.
  Complex index(double wavelength_nm, Polarization pol) const;

 private:
  std::string name_;
  Complex n_ordinary_{1.0, 0.0};
  Complex n_extraordinary_{1.0, 0.0};
  bool birefringent_ = false;
  std::optional<DispersionTable> table_ordinary_;
  std::optional<DispersionTable> table_extraordinary_;
};

/// Dispersion lookup as a free function; pure, bit-reproducible.
inline Complex index_at(const Medium& medium, double wavelength_nm, Polarization pol) {
  return medium.index(wavelength_nm, pol);
}

/// One physical layer. Thickness zero is allowed (it contributes an identity
/// transfer matrix); negative thickness is rejected.
struct Layer {
  Medium medium;
  double thickness_nm = 0.0;
};

/// An ordered layer stack between two semi-infinite media. Light enters from
/// `ambient` into layers.front(); layers.back() touches `substrate`. The list
/// may be empty (bare interface).
struct StackSpec {
  Medium ambient;
  std::vector<Layer> layers;
  Medium substrate;

  double total_thickness_nm() const;
};

/// Same stack traversed from the other side (layers reversed, ambient and
/// substrate swapped). Lossless power transmittance is invariant under this.
StackSpec reversed(const StackSpec& stack);

enum class Terminate { high, low };

/// Builds a nominal quarter-wave Bragg stack at `center_wavelength_nm`.
///
/// Layer thicknesses are center_wavelength / (4 Re n(center)). The stack is
/// `pairs` high/low pairs starting with the high-index layer at the ambient
/// side; when `terminate_with == Terminate::high` one extra high-index layer
/// is appended so the layer adjacent to the substrate has the requested index
/// (layer count 2*pairs + 1, otherwise 2*pairs).
StackSpec quarter_wave_stack(double center_wavelength_nm, const Medium& high, const Medium& low,
                             int pairs, Terminate terminate_with, const Medium& ambient,
                             const Medium& substrate);

}  // namespace fpcav
