#include "fpcav/materials.hpp"

#include <cmath>
#include <utility>

namespace fpcav {

const char* to_string(Polarization pol) {
  return pol == Polarization::ordinary ? "ordinary" : "extraordinary";
}

Polarization polarization_from_string(const std::string& s) {
  if (s == "ordinary" || s == "o") return Polarization::ordinary;
  if (s == "extraordinary" || s == "e") return Polarization::extraordinary;
  throw UsageError("unknown polarization '" + s + "' (expected ordinary or extraordinary)");
}

namespace {

void check_passive(const std::string& name, Complex n) {
  if (!(n.real() >= 1.0 - 1e-12)) {
    throw DataError("medium '" + name + "': refractive index real part must be >= 1, got " +
                    std::to_string(n.real()));
  }
  if (!(n.imag() >= -1e-15)) {
    throw DataError("medium '" + name + "': refractive index imaginary part must be >= 0 " +
                    "(passive media only), got " + std::to_string(n.imag()));
  }
}

void check_table(const std::string& name, const DispersionTable& table) {
  if (table.wavelength_nm.size() != table.n.size()) {
    throw DataError("medium '" + name + "': dispersion table wavelength/index size mismatch");
  }
  if (table.wavelength_nm.size() < 2) {
    throw DataError("medium '" + name + "': dispersion table needs at least 2 samples");
  }
  for (Eigen::Index i = 0; i < table.wavelength_nm.size(); ++i) {
    if (i > 0 && !(table.wavelength_nm[i] > table.wavelength_nm[i - 1])) {
      throw DataError("medium '" + name + "': dispersion table not strictly sorted at sample " +
                      std::to_string(i));
    }
    check_passive(name, table.n[i]);
  }
}

Complex interpolate(const std::string& name, const DispersionTable& table, double wavelength_nm) {
  const auto& w = table.wavelength_nm;
  if (wavelength_nm < w[0] || wavelength_nm > w[w.size() - 1]) {
    throw DataError("medium '" + name + "': wavelength " + std::to_string(wavelength_nm) +
                    " nm outside dispersion table range [" + std::to_string(w[0]) + ", " +
                    std::to_string(w[w.size() - 1]) + "] nm");
  }
  Eigen::Index hi = 1;
  while (hi < w.size() - 1 && w[hi] < wavelength_nm) ++hi;
  const Eigen::Index lo = hi - 1;
  const double f = (wavelength_nm - w[lo]) / (w[hi] - w[lo]);
  return table.n[lo] + f * (table.n[hi] - table.n[lo]);
}

}  // namespace

Medium Medium::constant(std::string name, Complex n) {
  check_passive(name, n);
  Medium m;
  m.name_ = std::move(name);
  m.n_ordinary_ = n;
  m.n_extraordinary_ = n;
  m.birefringent_ = false;
  return m;
}

Medium Medium::uniaxial(std::string name, Complex n_ordinary, Complex n_extraordinary) {
  check_passive(name, n_ordinary);
  check_passive(name, n_extraordinary);
  Medium m;
  m.name_ = std::move(name);
  m.n_ordinary_ = n_ordinary;
  m.n_extraordinary_ = n_extraordinary;
  m.birefringent_ = n_ordinary != n_extraordinary;
  return m;
}

Medium Medium::tabulated(std::string name, DispersionTable ordinary,
                         std::optional<DispersionTable> extraordinary) {
  check_table(name, ordinary);
  if (extraordinary) check_table(name, *extraordinary);
  Medium m;
  m.name_ = std::move(name);
  m.n_ordinary_ = ordinary.n[0];
  m.n_extraordinary_ = extraordinary ? (*extraordinary).n[0] : ordinary.n[0];
  m.birefringent_ = extraordinary.has_value();
  m.table_ordinary_ = std::move(ordinary);
  m.table_extraordinary_ = std::move(extraordinary);
  return m;
}

Complex Medium::index(double wavelength_nm, Polarization pol) const {
  if (pol == Polarization::extraordinary) {
    if (table_extraordinary_) return interpolate(name_, *table_extraordinary_, wavelength_nm);
    if (birefringent_) return n_extraordinary_;
    // isotropic: fall through to the ordinary path
  }
  if (table_ordinary_) return interpolate(name_, *table_ordinary_, wavelength_nm);
  return pol == Polarization::extraordinary ? n_extraordinary_ : n_ordinary_;
}

double StackSpec::total_thickness_nm() const {
  double total = 0.0;
  for (const Layer& layer : layers) total += layer.thickness_nm;
  return total;
}

StackSpec reversed(const StackSpec& stack) {
  StackSpec out;
  out.ambient = stack.substrate;
  out.substrate = stack.ambient;
  out.layers.assign(stack.layers.rbegin(), stack.layers.rend());
  return out;
}

StackSpec quarter_wave_stack(double center_wavelength_nm, const Medium& high, const Medium& low,
                             int pairs, Terminate terminate_with, const Medium& ambient,
                             const Medium& substrate) {
  if (!(center_wavelength_nm > 0.0)) {
    throw DataError("quarter_wave_stack: center wavelength must be positive");
  }
  if (pairs < 0) throw DataError("quarter_wave_stack: pairs must be >= 0");
  const Complex nh = high.index(center_wavelength_nm, Polarization::ordinary);
  const Complex nl = low.index(center_wavelength_nm, Polarization::ordinary);
  if (nh == nl) {
    throw DataError("quarter_wave_stack: degenerate stack, high ('" + high.name() +
                    "') and low ('" + low.name() + "') media have identical index " +
                    std::to_string(nh.real()));
  }
  const double d_high = center_wavelength_nm / (4.0 * nh.real());
  const double d_low = center_wavelength_nm / (4.0 * nl.real());

  StackSpec stack;
  stack.ambient = ambient;
  stack.substrate = substrate;
  stack.layers.reserve(static_cast<size_t>(2 * pairs + 1));
  for (int i = 0; i < pairs; ++i) {
    stack.layers.push_back({high, d_high});
    stack.layers.push_back({low, d_low});
  }
  if (terminate_with == Terminate::high) stack.layers.push_back({high, d_high});
  return stack;
}

}  // namespace fpcav
