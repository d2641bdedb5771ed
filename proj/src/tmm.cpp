#include "fpcav/tmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

namespace fpcav {

namespace {

constexpr Complex kI{0.0, 1.0};

struct Admittances {
  Complex ambient;
  Complex substrate;
};

Admittances boundary_admittances(const StackSpec& stack, double wavelength_nm, Polarization pol) {
  Admittances eta;
  eta.ambient = stack.ambient.index(wavelength_nm, pol);
  eta.substrate = stack.substrate.index(wavelength_nm, pol);
  if (!(eta.ambient.real() > 0.0)) {
    throw DataError("stack_response: ambient medium must have a positive real index");
  }
  return eta;
}

struct Amplitudes {
  Complex r;
  Complex t;
};

Amplitudes amplitudes_from_matrix(const Matrix2c& m, const Admittances& eta) {
  // Boundary conditions: (E, H) = (1 + r, eta_a (1 - r)) at the ambient side,
  // (t, eta_s t) at the substrate side, linked by the stack matrix.
  const Complex a = eta.substrate * m(0, 0) - m(1, 0);
  const Complex b = eta.ambient * (m(1, 1) - eta.substrate * m(0, 1));
  const Complex denom = a + b;
  if (denom == Complex{0.0, 0.0}) {
    throw NumericalError("stack_response: degenerate matrix product (singular boundary system)");
  }
  Amplitudes amp;
  amp.r = (b - a) / denom;
  amp.t = m(0, 0) * (1.0 + amp.r) + m(0, 1) * eta.ambient * (1.0 - amp.r);
  if (!std::isfinite(amp.r.real()) || !std::isfinite(amp.r.imag()) ||
      !std::isfinite(amp.t.real()) || !std::isfinite(amp.t.imag())) {
    throw NumericalError("stack_response: non-finite amplitudes (degenerate matrix product)");
  }
  return amp;
}

}  // namespace

Matrix2c layer_matrix(Complex n, double thickness_nm, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw DataError("layer_matrix: wavelength must be positive");
  const Complex delta = 2.0 * std::numbers::pi * n * thickness_nm / wavelength_nm;
  const Complex c = std::cos(delta);
  const Complex s = std::sin(delta);
  Matrix2c m;
  m << c, kI * s / n, kI * n * s, c;
  return m;
}

Matrix2c layer_matrix(const Layer& layer, double wavelength_nm, Polarization pol) {
  if (layer.thickness_nm < 0.0) throw DataError("layer_matrix: negative layer thickness");
  return layer_matrix(layer.medium.index(wavelength_nm, pol), layer.thickness_nm, wavelength_nm);
}

Matrix2c stack_matrix(const StackSpec& stack, double wavelength_nm, Polarization pol) {
  Matrix2c m = Matrix2c::Identity();
  for (const Layer& layer : stack.layers) {
    m = layer_matrix(layer, wavelength_nm, pol) * m;
  }
  return m;
}

ComplexResponse stack_response(const StackSpec& stack, double wavelength_nm, Polarization pol) {
  const Admittances eta = boundary_admittances(stack, wavelength_nm, pol);
  const Matrix2c m = stack_matrix(stack, wavelength_nm, pol);
  const Amplitudes amp = amplitudes_from_matrix(m, eta);

  ComplexResponse out;
  out.wavelength_nm = wavelength_nm;
  out.r = amp.r;
  out.t = amp.t;
  out.R = std::norm(amp.r);
  out.T = (eta.substrate.real() / eta.ambient.real()) * std::norm(amp.t);
  out.A = 1.0 - out.R - out.T;
  return out;
}

std::vector<ComplexResponse> stopband(const StackSpec& stack, const Eigen::ArrayXd& wavelengths_nm,
                                      Polarization pol, int threads) {
  const Eigen::Index n = wavelengths_nm.size();
  if (n < 2) throw DataError("stopband: wavelength grid needs at least 2 points");
  for (Eigen::Index i = 1; i < n; ++i) {
    if (!(wavelengths_nm[i] > wavelengths_nm[i - 1])) {
      throw DataError("stopband: wavelength grid must be strictly increasing");
    }
  }
  std::vector<ComplexResponse> series(static_cast<size_t>(n));
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp<int>(n_threads, 1, static_cast<int>(n));
  if (n_threads == 1) {
    for (Eigen::Index i = 0; i < n; ++i) {
      series[static_cast<size_t>(i)] = stack_response(stack, wavelengths_nm[i], pol);
    }
    return series;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t]() {
      for (Eigen::Index i = t; i < n; i += n_threads) {
        series[static_cast<size_t>(i)] = stack_response(stack, wavelengths_nm[i], pol);
      }
    });
  }
  for (auto& th : pool) th.join();
  return series;
}

StopbandSummary find_stopband(const std::vector<ComplexResponse>& series) {
  StopbandSummary summary;
  if (series.size() < 3) return summary;
  size_t i_min = 0;
  for (size_t i = 1; i < series.size(); ++i) {
    if (series[i].T < series[i_min].T) i_min = i;
  }
  summary.min_transmission = series[i_min].T;
  const double threshold = 10.0 * series[i_min].T;
  size_t lo = i_min;
  while (lo > 0 && series[lo - 1].T < threshold) --lo;
  size_t hi = i_min;
  while (hi + 1 < series.size() && series[hi + 1].T < threshold) ++hi;
  if (lo == 0 || hi == series.size() - 1) return summary;  // flat response, no flanks
  summary.detected = true;
  summary.low_edge_nm = series[lo].wavelength_nm;
  summary.high_edge_nm = series[hi].wavelength_nm;
  // Midpoint in wavenumber: a quarter-wave stopband is symmetric in 1/lambda,
  // so this lands on the design wavelength.
  summary.center_nm =
      2.0 * summary.low_edge_nm * summary.high_edge_nm /
      (summary.low_edge_nm + summary.high_edge_nm);
  return summary;
}

namespace detail {

InterfaceFields interface_fields(const StackSpec& stack, double wavelength_nm, Polarization pol) {
  const Admittances eta = boundary_admittances(stack, wavelength_nm, pol);
  const Matrix2c m = stack_matrix(stack, wavelength_nm, pol);
  const Amplitudes amp = amplitudes_from_matrix(m, eta);

  const size_t n_boundaries = stack.layers.size() + 1;
  InterfaceFields fields;
  fields.z_nm.resize(n_boundaries);
  fields.e.resize(n_boundaries);
  fields.h.resize(n_boundaries);

  double z = 0.0;
  fields.z_nm[0] = 0.0;
  for (size_t k = 0; k < stack.layers.size(); ++k) {
    z += stack.layers[k].thickness_nm;
    fields.z_nm[k + 1] = z;
  }

  // Back-propagate from the transmitted wave at the substrate boundary.
  Eigen::Vector2cd v;
  v << amp.t, eta.substrate * amp.t;
  fields.e[n_boundaries - 1] = v(0);
  fields.h[n_boundaries - 1] = v(1);
  for (size_t k = stack.layers.size(); k-- > 0;) {
    const Layer& layer = stack.layers[k];
    const Complex n = layer.medium.index(wavelength_nm, pol);
    v = layer_matrix(n, -layer.thickness_nm, wavelength_nm) * v;
    fields.e[k] = v(0);
    fields.h[k] = v(1);
  }
  return fields;
}

}  // namespace detail

FieldProfile field_profile(const StackSpec& stack, double wavelength_nm, Polarization pol,
                           int samples_per_wavelength) {
  if (samples_per_wavelength < 4) throw DataError("field_profile: sampling density too low");
  const Admittances eta = boundary_admittances(stack, wavelength_nm, pol);
  const detail::InterfaceFields boundary = detail::interface_fields(stack, wavelength_nm, pol);
  const Complex r = [&] {
    // Recover r from the ambient-side boundary fields: E = 1 + r, H = eta_a (1 - r).
    return 0.5 * (boundary.e.front() - boundary.h.front() / eta.ambient);
  }();
  const Complex t = boundary.e.back();

  std::vector<double> z;
  std::vector<Complex> n_of_z;
  std::vector<Complex> e_of_z;
  const double k0 = 2.0 * std::numbers::pi / wavelength_nm;

  auto sample_count = [&](double thickness, Complex n) {
    const double local = wavelength_nm / (samples_per_wavelength * std::max(n.real(), 1.0));
    return std::max<int>(2, static_cast<int>(std::ceil(thickness / local)) + 1);
  };

  // |n E|^2 jumps at every interface, so each interface position is emitted
  // twice, once per adjacent medium, with the shared boundary field value.
  // Quadratures over the profile then see the discontinuity exactly.

  // Ambient margin: incident plus reflected wave, z <= 0.
  {
    const Complex na = eta.ambient;
    const double margin = wavelength_nm / 2.0;
    const int count = sample_count(margin, na);
    for (int i = 0; i < count - 1; ++i) {
      const double zi = -margin + margin * static_cast<double>(i) / (count - 1);
      const Complex phase = std::exp(kI * (k0 * na * zi));
      z.push_back(zi);
      n_of_z.push_back(na);
      e_of_z.push_back(phase + r / phase);
    }
    z.push_back(0.0);
    n_of_z.push_back(na);
    e_of_z.push_back(boundary.e.front());
  }

  // Layers: each sampled on its own closed interval from the (shared)
  // boundary vectors, so the field is continuous across interfaces by
  // construction.
  for (size_t kl = 0; kl < stack.layers.size(); ++kl) {
    const Layer& layer = stack.layers[kl];
    const Complex n = layer.medium.index(wavelength_nm, pol);
    Eigen::Vector2cd v0;
    v0 << boundary.e[kl], boundary.h[kl];
    const int count = sample_count(layer.thickness_nm, n);
    z.push_back(boundary.z_nm[kl]);
    n_of_z.push_back(n);
    e_of_z.push_back(boundary.e[kl]);
    for (int i = 1; i < count - 1; ++i) {
      const double dz = layer.thickness_nm * static_cast<double>(i) / (count - 1);
      const Eigen::Vector2cd v = layer_matrix(n, dz, wavelength_nm) * v0;
      z.push_back(boundary.z_nm[kl] + dz);
      n_of_z.push_back(n);
      e_of_z.push_back(v(0));
    }
    z.push_back(boundary.z_nm[kl + 1]);
    n_of_z.push_back(n);
    e_of_z.push_back(boundary.e[kl + 1]);
  }

  // Substrate margin: transmitted wave only, z >= last interface.
  {
    const Complex ns = eta.substrate;
    const double z_end = boundary.z_nm.back();
    const double margin = wavelength_nm / 2.0;
    const int count = sample_count(margin, ns);
    for (int i = 0; i < count; ++i) {
      const double dz = margin * static_cast<double>(i) / (count - 1);
      z.push_back(z_end + dz);
      n_of_z.push_back(ns);
      e_of_z.push_back(t * std::exp(kI * (k0 * ns * dz)));
    }
  }

  FieldProfile profile;
  profile.z_nm = Eigen::Map<const Eigen::ArrayXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  profile.n_of_z =
      Eigen::Map<const Eigen::ArrayXcd>(n_of_z.data(), static_cast<Eigen::Index>(n_of_z.size()));
  profile.e_of_z =
      Eigen::Map<const Eigen::ArrayXcd>(e_of_z.data(), static_cast<Eigen::Index>(e_of_z.size()));
  profile.layer_boundaries_nm = boundary.z_nm;
  return profile;
}

double airy_etalon_oracle(double n, double thickness_nm, double wavelength_nm,
                          const Medium& ambient, const Medium& substrate) {
  if (!(n > 0.0)) throw DataError("airy_etalon_oracle: index must be positive and real");
  const double na = ambient.index(wavelength_nm, Polarization::ordinary).real();
  const double ns = substrate.index(wavelength_nm, Polarization::ordinary).real();

  const double t_in = 2.0 * na / (na + n);        // ambient -> layer
  const double t_out = 2.0 * n / (n + ns);        // layer -> substrate
  const double r_back = (n - na) / (n + na);      // layer -> ambient, seen from inside
  const double r_exit = (n - ns) / (n + ns);      // layer -> substrate, seen from inside
  const Complex delta = Complex{0.0, 1.0} * (2.0 * std::numbers::pi * n * thickness_nm /
                                             wavelength_nm);
  const Complex one_pass = std::exp(delta);
  const Complex round_trip = r_back * r_exit * one_pass * one_pass;

  Complex sum{0.0, 0.0};
  Complex term{1.0, 0.0};
  for (int k = 0; k < 10000; ++k) {
    sum += term;
    term *= round_trip;
  }
  const Complex t_total = t_in * t_out * one_pass * sum;
  return (ns / na) * std::norm(t_total);
}

}  // namespace fpcav
