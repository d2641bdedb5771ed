#pragma once

#include <string>
#include <vector>

#include "fpcav/analysis.hpp"
#include "fpcav/cavity.hpp"
#include "fpcav/tmm.hpp"

namespace fpcav {

/// Fixed-format numeric printing for deterministic file output.
std::string format_double(double value);

struct TraceReadResult {
  Trace trace;
  std::vector<std::string> warnings;  // e.g. dropped non-finite rows, with line numbers
};

/// Reads a two-column CSV trace. The header row declares units through its
/// column names (suffix after the last underscore, or the whole name):
/// "time_s,volts". Rows with non-finite values are dropped with a warning;
/// a non-increasing abscissa or a unit mismatch is an error.
TraceReadResult read_trace_csv(const std::string& path, const std::string& expected_x_unit,
                               const std::string& expected_y_unit = "");

/// Spectrometer export: frame_index, wavelength_nm, counts. One trace per
/// frame, frames in first-appearance order.
struct SpectrometerStack {
  std::vector<double> frame_index;
  std::vector<Trace> spectra;
  std::vector<std::string> warnings;
};
SpectrometerStack read_spectrometer_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

/// Two-column trace with the given unit-bearing column names.
std::string trace_csv(const Trace& trace, const std::string& x_column,
                      const std::string& y_column);

/// wavelength_nm, R, T, A, re_r, im_r, re_t, im_t
std::string response_series_csv(const std::vector<ComplexResponse>& series);

/// z_nm, re_n, im_n, abs_E2
std::string field_profile_csv(const FieldProfile& profile);

/// wavelength_nm, polarization, T1_ppm, T2_ppm, finesse
std::string finesse_spectrum_csv(const std::vector<FinessePoint>& ordinary,
                                 const std::vector<FinessePoint>& extraordinary);

/// gap_nm, wavelength_nm, T, polarization
std::string mode_map_csv(const ModeMap& map);

/// Branch sidecar: polarization, character and (gap, wavelength) points.
std::string branches_json(const ModeMap& map);

std::string fit_result_json(const FitResult& result);

}  // namespace fpcav
