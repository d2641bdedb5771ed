#include "fpcav/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fpcav {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream is(line);
  while (std::getline(is, token, sep)) out.push_back(trim(token));
  return out;
}

bool parse_number(const std::string& token, double& value) {
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc{} && ptr == end;
}

std::string unit_of(const std::string& column) {
  const auto pos = column.find_last_of('_');
  return pos == std::string::npos ? column : column.substr(pos + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> warnings;
};

RawCsv read_numeric_csv(const std::string& path, size_t n_columns) {
  std::ifstream file(path);
  if (!file) throw DataError("cannot open '" + path + "'");
  RawCsv csv;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto tokens = split(stripped, ',');
    if (csv.header.empty()) {
      if (tokens.size() != n_columns) {
        throw DataError("'" + path + "': header must declare " + std::to_string(n_columns) +
                        " columns, got " + std::to_string(tokens.size()));
      }
      double probe;
      if (parse_number(tokens[0], probe)) {
        throw DataError("'" + path + "': first row must be a unit-bearing header, not numbers");
      }
      csv.header = tokens;
      continue;
    }
    if (tokens.size() != n_columns) {
      throw DataError("'" + path + "' line " + std::to_string(line_no) + ": expected " +
                      std::to_string(n_columns) + " columns, got " +
                      std::to_string(tokens.size()));
    }
    std::vector<double> row(n_columns);
    bool ok = true;
    for (size_t c = 0; c < n_columns; ++c) {
      if (!parse_number(tokens[c], row[c]) || !std::isfinite(row[c])) ok = false;
    }
    if (!ok) {
      csv.warnings.push_back("'" + path + "' line " + std::to_string(line_no) +
                             ": dropped row with non-finite or unparsable value");
      continue;
    }
    csv.rows.push_back(std::move(row));
  }
  if (csv.header.empty()) throw DataError("'" + path + "': no header row found");
  return csv;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

TraceReadResult read_trace_csv(const std::string& path, const std::string& expected_x_unit,
                               const std::string& expected_y_unit) {
  const RawCsv csv = read_numeric_csv(path, 2);
  const std::string x_unit = unit_of(lower(csv.header[0]));
  const std::string y_unit = unit_of(lower(csv.header[1]));
  if (!expected_x_unit.empty() && x_unit != lower(expected_x_unit)) {
    throw DataError("'" + path + "': abscissa unit '" + x_unit + "' does not match expected '" +
                    lower(expected_x_unit) + "'");
  }
  if (!expected_y_unit.empty() && y_unit != lower(expected_y_unit)) {
    throw DataError("'" + path + "': ordinate unit '" + y_unit + "' does not match expected '" +
                    lower(expected_y_unit) + "'");
  }
  if (csv.rows.size() < 2) throw DataError("'" + path + "': fewer than 2 usable rows");

  TraceReadResult out;
  out.warnings = csv.warnings;
  out.trace.x_unit = x_unit;
  out.trace.y_unit = y_unit;
  out.trace.x.resize(static_cast<Eigen::Index>(csv.rows.size()));
  out.trace.y.resize(static_cast<Eigen::Index>(csv.rows.size()));
  for (size_t i = 0; i < csv.rows.size(); ++i) {
    out.trace.x[static_cast<Eigen::Index>(i)] = csv.rows[i][0];
    out.trace.y[static_cast<Eigen::Index>(i)] = csv.rows[i][1];
    if (i > 0 && !(csv.rows[i][0] > csv.rows[i - 1][0])) {
      throw DataError("'" + path + "': abscissa not strictly increasing at data row " +
                      std::to_string(i + 1) + " (x = " + format_double(csv.rows[i][0]) + ")");
    }
  }
  return out;
}

SpectrometerStack read_spectrometer_csv(const std::string& path) {
  const RawCsv csv = read_numeric_csv(path, 3);
  const std::string second = unit_of(lower(csv.header[1]));
  if (lower(csv.header[0]).rfind("frame", 0) != 0 || second != "nm") {
    throw DataError("'" + path + "': expected header frame_index, wavelength_nm, counts");
  }

  SpectrometerStack stack;
  stack.warnings = csv.warnings;
  std::vector<double> xs, ys;
  double current = 0.0;
  bool open = false;
  auto flush = [&]() {
    if (!open) return;
    if (xs.size() < 2) throw DataError("'" + path + "': frame with fewer than 2 samples");
    Trace t;
    t.x_unit = "nm";
    t.y_unit = unit_of(lower(csv.header[2]));
    t.x = Eigen::Map<const Eigen::ArrayXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    t.y = Eigen::Map<const Eigen::ArrayXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    validate_trace(t);
    stack.frame_index.push_back(current);
    stack.spectra.push_back(std::move(t));
    xs.clear();
    ys.clear();
  };
  for (const auto& row : csv.rows) {
    if (!open || row[0] != current) {
      flush();
      current = row[0];
      open = true;
    }
    xs.push_back(row[1]);
    ys.push_back(row[2]);
  }
  flush();
  if (stack.spectra.empty()) throw DataError("'" + path + "': no frames found");
  return stack;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write '" + path + "'");
  file << content;
  if (!file) throw DataError("failed while writing '" + path + "'");
}

std::string trace_csv(const Trace& trace, const std::string& x_column,
                      const std::string& y_column) {
  std::string out = x_column + "," + y_column + "\n";
  for (Eigen::Index i = 0; i < trace.x.size(); ++i) {
    out += format_double(trace.x[i]) + "," + format_double(trace.y[i]) + "\n";
  }
  return out;
}

std::string response_series_csv(const std::vector<ComplexResponse>& series) {
  std::string out = "wavelength_nm,R,T,A,re_r,im_r,re_t,im_t\n";
  for (const ComplexResponse& r : series) {
    out += format_double(r.wavelength_nm) + "," + format_double(r.R) + "," + format_double(r.T) +
           "," + format_double(r.A) + "," + format_double(r.r.real()) + "," +
           format_double(r.r.imag()) + "," + format_double(r.t.real()) + "," +
           format_double(r.t.imag()) + "\n";
  }
  return out;
}

std::string field_profile_csv(const FieldProfile& profile) {
  std::string out = "z_nm,re_n,im_n,abs_E2\n";
  for (Eigen::Index i = 0; i < profile.z_nm.size(); ++i) {
    out += format_double(profile.z_nm[i]) + "," + format_double(profile.n_of_z[i].real()) + "," +
           format_double(profile.n_of_z[i].imag()) + "," +
           format_double(std::norm(profile.e_of_z[i])) + "\n";
  }
  return out;
}

std::string finesse_spectrum_csv(const std::vector<FinessePoint>& ordinary,
                                 const std::vector<FinessePoint>& extraordinary) {
  std::string out = "wavelength_nm,polarization,T1_ppm,T2_ppm,finesse\n";
  auto emit = [&](const std::vector<FinessePoint>& series, const char* pol) {
    for (const FinessePoint& p : series) {
      out += format_double(p.wavelength_nm) + "," + pol + "," + format_double(p.t1_ppm) + "," +
             format_double(p.t2_ppm) + "," + format_double(p.finesse) + "\n";
    }
  };
  emit(ordinary, "ordinary");
  emit(extraordinary, "extraordinary");
  return out;
}

std::string mode_map_csv(const ModeMap& map) {
  std::string out = "gap_nm,wavelength_nm,T,polarization\n";
  auto emit = [&](const Eigen::MatrixXd& t, const char* pol) {
    for (Eigen::Index g = 0; g < map.gap_nm.size(); ++g) {
      for (Eigen::Index w = 0; w < map.wavelength_nm.size(); ++w) {
        out += format_double(map.gap_nm[g]) + "," + format_double(map.wavelength_nm[w]) + "," +
               format_double(t(g, w)) + "," + pol + "\n";
      }
    }
  };
  emit(map.transmission_ordinary, "ordinary");
  emit(map.transmission_extraordinary, "extraordinary");
  return out;
}

std::string branches_json(const ModeMap& map) {
  nlohmann::ordered_json root;
  root["branches"] = nlohmann::ordered_json::array();
  for (const Branch& branch : map.branches) {
    nlohmann::ordered_json jb;
    jb["polarization"] = to_string(branch.pol);
    jb["points"] = nlohmann::ordered_json::array();
    for (const BranchPoint& p : branch.points) {
      nlohmann::ordered_json jp;
      jp["gap_nm"] = p.gap_nm;
      jp["wavelength_nm"] = p.wavelength_nm;
      if (p.character != ModeCharacter::untagged) {
        jp["character"] = to_string(p.character);
        jp["membrane_fraction"] = p.membrane_fraction;
      }
      jb["points"].push_back(std::move(jp));
    }
    root["branches"].push_back(std::move(jb));
  }
  root["warnings"] = map.warnings;
  return root.dump(2) + "\n";
}

std::string fit_result_json(const FitResult& result) {
  nlohmann::ordered_json root;
  root["model"] = result.model;
  root["converged"] = result.converged;
  root["n_iterations"] = result.n_iterations;
  root["residual_rms"] = result.residual_rms;
  root["params"] = nlohmann::ordered_json::array();
  for (const FitParam& p : result.params) {
    nlohmann::ordered_json jp;
    jp["name"] = p.name;
    jp["value"] = p.value;
    jp["sigma"] = p.sigma;
    root["params"].push_back(std::move(jp));
  }
  root["exclusion_windows"] = nlohmann::ordered_json::array();
  for (const auto& [lo, hi] : result.exclusion_windows) {
    root["exclusion_windows"].push_back({lo, hi});
  }
  root["seed"] = result.seed;
  root["message"] = result.message;
  return root.dump(2) + "\n";
}

}  // namespace fpcav
