#include "fpcav/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fpcav {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& key, const std::string& text) {
  double value = 0.0;
  const std::string t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    throw DataError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return value;
}

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

std::string nearest_key(const std::string& requested, const std::vector<std::string>& known) {
  std::string best;
  size_t best_dist = std::string::npos;
  for (const std::string& k : known) {
    const size_t d = edit_distance(requested, k);
    if (d < best_dist) {
      best_dist = d;
      best = k;
    }
  }
  return best;
}

Config Config::from_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return from_string(buffer.str(), path);
}

Config Config::from_string(std::string text, std::string origin) {
  Config config;
  config.origin_ = std::move(origin);
  config.trailing_newline_ = !text.empty() && text.back() == '\n';
  std::string section;
  std::istringstream is(text);
  std::string line;
  // Keep every source line verbatim, including the trailing-newline structure.
  while (std::getline(is, line)) {
    LineEntry entry;
    entry.text = line;
    const std::string stripped = trim(line);
    if (!stripped.empty() && stripped[0] != '#') {
      if (stripped.front() == '[') {
        if (stripped.back() != ']') {
          throw DataError("config '" + config.origin_ + "': malformed section header: " + line);
        }
        section = trim(stripped.substr(1, stripped.size() - 2));
      } else {
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
          throw DataError("config '" + config.origin_ + "': expected key = value: " + line);
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) {
          throw DataError("config '" + config.origin_ + "': empty key in line: " + line);
        }
        entry.key = section.empty() ? key : section + "." + key;
        if (config.index_.count(entry.key)) {
          throw DataError("config '" + config.origin_ + "': duplicate key '" + entry.key + "'");
        }
        config.index_[entry.key] = config.lines_.size();
      }
    }
    config.lines_.push_back(std::move(entry));
  }
  if (!config.index_.count("schema_version")) {
    throw DataError("config '" + config.origin_ + "': missing schema_version");
  }
  if (config.integer("schema_version") != 1) {
    throw DataError("config '" + config.origin_ + "': unsupported schema_version " +
                    config.get("schema_version"));
  }
  return config;
}

bool Config::has(const std::string& dotted_key) const { return index_.count(dotted_key) > 0; }

std::string Config::get(const std::string& dotted_key) const {
  const auto it = index_.find(dotted_key);
  if (it == index_.end()) {
    throw DataError("config '" + origin_ + "': missing key '" + dotted_key + "'");
  }
  const std::string& text = lines_[it->second].text;
  const auto eq = text.find('=');
  std::string raw = text.substr(eq + 1);
  const auto hash = raw.find('#');
  if (hash != std::string::npos) raw = raw.substr(0, hash);
  return trim(raw);
}

std::string Config::get_or(const std::string& dotted_key, const std::string& fallback) const {
  return has(dotted_key) ? get(dotted_key) : fallback;
}

double Config::number(const std::string& dotted_key) const {
  return parse_number(dotted_key, get(dotted_key));
}

double Config::number_or(const std::string& dotted_key, double fallback) const {
  return has(dotted_key) ? number(dotted_key) : fallback;
}

int Config::integer(const std::string& dotted_key) const {
  const double v = number(dotted_key);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw DataError("config key '" + dotted_key + "': expected an integer");
  }
  return i;
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  out.reserve(index_.size());
  for (const auto& [key, _] : index_) out.push_back(key);
  return out;
}

void Config::override_value(const std::string& dotted_key, const std::string& value) {
  const auto it = index_.find(dotted_key);
  if (it == index_.end()) {
    const std::string hint = nearest_key(dotted_key, keys());
    throw UsageError("unknown config key '" + dotted_key + "'" +
                     (hint.empty() ? "" : " (did you mean '" + hint + "'?)"));
  }
  const auto dot = dotted_key.find_last_of('.');
  const std::string bare = dot == std::string::npos ? dotted_key : dotted_key.substr(dot + 1);
  lines_[it->second].text = bare + " = " + value;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string want = prefix + ".";
  for (const auto& [key, _] : index_) {
    if (key.rfind(want, 0) == 0) out.push_back(key);
  }
  return out;
}

std::string Config::echo() const {
  std::string out;
  for (size_t i = 0; i < lines_.size(); ++i) {
    out += lines_[i].text;
    if (i + 1 < lines_.size() || trailing_newline_) out += '\n';
  }
  return out;
}

namespace {

Complex material_component(const Config& config, const std::string& base) {
  const double re = config.number(base);
  const double im = config.number_or(base + "_im", 0.0);
  return Complex{re, im};
}

Medium load_material(const Config& config, const std::string& name) {
  const std::string base = "materials." + name;
  if (config.has(base + ".n")) {
    return Medium::constant(name, material_component(config, base + ".n"));
  }
  if (config.has(base + ".n_ordinary")) {
    const Complex no = material_component(config, base + ".n_ordinary");
    const Complex ne = config.has(base + ".n_extraordinary")
                           ? material_component(config, base + ".n_extraordinary")
                           : no;
    return Medium::uniaxial(name, no, ne);
  }
  if (config.has(base + ".dispersion")) {
    // "wavelength:n, wavelength:n, ..." pairs
    DispersionTable table;
    std::vector<double> w, nr;
    std::istringstream is(config.get(base + ".dispersion"));
    std::string pair;
    while (std::getline(is, pair, ',')) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) {
        throw DataError("material '" + name + "': dispersion entries must be wavelength:n");
      }
      w.push_back(parse_number(base, pair.substr(0, colon)));
      nr.push_back(parse_number(base, pair.substr(colon + 1)));
    }
    table.wavelength_nm =
        Eigen::Map<const Eigen::ArrayXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    table.n.resize(static_cast<Eigen::Index>(nr.size()));
    for (size_t i = 0; i < nr.size(); ++i) table.n[static_cast<Eigen::Index>(i)] = nr[i];
    return Medium::tabulated(name, std::move(table));
  }
  throw DataError("material '" + name + "': no index definition found in config");
}

const Medium& require_material(const std::map<std::string, Medium>& materials,
                               const std::string& name, const std::string& where) {
  const auto it = materials.find(name);
  if (it == materials.end()) {
    throw DataError(where + ": material '" + name + "' is not defined in [materials.*]");
  }
  return it->second;
}

StackSpec load_mirror(const Config& config, const std::string& section,
                      const std::map<std::string, Medium>& materials) {
  const std::string high_name = config.get(section + ".high_material");
  const std::string low_name = config.get(section + ".low_material");
  Medium high = require_material(materials, high_name, section);
  Medium low = require_material(materials, low_name, section);
  // Per-mirror calibrated effective indices; these are preset data, the
  // [materials.*] defaults stay untouched.
  if (config.has(section + ".n_high")) {
    high = Medium::constant(high_name, Complex{config.number(section + ".n_high"), 0.0});
  }
  if (config.has(section + ".n_low")) {
    low = Medium::constant(low_name, Complex{config.number(section + ".n_low"), 0.0});
  }
  const std::string terminate = config.get(section + ".terminate_with");
  if (terminate != "high" && terminate != "low") {
    throw DataError(section + ".terminate_with must be 'high' or 'low'");
  }
  return quarter_wave_stack(
      config.number(section + ".center_wavelength_nm"), high, low,
      config.integer(section + ".pairs"),
      terminate == "high" ? Terminate::high : Terminate::low,
      require_material(materials, config.get(section + ".substrate_material"), section),
      require_material(materials, config.get(section + ".exit_material"), section));
}

}  // namespace

CavityConfig Preset::cavity() const {
  return assemble(fiber_mirror, air_gap_nm, membrane, planar_mirror, excess_loss_ppm);
}

CavityConfig Preset::cavity_in_contact() const {
  return assemble(fiber_mirror, contact_gap_nm, membrane, planar_mirror, excess_loss_ppm);
}

Preset load_preset(const Config& config) {
  Preset preset;
  preset.name = config.get_or("name", "unnamed");

  // Collect material names from the materials.* key space.
  for (const std::string& key : config.keys_with_prefix("materials")) {
    const auto first = key.find('.');
    const auto second = key.find('.', first + 1);
    if (second == std::string::npos) continue;
    const std::string name = key.substr(first + 1, second - first - 1);
    if (!preset.materials.count(name)) {
      preset.materials.emplace(name, load_material(config, name));
    }
  }

  preset.fiber_mirror = load_mirror(config, "fiber_mirror", preset.materials);
  preset.planar_mirror = load_mirror(config, "planar_mirror", preset.materials);

  if (config.has("membrane.material")) {
    Layer membrane;
    membrane.medium = require_material(preset.materials, config.get("membrane.material"),
                                       "membrane");
    membrane.thickness_nm = config.number("membrane.thickness_nm");
    preset.membrane = std::move(membrane);
  }

  preset.air_gap_nm = config.number_or("cavity.air_gap_nm", 0.0);
  preset.contact_gap_nm = config.number_or("cavity.contact_gap_nm", 0.0);
  preset.excess_loss_ppm = config.number_or("cavity.excess_loss_ppm", 0.0);

  preset.emitter.zpl_wavelength_nm = config.number_or("emitter.zpl_wavelength_nm", 917.0);
  preset.emitter.free_lifetime_tau0_ns = config.number_or("emitter.tau0_ns", 0.0);
  preset.emitter.debye_waller = config.number_or("emitter.debye_waller", 1.0);
  preset.emitter.quantum_efficiency = config.number_or("emitter.quantum_efficiency", 1.0);
  if (preset.membrane) {
    preset.emitter.host_index = preset.membrane->medium
                                    .index(preset.emitter.zpl_wavelength_nm,
                                           Polarization::extraordinary)
                                    .real();
  }

  preset.quality_factor = config.number_or("purcell.q", 0.0);
  preset.waist_w0_um = config.number_or("purcell.w0_um", 0.0);
  preset.overlap_xi = config.number_or("purcell.overlap_xi", 1.0);
  return preset;
}

std::string resolve_preset_path(const std::string& name_or_path, const std::string& fallback_dir) {
  namespace fs = std::filesystem;
  if (fs::exists(name_or_path)) return name_or_path;
  std::string dir = fallback_dir;
  if (const char* env = std::getenv("FPCAV_PRESET_DIR")) dir = env;
  const fs::path candidate = fs::path(dir) / (name_or_path + ".cfg");
  if (fs::exists(candidate)) return candidate.string();
  throw DataError("preset '" + name_or_path + "' not found (looked for a file of that name and " +
                  candidate.string() + ")");
}

}  // namespace fpcav
