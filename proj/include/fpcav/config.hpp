#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fpcav/cavity.hpp"
#include "fpcav/purcell.hpp"

namespace fpcav {

/// Key-value configuration with nested `[section]` headers. The original
/// text is preserved line by line so an untouched config echoes byte for
/// byte; overrides rewrite only the value part of the addressed line.
///
/// Dialect: `key = value` pairs, `[section]` / `[section.sub]` headers,
/// `#` comments, blank lines allowed. Keys are addressed as
/// `section.sub.key`. Every file carries a `schema_version` key.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(std::string text, std::string origin = "<string>");

  bool has(const std::string& dotted_key) const;
  std::string get(const std::string& dotted_key) const;
  std::string get_or(const std::string& dotted_key, const std::string& fallback) const;
  double number(const std::string& dotted_key) const;
  double number_or(const std::string& dotted_key, double fallback) const;
  int integer(const std::string& dotted_key) const;

  std::vector<std::string> keys() const;

  /// Replaces the value of an existing key; unknown keys are an error with a
  /// nearest-key suggestion.
  void override_value(const std::string& dotted_key, const std::string& value);

  /// All dotted keys that start with `prefix.`.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  /// Current text of the config (byte-identical to the source when no
  /// override has been applied).
  std::string echo() const;

  const std::string& origin() const { return origin_; }

 private:
  struct LineEntry {
    std::string text;
    std::string key;  // dotted key for key-value lines, empty otherwise
  };
  std::vector<LineEntry> lines_;
  std::map<std::string, size_t> index_;
  std::string origin_;
  bool trailing_newline_ = true;
};

std::string nearest_key(const std::string& requested, const std::vector<std::string>& known);

/// A fully resolved cavity preset: media, mirror stacks, membrane, emitter
/// and Purcell bookkeeping inputs.
struct Preset {
  std::string name;
  std::map<std::string, Medium> materials;
  StackSpec fiber_mirror;
  StackSpec planar_mirror;
  std::optional<Layer> membrane;
  double air_gap_nm = 0.0;
  double contact_gap_nm = 0.0;
  double excess_loss_ppm = 0.0;
  EmitterParams emitter;
  double quality_factor = 0.0;
  double waist_w0_um = 0.0;
  double overlap_xi = 1.0;

  CavityConfig cavity() const;          // at the preset air gap
  CavityConfig cavity_in_contact() const;
};

Preset load_preset(const Config& config);

/// Resolves a preset argument: an existing file path, or a named preset
/// looked up as <name>.cfg in the preset directory (FPCAV_PRESET_DIR
/// environment variable, falling back to `fallback_dir`).
std::string resolve_preset_path(const std::string& name_or_path, const std::string& fallback_dir);

}  // namespace fpcav
