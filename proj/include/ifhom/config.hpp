#pragma once

/// @file config.hpp
/// @brief Flat key=value run configuration: field selection (builtin name or
///        per-component drift expressions), grid, simulation parameters.
///        Canonical dumps round-trip losslessly and hash for provenance.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ifhom/field.hpp"
#include "ifhom/geometry.hpp"

namespace ifhom {

/// Drift-field selection: either a builtin with numeric parameters or a set of
/// expressions "core.b1", "plus.b1", "minus.b1", ... with variables x1..xd.
struct FieldConfig {
  std::string builtin = "zero";
  std::map<std::string, double> params;
  int dim = 2;        // expression fields only (builtins carry their own)
  double eta = 1.0;   // expression fields only
  std::map<std::string, std::string> exprs;
};

struct RunConfig {
  FieldConfig field;
  int grid_resolution = 64;
  int strip_halfwidth = 0;  // 0: eta + 8
  double sim_T = 1.0;
  double sim_dt = 0;  // 0: stability default per eps
  std::uint64_t sim_n = 10000;
  std::vector<double> eps_list = {0.1, 0.05, 0.025};
  double delta = 0.4;
  double lambda = 1.0;
  std::string backend = "grid_walk";
  std::string blend = "smoothstep5";
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out_dir = ".";
};

/// Parse the key=value text ('#' comments); unknown keys are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Canonical serialization with every default materialized; parse(dump(c))
/// reproduces c exactly.
std::string dump_config(const RunConfig& cfg);

/// FNV-1a hash of the canonical dump; stamped into output files.
std::uint64_t config_hash(const RunConfig& cfg);

/// Construct the drift field (builtin or compiled expressions).
InterfaceDrift make_field(const FieldConfig& field);

/// Grid spec implied by the config for a given field.
GridSpec make_grid(const RunConfig& cfg, const InterfaceDrift& field);

}  // namespace ifhom
