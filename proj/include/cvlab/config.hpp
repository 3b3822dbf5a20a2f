#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvlab/analysis.hpp"

// Experiment configs are single JSON documents (see docs/config.md for the
// annotated schema). `load_config` accepts either a path or the name of a
// built-in preset; CLI overrides are applied before the config digest is
// computed, so the digest identifies the experiment actually run.

namespace cvlab {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> n;  // replaces n_grid with a single size
};

struct ResolvedConfig {
  std::string name;
  ExperimentConfig experiment;
  std::vector<std::string> reports;  // subset of: prop1 prop2 zscaling rates paired fig1
  std::size_t rates_reps = 5;
  std::size_t rates_mc_draws = 100000;
  nlohmann::json canonical;  // the resolved document (defaults + overrides applied)

  std::string digest() const;  // fnv1a64 over the canonical dump
};

// Built-in presets, by name.
const std::map<std::string, std::string>& builtin_presets();

// Parse a config document; `origin` names the source in diagnostics.
ResolvedConfig parse_config(const std::string& text, const std::string& origin,
                            const RunOverrides& overrides = {});

// Path or preset name.
ResolvedConfig load_config(const std::string& path_or_preset, const RunOverrides& overrides = {});

// Build a learner from its structured-config block; dgp supplies the mean
// map for learners that need it (synthetic).
Learner learner_from_json(const nlohmann::json& spec, const Dgp& dgp);

// {"preset": "eq1"|"zero", "p": ..., "noise_sd": ...}
Dgp dgp_from_json(const nlohmann::json& spec);

}  // namespace cvlab
