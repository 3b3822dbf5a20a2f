#include "cvlab/config.hpp"

#include <fstream>
#include <sstream>

#include "cvlab/error.hpp"

namespace cvlab {

namespace {

using nlohmann::json;

// byte offset -> "line L column C" for parse diagnostics
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + " column " + std::to_string(col);
}

[[noreturn]] void fail(const std::string& origin, const std::string& message) {
  throw Error(Errc::invalid_config, origin + ": " + message);
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& origin, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool ok = false;
    for (const char* a : allowed) {
      if (key == a) {
        ok = true;
        break;
      }
    }
    if (!ok) fail(origin, where + ": unknown key '" + key + "'");
  }
}

double get_number(const json& obj, const char* key, const std::string& origin,
                  const std::string& where) {
  if (!obj.contains(key)) fail(origin, where + ": missing key '" + key + "'");
  if (!obj[key].is_number()) fail(origin, where + ": '" + std::string(key) + "' must be a number");
  return obj[key].get<double>();
}

double get_number_or(const json& obj, const char* key, double fallback, const std::string& origin,
                     const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(origin, where + ": '" + std::string(key) + "' must be a number");
  return obj[key].get<double>();
}

std::size_t get_count(const json& obj, const char* key, const std::string& origin,
                      const std::string& where) {
  if (!obj.contains(key)) fail(origin, where + ": missing key '" + key + "'");
  if (!obj[key].is_number_unsigned()) {
    fail(origin, where + ": '" + std::string(key) + "' must be a nonnegative integer");
  }
  return obj[key].get<std::size_t>();
}

std::size_t get_count_or(const json& obj, const char* key, std::size_t fallback,
                         const std::string& origin, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned()) {
    fail(origin, where + ": '" + std::string(key) + "' must be a nonnegative integer");
  }
  return obj[key].get<std::size_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& origin,
                       const std::string& where) {
  if (!obj.contains(key)) fail(origin, where + ": missing key '" + key + "'");
  if (!obj[key].is_string()) fail(origin, where + ": '" + std::string(key) + "' must be a string");
  return obj[key].get<std::string>();
}

}  // namespace

Dgp dgp_from_json(const nlohmann::json& spec) {
  const std::string origin = "dgp";
  if (!spec.is_object()) fail(origin, "dgp: must be an object");
  check_keys(spec, {"preset", "p", "noise_sd"}, origin, "dgp");
  const std::string preset = get_string(spec, "preset", origin, "dgp");
  const std::size_t p = get_count_or(spec, "p", 10, origin, "dgp");
  const double noise_sd = get_number_or(spec, "noise_sd", 1.0, origin, "dgp");
  return dgp_preset(preset, p, noise_sd);
}

Learner learner_from_json(const nlohmann::json& spec, const Dgp& dgp) {
  const std::string origin = "learner";
  if (!spec.is_object()) fail(origin, "learner: must be an object");
  const std::string type = get_string(spec, "type", origin, "learner");

  Learner learner;
  if (type == "synthetic") {
    check_keys(spec, {"type", "name", "gamma", "c"}, origin, "synthetic");
    learner = synthetic_learner(get_number(spec, "gamma", origin, "synthetic"),
                                get_number(spec, "c", origin, "synthetic"), dgp);
  } else if (type == "knn") {
    check_keys(spec, {"type", "name", "k"}, origin, "knn");
    learner = knn_learner(get_count(spec, "k", origin, "knn"));
  } else if (type == "kernel") {
    check_keys(spec, {"type", "name", "bandwidth"}, origin, "kernel");
    learner = kernel_learner(get_number(spec, "bandwidth", origin, "kernel"));
  } else if (type == "boosted_stumps") {
    check_keys(spec,
               {"type", "name", "max_rounds", "learning_rate", "internal_cv_folds", "patience"},
               origin, "boosted_stumps");
    BoostConfig config;
    config.max_rounds =
        get_count_or(spec, "max_rounds", config.max_rounds, origin, "boosted_stumps");
    config.learning_rate =
        get_number_or(spec, "learning_rate", config.learning_rate, origin, "boosted_stumps");
    config.internal_cv_folds =
        get_count_or(spec, "internal_cv_folds", config.internal_cv_folds, origin, "boosted_stumps");
    config.patience = get_count_or(spec, "patience", config.patience, origin, "boosted_stumps");
    learner = boosted_stumps_learner(config);
  } else if (type == "forest") {
    check_keys(spec, {"type", "name", "num_trees", "min_leaf", "subsample", "mtry"}, origin,
               "forest");
    ForestConfig config;
    config.num_trees = get_count_or(spec, "num_trees", config.num_trees, origin, "forest");
    config.min_leaf = get_count_or(spec, "min_leaf", config.min_leaf, origin, "forest");
    config.subsample = get_number_or(spec, "subsample", config.subsample, origin, "forest");
    config.mtry = get_count_or(spec, "mtry", config.mtry, origin, "forest");
    learner = forest_learner(config);
  } else if (type == "constant") {
    check_keys(spec, {"type", "name", "value"}, origin, "constant");
    learner = constant_learner(get_number(spec, "value", origin, "constant"));
  } else {
    fail(origin, "unknown learner type '" + type + "'");
  }

  if (spec.contains("name")) {
    const std::string name = get_string(spec, "name", origin, "learner");
    const Learner inner = learner;
    learner = Learner(
        name, [inner](const Dataset& d, std::uint64_t s) { return inner.fit(d, s); },
        inner.declared_rate());
  }
  return learner;
}

ResolvedConfig parse_config(const std::string& text, const std::string& origin,
                            const RunOverrides& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(origin, std::string("parse error at ") + locate(text, e.byte) + ": " + e.what());
  }
  if (!doc.is_object()) fail(origin, "top level must be an object");
  check_keys(doc,
             {"name", "dgp", "learners", "n_grid", "k_folds", "replications", "master_seed",
              "mc_draws_oracle", "reports", "forest_oob", "rates_reps", "rates_mc_draws"},
             origin, "config");

  ResolvedConfig out;
  out.name = doc.contains("name") ? get_string(doc, "name", origin, "config") : origin;

  if (!doc.contains("dgp")) fail(origin, "missing 'dgp'");
  out.experiment.dgp = dgp_from_json(doc["dgp"]);

  if (!doc.contains("learners") || !doc["learners"].is_array() || doc["learners"].empty()) {
    fail(origin, "'learners' must be a nonempty array");
  }
  for (const auto& spec : doc["learners"]) {
    out.experiment.learners.push_back(learner_from_json(spec, out.experiment.dgp));
  }

  if (overrides.n) {
    out.experiment.n_grid = {*overrides.n};
  } else {
    if (!doc.contains("n_grid") || !doc["n_grid"].is_array() || doc["n_grid"].empty()) {
      fail(origin, "'n_grid' must be a nonempty array of sample sizes");
    }
    for (const auto& v : doc["n_grid"]) {
      if (!v.is_number_unsigned()) fail(origin, "'n_grid' entries must be nonnegative integers");
      out.experiment.n_grid.push_back(v.get<std::size_t>());
    }
  }

  out.experiment.k_folds = get_count_or(doc, "k_folds", 10, origin, "config");
  out.experiment.replications =
      overrides.reps ? *overrides.reps : get_count(doc, "replications", origin, "config");
  out.experiment.master_seed =
      overrides.seed ? *overrides.seed
                     : static_cast<std::uint64_t>(get_count(doc, "master_seed", origin, "config"));
  out.experiment.mc_draws_oracle = get_count_or(doc, "mc_draws_oracle", 100000, origin, "config");
  if (doc.contains("forest_oob")) {
    if (!doc["forest_oob"].is_boolean()) fail(origin, "'forest_oob' must be a boolean");
    out.experiment.forest_oob = doc["forest_oob"].get<bool>();
  }

  if (doc.contains("reports")) {
    if (!doc["reports"].is_array()) fail(origin, "'reports' must be an array of strings");
    for (const auto& v : doc["reports"]) {
      if (!v.is_string()) fail(origin, "'reports' must be an array of strings");
      const std::string r = v.get<std::string>();
      if (r != "prop1" && r != "prop2" && r != "zscaling" && r != "rates" && r != "paired" &&
          r != "fig1") {
        fail(origin, "unknown report '" + r +
                         "' (expected prop1, prop2, zscaling, rates, paired, or fig1)");
      }
      out.reports.push_back(r);
    }
  }
  out.rates_reps = get_count_or(doc, "rates_reps", out.rates_reps, origin, "config");
  out.rates_mc_draws = get_count_or(doc, "rates_mc_draws", out.rates_mc_draws, origin, "config");

  try {
    validate(out.experiment);
  } catch (const Error& e) {
    fail(origin, e.what());
  }

  // canonical resolved document: overrides and defaults baked in
  json canonical = doc;
  canonical["name"] = out.name;
  json grid = json::array();
  for (const std::size_t n : out.experiment.n_grid) grid.push_back(n);
  canonical["n_grid"] = grid;
  canonical["k_folds"] = out.experiment.k_folds;
  canonical["replications"] = out.experiment.replications;
  canonical["master_seed"] = out.experiment.master_seed;
  canonical["mc_draws_oracle"] = out.experiment.mc_draws_oracle;
  canonical["forest_oob"] = out.experiment.forest_oob;
  canonical["rates_reps"] = out.rates_reps;
  canonical["rates_mc_draws"] = out.rates_mc_draws;
  out.canonical = std::move(canonical);
  return out;
}

std::string ResolvedConfig::digest() const {
  const std::string bytes = canonical.dump();
  std::uint64_t h = 14695981039346656037ULL;  // FNV-1a 64
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out = "fnv1a64:";
  for (int shift = 60; shift >= 0; shift -= 4) out += hex[(h >> shift) & 0xf];
  return out;
}

const std::map<std::string, std::string>& builtin_presets() {
  static const std::map<std::string, std::string> presets = {
      {"rosset-comment-fig1", R"JSON({
  "name": "rosset-comment-fig1",
  "dgp": {"preset": "eq1", "p": 10, "noise_sd": 1.0},
  "learners": [
    {"type": "boosted_stumps", "max_rounds": 300, "learning_rate": 0.1,
     "internal_cv_folds": 5, "patience": 10, "name": "boost"},
    {"type": "forest", "num_trees": 150, "min_leaf": 8, "subsample": 0.5,
     "mtry": 1, "name": "forest"}
  ],
  "n_grid": [1600],
  "k_folds": 10,
  "replications": 1000,
  "master_seed": 101,
  "mc_draws_oracle": 20000,
  "reports": ["fig1", "paired"],
  "forest_oob": true
})JSON"},
      {"prop-suite", R"JSON({
  "name": "prop-suite",
  "dgp": {"preset": "eq1", "p": 10, "noise_sd": 1.0},
  "learners": [
    {"type": "synthetic", "gamma": 0.35, "c": 1.0, "name": "syn-fast"},
    {"type": "synthetic", "gamma": 0.3, "c": 1.0, "name": "syn-slow"}
  ],
  "n_grid": [400, 1600, 6400],
  "k_folds": 10,
  "replications": 1000,
  "master_seed": 202,
  "mc_draws_oracle": 5000,
  "reports": ["prop1", "prop2", "zscaling", "rates", "paired"],
  "rates_reps": 5,
  "rates_mc_draws": 100000
})JSON"},
      {"smoke", R"JSON({
  "name": "smoke",
  "dgp": {"preset": "eq1", "p": 5, "noise_sd": 1.0},
  "learners": [
    {"type": "synthetic", "gamma": 0.4, "c": 1.0, "name": "syn-a"},
    {"type": "synthetic", "gamma": 0.3, "c": 1.0, "name": "syn-b"}
  ],
  "n_grid": [64, 128],
  "k_folds": 4,
  "replications": 12,
  "master_seed": 303,
  "mc_draws_oracle": 2000,
  "reports": ["paired", "fig1"]
})JSON"},
  };
  return presets;
}

ResolvedConfig load_config(const std::string& path_or_preset, const RunOverrides& overrides) {
  const auto& presets = builtin_presets();
  if (const auto it = presets.find(path_or_preset); it != presets.end()) {
    return parse_config(it->second, "preset:" + path_or_preset, overrides);
  }
  std::ifstream in(path_or_preset);
  if (!in) {
    throw Error(Errc::io_error, "cannot open config '" + path_or_preset +
                                    "' (not a file, and not a built-in preset)");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path_or_preset, overrides);
}

}  // namespace cvlab
