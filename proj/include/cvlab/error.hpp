#pragma once

#include <stdexcept>
#include <string>

namespace cvlab {

// Error taxonomy for the whole library. `usage` errors mean the caller
// passed something invalid (bad config, bad folds, schema mismatch) and map
// to CLI exit code 2; `runtime` errors arise from valid inputs whose data
// make the requested computation undefined (all-in-bag OOB, log of a
// nonpositive mean) and map to exit code 1.
enum class Errc {
  invalid_input,
  invalid_rate,
  invalid_config,
  invalid_folds,
  unsupported_law,
  insufficient_data,
  schema_mismatch,
  io_error,
  undefined_oob,
  log_domain,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline bool is_usage_error(Errc c) {
  switch (c) {
    case Errc::invalid_input:
    case Errc::invalid_rate:
    case Errc::invalid_config:
    case Errc::invalid_folds:
    case Errc::unsupported_law:
    case Errc::insufficient_data:
    case Errc::schema_mismatch:
    case Errc::io_error:
      return true;
    case Errc::undefined_oob:
    case Errc::log_domain:
      return false;
  }
  return false;
}

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::invalid_input: return "invalid-input";
    case Errc::invalid_rate: return "invalid-rate";
    case Errc::invalid_config: return "invalid-config";
    case Errc::invalid_folds: return "invalid-folds";
    case Errc::unsupported_law: return "unsupported-law";
    case Errc::insufficient_data: return "insufficient-data";
    case Errc::schema_mismatch: return "schema-mismatch";
    case Errc::io_error: return "io-error";
    case Errc::undefined_oob: return "undefined-oob";
    case Errc::log_domain: return "log-domain";
  }
  return "unknown";
}

}  // namespace cvlab
