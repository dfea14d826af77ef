#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace trajdbg {

// Every recoverable failure in the library carries one of these codes.
enum class Errc {
  // trajectory construction / serialization
  index_gap,
  module_rule_violation,
  out_of_range,
  schema_violation,
  // taxonomy
  unknown_error_type,
  module_mismatch,
  // templates / model output handling
  missing_placeholder,
  unknown_placeholder,
  template_syntax,
  no_json_found,
  unbalanced_braces,
  parse_failure,
  // model clients
  transport_error,
  script_exhausted,
  budget_exceeded,
  // environments
  stepped_after_done,
  not_finished,
  replay_divergence,
  non_deterministic_env,
  // pipeline
  judge_parse_failure,
  invalid_diagnosis,
  line_format_parse_failure,
  score_parse_failure,
  not_found,
  precondition,
  // evaluation
  empty_set,
  id_mismatch,
  inconsistent_ids,
  io_error,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::index_gap: return "index_gap";
    case Errc::module_rule_violation: return "module_rule_violation";
    case Errc::out_of_range: return "out_of_range";
    case Errc::schema_violation: return "schema_violation";
    case Errc::unknown_error_type: return "unknown_error_type";
    case Errc::module_mismatch: return "module_mismatch";
    case Errc::missing_placeholder: return "missing_placeholder";
    case Errc::unknown_placeholder: return "unknown_placeholder";
    case Errc::template_syntax: return "template_syntax";
    case Errc::no_json_found: return "no_json_found";
    case Errc::unbalanced_braces: return "unbalanced_braces";
    case Errc::parse_failure: return "parse_failure";
    case Errc::transport_error: return "transport_error";
    case Errc::script_exhausted: return "script_exhausted";
    case Errc::budget_exceeded: return "budget_exceeded";
    case Errc::stepped_after_done: return "stepped_after_done";
    case Errc::not_finished: return "not_finished";
    case Errc::replay_divergence: return "replay_divergence";
    case Errc::non_deterministic_env: return "non_deterministic_env";
    case Errc::judge_parse_failure: return "judge_parse_failure";
    case Errc::invalid_diagnosis: return "invalid_diagnosis";
    case Errc::line_format_parse_failure: return "line_format_parse_failure";
    case Errc::score_parse_failure: return "score_parse_failure";
    case Errc::not_found: return "not_found";
    case Errc::precondition: return "precondition";
    case Errc::empty_set: return "empty_set";
    case Errc::id_mismatch: return "id_mismatch";
    case Errc::inconsistent_ids: return "inconsistent_ids";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

struct Error {
  Errc code;
  std::string message;

  std::string str() const { return std::string(errc_name(code)) + ": " + message; }
};

// Minimal expected-style carrier. value() on an error (or error() on a value)
// throws logic_error; callers are expected to branch on ok() first.
template <typename T>
class Result {
 public:
  Result(T value) : value_(std::move(value)) {}  // NOLINT: implicit by design
  Result(Error error) : error_(std::move(error)) {}

  bool ok() const { return value_.has_value(); }
  explicit operator bool() const { return ok(); }

  const T& value() const& {
    require(ok(), "Result::value() called on error");
    return *value_;
  }
  T& value() & {
    require(ok(), "Result::value() called on error");
    return *value_;
  }
  T&& take() {
    require(ok(), "Result::take() called on error");
    return std::move(*value_);
  }
  const Error& error() const {
    require(!ok(), "Result::error() called on value");
    return *error_;
  }
  Errc code() const { return error().code; }

 private:
  static void require(bool cond, const char* msg) {
    if (!cond) throw std::logic_error(msg);
  }
  std::optional<T> value_;
  std::optional<Error> error_;
};

struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

inline Error err(Errc code, std::string message) { return Error{code, std::move(message)}; }

}  // namespace trajdbg
