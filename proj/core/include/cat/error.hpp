#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cat {

/// Broad category of a failure. The CLI maps these onto exit codes and the
/// "code" field of its error JSON.
enum class ErrorKind {
  parse,      // malformed file or manifest
  invariant,  // a domain-type invariant would be violated
  dimension,  // shapes or class sets of paired inputs disagree
  domain,     // argument outside the operation's valid range
  numeric,    // non-finite value, divergence, indefinite matrix
  io,         // filesystem failure
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace cat
