#include "cat/error.hpp"

namespace cat {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parse: return "parse_error";
    case ErrorKind::invariant: return "invariant_violation";
    case ErrorKind::dimension: return "dimension_mismatch";
    case ErrorKind::domain: return "domain_error";
    case ErrorKind::numeric: return "numeric_error";
    case ErrorKind::io: return "io_error";
  }
  return "error";
}

}  // namespace cat
