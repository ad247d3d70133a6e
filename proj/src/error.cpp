#include "miff/error.hpp"

namespace miff {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::FeatureMissing: return "missing feature";
    case ErrorKind::Degenerate: return "degenerate input";
    case ErrorKind::NoModel: return "no model";
    case ErrorKind::Unstabilizable: return "unstabilizable";
    case ErrorKind::Internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace miff
