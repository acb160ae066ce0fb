#include "sms/error.hpp"

namespace sms {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Io: return "io";
    case ErrorCode::Provider: return "provider";
    case ErrorCode::SceneRejected: return "scene-rejected";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::DeadEnd: return "dead-end";
    case ErrorCode::Numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace sms
