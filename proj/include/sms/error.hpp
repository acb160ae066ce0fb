#pragma once

#include <stdexcept>
#include <string>

namespace sms {

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Io,
  Provider,       // retriable: remote scorer/embedder unreachable or failing
  SceneRejected,  // generator could not produce an acceptable scene; resample
  Infeasible,     // action violates true geometry
  DeadEnd,        // no candidate actions
  Numeric,        // NaN / non-finite input
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  bool retriable() const noexcept { return code_ == ErrorCode::Provider; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace sms
