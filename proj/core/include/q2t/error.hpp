#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace q2t {

// Failure categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  kParse,
  kRange,
  kInvalidGraph,
  kUnsupportedQuery,
  kArity,
  kShape,
  kIntegrity,
  kConfig,
  kSampling,
  kNumeric,
  kIo,
  kNoRows,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace q2t
