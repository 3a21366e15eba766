#include "q2t/error.hpp"

namespace q2t {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kInvalidGraph: return "invalid_graph";
    case ErrorKind::kUnsupportedQuery: return "unsupported_query";
    case ErrorKind::kArity: return "arity";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kIntegrity: return "integrity";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kSampling: return "sampling";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNoRows: return "no_rows";
  }
  return "unknown";
}

}  // namespace q2t
