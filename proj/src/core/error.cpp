#include "concord/core/error.hpp"

namespace concord {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::phase: return "phase";
    case ErrorCode::authorization: return "authorization";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::backend: return "backend";
    case ErrorCode::protocol: return "protocol";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::generation_exhausted: return "generation_exhausted";
    case ErrorCode::analytics: return "analytics";
    case ErrorCode::undefined_influence: return "undefined_influence";
  }
  return "unknown";
}

}  // namespace concord
