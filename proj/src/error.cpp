#include "spacedit/error.hpp"

namespace spacedit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::configuration: return "configuration_error";
    case ErrorCode::shape: return "shape_error";
    case ErrorCode::input: return "input_error";
    case ErrorCode::optimization: return "optimization_error";
    case ErrorCode::precondition: return "precondition_error";
    case ErrorCode::alignment: return "alignment_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::schema: return "schema_error";
    case ErrorCode::format: return "format_error";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::busy: return "busy";
    case ErrorCode::rejected: return "rejected";
    case ErrorCode::empty_class: return "empty_class";
    case ErrorCode::degenerate: return "degenerate_input";
    case ErrorCode::io: return "io_error";
    case ErrorCode::migration: return "migration_error";
  }
  return "unknown_error";
}

}  // namespace spacedit
