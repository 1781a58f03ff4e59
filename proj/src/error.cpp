// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/error.hpp"

namespace koopdmd {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Convergence: return "convergence";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::DegenerateData: return "degenerate_data";
    case ErrorCode::IllConditioned: return "ill_conditioned";
    case ErrorCode::SingularLog: return "singular_log";
    case ErrorCode::StepSize: return "step_size";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::Usage: return "usage";
    case ErrorCode::Protocol: return "protocol";
  }
  return "unknown";
}

}  // namespace koopdmd
