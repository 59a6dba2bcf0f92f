#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace episteady {

enum class ErrorCode {
    InvalidModel,
    DimensionMismatch,
    NotEpisodic,
    NotIrreducible,
    UnreachableState,
    InternalInconsistency,
    Divergent,
    SingularSystem,
    EpsOutOfRange,
    DegenerateNullMass,
    NoValidSamples,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for every analysis failure; the code drives CLI exit status.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace episteady
