#pragma once

#include <stdexcept>
#include <string>

namespace splat {

enum class ErrorCode {
    invalid_parameter,
    shape_mismatch,
    behind_camera,
    degenerate_geometry,
    degenerate_fit,
    training_state_corrupt,
    gradient_overflow,
    configuration,
    empty_prior,
    empty_scene,
    empty_evaluation,
    unsupported_model,
    parse,
    schema,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

}  // namespace splat
