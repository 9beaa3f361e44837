#pragma once

#include <stdexcept>
#include <string>

namespace gloss {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: malformed files, out-of-range hyperparameters, invalid keys.
struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// File could not be parsed; carries a line number where known.
struct ParseError : Error {
    ParseError(const std::string& msg, long line = -1)
        : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_number(line) {}
    long line_number;
};

// Operand shapes do not conform to an op's shape rule.
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// (I - T_uu) was numerically singular or too ill-conditioned to trust.
struct SingularityError : Error {
    SingularityError(const std::string& msg, double rho)
        : Error(msg), rho_estimate(rho) {}
    double rho_estimate;
};

// An iterative solver ran out of iterations; carries the last residual.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg), last_residual(residual) {}
    double last_residual;
};

// A batch admits no valid pair/triplet for the requested loss.
struct DegenerateBatchError : Error {
    explicit DegenerateBatchError(const std::string& msg) : Error(msg) {}
};

} // namespace gloss
