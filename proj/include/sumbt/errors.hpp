#pragma once

#include <stdexcept>
#include <string>

namespace sumbt {

// Error taxonomy shared across modules. The CLI maps these onto exit codes:
// usage/config -> 1, data -> 2, numeric -> 3.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parametric models reject ontology changes; non-parametric ones accept them.
struct IncompatibleModelError : DataError {
    explicit IncompatibleModelError(const std::string& msg) : DataError(msg) {}
};

}  // namespace sumbt
