#pragma once

#include <stdexcept>
#include <string>

namespace facesyn {

// Error taxonomy mirrors the CLI exit codes: DataError -> 2, NumericalError -> 3.
// Usage errors are handled by the CLI layer itself (exit 1).

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace facesyn
