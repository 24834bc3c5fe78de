#pragma once

#include <stdexcept>
#include <string>

namespace nvsm {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: usage 1, data 2, numeric 3.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nvsm
