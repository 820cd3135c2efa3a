#pragma once

#include <stdexcept>
#include <string>

namespace scotbench {

enum class ErrorKind {
    ingestion,
    integrity,
    unsupported_language,
    precondition,
    donor_required,
    argument,
    io,
    config,
    example_set,
    scoring,
    incomplete_run,
    backend,
};

const char* to_string(ErrorKind kind);

// Base error for every failure that crosses a module boundary.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace scotbench
