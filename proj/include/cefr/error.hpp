#pragma once

#include <stdexcept>
#include <string>

namespace cefr {

enum class ErrorKind {
    config,
    schema,
    parse,
    validation,
    input,
    singular,
    domain,
    degenerate,
    selection,
};

// All library failures carry a kind so the CLI can map them to exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind);

}  // namespace cefr
