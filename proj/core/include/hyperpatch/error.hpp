#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyperpatch {

enum class ErrorKind {
    Bounds,
    Shape,
    Config,
    EmptySet,
    UndefinedMetric,
    BadMagic,
    BadVersion,
    Truncated,
    NonFinite,
    Io,
    MissingFile,
    ShapeMismatch,
    DuplicateId,
    Parse,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hyperpatch
