#include "hyperpatch/error.hpp"

namespace hyperpatch {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Bounds: return "bounds";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Config: return "config";
        case ErrorKind::EmptySet: return "empty-set";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::BadMagic: return "bad-magic";
        case ErrorKind::BadVersion: return "bad-version";
        case ErrorKind::Truncated: return "truncated";
        case ErrorKind::NonFinite: return "non-finite";
        case ErrorKind::Io: return "io";
        case ErrorKind::MissingFile: return "missing-file";
        case ErrorKind::ShapeMismatch: return "shape-mismatch";
        case ErrorKind::DuplicateId: return "duplicate-id";
        case ErrorKind::Parse: return "parse";
    }
    return "unknown";
}

}  // namespace hyperpatch
