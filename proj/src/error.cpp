#include "taskenc/error.hpp"

namespace taskenc {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteData: return "NonFiniteData";
    case ErrorKind::MissingEntity: return "MissingEntity";
    case ErrorKind::WindowError: return "WindowError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::KindError: return "KindError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::FoldMismatch: return "FoldMismatch";
    case ErrorKind::EmptyFit: return "EmptyFit";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::SearchFailed: return "SearchFailed";
    case ErrorKind::NoPairs: return "NoPairs";
    case ErrorKind::DistanceUndefined: return "DistanceUndefined";
    case ErrorKind::DegenerateTest: return "DegenerateTest";
    }
    return "Unknown";
}

ErrorClass classify(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::ConfigError:
    case ErrorKind::KindError:
    case ErrorKind::RangeError:
    case ErrorKind::FoldMismatch:
        return ErrorClass::Config;
    case ErrorKind::IoError:
    case ErrorKind::ParseError:
    case ErrorKind::DuplicateId:
    case ErrorKind::EmptyMatrix:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::NonFiniteData:
    case ErrorKind::MissingEntity:
    case ErrorKind::WindowError:
        return ErrorClass::Io;
    default:
        return ErrorClass::Numeric;
    }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

void rethrow_with_context(const Error& e, const std::string& context) {
    throw Error(e.kind(), context + ": " + e.detail());
}

} // namespace taskenc
