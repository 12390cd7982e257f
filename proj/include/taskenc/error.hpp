#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taskenc {

enum class ErrorKind {
    // input / data
    IoError,
    ParseError,
    DuplicateId,
    EmptyMatrix,
    ShapeMismatch,
    NonFiniteData,
    MissingEntity,
    WindowError,
    // configuration
    ConfigError,
    KindError,
    RangeError,
    FoldMismatch,
    // numeric
    EmptyFit,
    ZeroVector,
    SingularSystem,
    Diverged,
    SearchFailed,
    NoPairs,
    DistanceUndefined,
    DegenerateTest,
};

std::string_view to_string(ErrorKind kind);

/// Exit-code class used by the command-line front end.
enum class ErrorClass { Config = 1, Io = 2, Numeric = 3 };

ErrorClass classify(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

/// Re-throws `e` with `context` prepended to its message, keeping the kind.
[[noreturn]] void rethrow_with_context(const Error& e, const std::string& context);

} // namespace taskenc
