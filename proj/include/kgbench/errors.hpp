#pragma once

#include <stdexcept>
#include <string>

namespace kgbench {

// Exit codes used by the CLI: 0 success, 1 usage, 2 data, 3 divergence.
enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Divergence = 3 };

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
    virtual ExitCode exit_code() const { return ExitCode::Data; }
};

struct KindConflictError : Error {
    using Error::Error;
};

struct InvalidYearError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& path, std::size_t line, const std::string& what)
        : Error(path + ":" + std::to_string(line) + ": " + what), path(path), line(line) {}
    std::string path;
    std::size_t line;
};

struct DimMismatchError : Error {
    using Error::Error;
};

struct SpecError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct PoolExhaustedError : Error {
    using Error::Error;
};

struct MissingFeatureError : Error {
    using Error::Error;
};

struct RejectionOverflowError : Error {
    using Error::Error;
};

struct IndexError : Error {
    using Error::Error;
};

struct DegenerateSetError : Error {
    using Error::Error;
};

struct CheckpointError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::Divergence; }
};

struct UsageError : Error {
    using Error::Error;
    ExitCode exit_code() const override { return ExitCode::Usage; }
};

}  // namespace kgbench
