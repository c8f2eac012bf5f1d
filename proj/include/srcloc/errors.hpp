#pragma once

#include <stdexcept>
#include <string>

namespace srcloc {

// Every error carries the CLI exit code it maps to.
class Error : public std::runtime_error {
public:
    Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

namespace exit_code {
inline constexpr int kConfig = 1;
inline constexpr int kIo = 2;
inline constexpr int kNumerical = 3;
inline constexpr int kIdentifiability = 4;
} // namespace exit_code

class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& message)
        : Error("config: " + field + ": " + message, exit_code::kConfig), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io: " + what, exit_code::kIo) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(what, exit_code::kNumerical) {}
};

/// A field value crossed the overflow guard; the time step is too large.
class StabilityViolation : public NumericalError {
public:
    explicit StabilityViolation(const std::string& what) : NumericalError("stability violation: " + what) {}
};

class DivergenceError : public NumericalError {
public:
    explicit DivergenceError(const std::string& what) : NumericalError("training diverged: " + what) {}
};

class InvalidInit : public NumericalError {
public:
    explicit InvalidInit(const std::string& what) : NumericalError("invalid MH init: " + what) {}
};

class IdentifiabilityError : public Error {
public:
    explicit IdentifiabilityError(const std::string& what)
        : Error("identifiability: " + what, exit_code::kIdentifiability) {}
};

} // namespace srcloc
