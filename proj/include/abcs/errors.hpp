#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abcs {

/// Mean outside the open domain of a family.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Operation requested on a family/mode combination it does not cover.
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid configuration or instance; maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file, with the 1-based line number when known.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& what, std::size_t line)
        : ConfigError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace abcs
