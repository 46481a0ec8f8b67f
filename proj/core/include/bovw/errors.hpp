#pragma once

#include <stdexcept>
#include <string>

namespace bovw {

// A caller violated an operation's documented precondition.
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

// Input bytes do not follow the expected on-disk or wire format.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    IoError(const std::string& path, const std::string& what);
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Inconsistent artifacts or configuration (fingerprint or mode mismatch).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bovw
