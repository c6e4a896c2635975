#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vidinr {

/// Tensor or parameter dimensions that do not chain.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed on-disk data. `offset()` is the byte (or line) position where
/// parsing stopped.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

/// Unknown key or out-of-range value in a configuration source.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& what, std::string key)
        : std::invalid_argument(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A loss or logit became non-finite during optimization.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::int64_t step)
        : std::runtime_error(what), step_(step) {}
    std::int64_t step() const noexcept { return step_; }

private:
    std::int64_t step_;
};

}  // namespace vidinr
