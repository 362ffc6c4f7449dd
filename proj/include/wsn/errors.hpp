#pragma once

#include <stdexcept>
#include <string>

namespace wsn {

// Error categories map 1:1 onto CLI exit codes (see tools/main.cpp).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : ContractError {
    explicit DimensionError(const std::string& msg) : ContractError(msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a metric has no defined value (e.g. AUC on single-class truth).
struct UndefinedMetricError : ContractError {
    explicit UndefinedMetricError(const std::string& msg) : ContractError(msg) {}
};

}  // namespace wsn
