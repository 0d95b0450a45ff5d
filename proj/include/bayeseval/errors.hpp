#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

namespace bayeseval {

// Domain failures carry a machine-readable code plus context so the CLI can
// emit {code, message, context} on the error stream.
class DomainError : public std::runtime_error {
public:
    DomainError(std::string code, const std::string& message,
                nlohmann::json context = nlohmann::json::object())
        : std::runtime_error(message), code_(std::move(code)), context_(std::move(context)) {}

    const std::string& code() const noexcept { return code_; }
    const nlohmann::json& context() const noexcept { return context_; }

    nlohmann::json to_json() const {
        return {{"code", code_}, {"message", what()}, {"context", context_}};
    }

private:
    std::string code_;
    nlohmann::json context_;
};

// Bad configuration (unknown keys, missing files, unparsable values).
// Separated from DomainError so the CLI can map it to exit code 2.
class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace bayeseval
