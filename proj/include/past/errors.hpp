#pragma once

#include <stdexcept>
#include <string>

namespace past {

/// Invalid configuration or parameter values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation precondition (stepping a terminal state, mismatched inputs).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A record does not belong to, or cannot be replayed against, the given scenario.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed scenario or record file. `field` is a JSON-pointer-like path; `frame` is -1
/// when the problem is not tied to a frame.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string field, int frame, const std::string& what)
        : std::runtime_error(format(field, frame, what)), field_(std::move(field)), frame_(frame) {}

    const std::string& field() const { return field_; }
    int frame() const { return frame_; }

private:
    static std::string format(const std::string& field, int frame, const std::string& what) {
        std::string msg = "parse error at '" + field + "'";
        if (frame >= 0) msg += " (frame " + std::to_string(frame) + ")";
        return msg + ": " + what;
    }

    std::string field_;
    int frame_;
};

}  // namespace past
