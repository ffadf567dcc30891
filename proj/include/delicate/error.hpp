#pragma once

#include <stdexcept>
#include <string>

namespace delicate {

// Error categories map 1:1 onto CLI exit codes (see tools/).
enum class ErrorKind {
    config,     // bad configuration, unknown keys, incompatible shapes requested
    data,       // unreadable/ill-formed inputs, parse failures, bad datasets
    dimension,  // tensor shape mismatch inside the engine
    numeric,    // NaN/Inf or other numeric failure
    io,         // filesystem failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorKind::config, msg); }
inline Error data_error(const std::string& msg) { return Error(ErrorKind::data, msg); }
inline Error dimension_error(const std::string& msg) { return Error(ErrorKind::dimension, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorKind::numeric, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::io, msg); }

}  // namespace delicate
