#pragma once

#include <stdexcept>
#include <string>

namespace lsr {

// Categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config = 2, data = 3, llm = 4, io = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error data_error(const std::string& what) { return {ErrorKind::data, what}; }
inline Error llm_error(const std::string& what) { return {ErrorKind::llm, what}; }
inline Error io_error(const std::string& what) { return {ErrorKind::io, what}; }

const char* to_string(ErrorKind kind);

}  // namespace lsr
