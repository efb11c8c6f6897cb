#ifndef ARVSU_ERRORS_HPP
#define ARVSU_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace arvsu {

// Every error thrown by the library derives from Error. kind() is a short
// machine-readable tag used by the CLI as the reason prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& what) : Error("version", what) {}
};

class TruncatedError : public Error {
 public:
  explicit TruncatedError(const std::string& what) : Error("truncated", what) {}
};

class ChecksumError : public Error {
 public:
  explicit ChecksumError(const std::string& what) : Error("checksum", what) {}
};

class ConfigMismatchError : public Error {
 public:
  explicit ConfigMismatchError(const std::string& what) : Error("config-mismatch", what) {}
};

}  // namespace arvsu

#endif  // ARVSU_ERRORS_HPP
