#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nmfkit {

/// Failure raised by every nmfkit operation.
///
/// `kind()` is a short stable category ("shape", "domain", "rank", "param",
/// "seed", "method", "numeric", "parse", "io", "metric", "degenerate") that
/// callers and the CLI switch on; `what()` carries a human-readable message
/// prefixed with the kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)), message_(message) {}

  const std::string& kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string kind_;
  std::string message_;
};

}  // namespace nmfkit
