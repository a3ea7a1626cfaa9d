#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geostory {

// Failure classes. The CLI maps each class to a distinct exit code.
enum class ErrorKind {
  InvalidArgument,   // precondition violated by the caller
  Configuration,     // bad request / config / schema tag
  Parse,             // malformed input text (CSV, markup, config)
  Io,                // file could not be read or written
  Transport,         // remote endpoint unreachable; retryable
  Protocol,          // remote endpoint answered with an unusable payload
  NotFound,          // lookup key absent (trajectory id, ...)
  MalformedStory,    // backend output without usable POI markup
  RetriesExhausted,  // generate/validate loop ran out of attempts
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool retryable() const noexcept { return kind_ == ErrorKind::Transport; }

 private:
  ErrorKind kind_;
};

// Parse error that knows where in the input it happened.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(ErrorKind::Parse, message + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace geostory
