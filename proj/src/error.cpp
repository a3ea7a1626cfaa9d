#include "geostory/error.hpp"

namespace geostory {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::MalformedStory: return "malformed_story";
    case ErrorKind::RetriesExhausted: return "retries_exhausted";
  }
  return "unknown";
}

}  // namespace geostory
