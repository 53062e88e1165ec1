#pragma once

#include <stdexcept>
#include <string>

namespace ssdau {

enum class ErrorKind {
  config,       // invalid configuration or arguments
  parse,        // malformed input record
  alignment,    // entity surface does not line up with text/tokens
  schema,       // relation or tag not in schema
  shape,        // dimension mismatch
  reconstruct,  // block cuts inconsistent with sentence
  provider,     // embedding provider failure
  transport,    // service unreachable
  model,        // model fitting failure
  divergence,   // non-finite training loss
  io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ssdau
