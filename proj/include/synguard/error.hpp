#pragma once

#include <stdexcept>
#include <string>

namespace synguard {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or record (corpus, vocabulary, key, JSONL).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A language-model provider failed: handshake mismatch, timeout, bad response.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside an operation's domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace synguard
