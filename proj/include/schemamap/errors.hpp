#pragma once

#include <stdexcept>
#include <string>

namespace schemamap {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input (JSON, CSV, ledger lines, ...).
struct ParseError : Error {
  using Error::Error;
};

// An invariant on a loaded or constructed value does not hold.
struct ValidationError : Error {
  using Error::Error;
};

// Bad run configuration: unknown backend, missing directory, invalid flag.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Transport-level mapping-backend failure. Retryable.
struct BackendError : Error {
  using Error::Error;
};

// Search-provider failure. The agent ledgers an incident and continues.
struct ProviderError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};

// The run could not continue (backend unreachable after the retry budget).
// A checkpoint for the last completed iteration is left behind.
struct RunAborted : Error {
  using Error::Error;
};

}  // namespace schemamap
