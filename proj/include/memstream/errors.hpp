#pragma once

#include <stdexcept>

namespace memstream {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error { using Error::Error; };
struct InvalidEmbedding : Error { using Error::Error; };
struct InvalidStream : Error { using Error::Error; };
struct BackendError : Error { using Error::Error; };
struct SnapshotError : Error { using Error::Error; };
struct EmptyReport : Error { using Error::Error; };
struct UndefinedCorrelation : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

/// Mid-stream persistence failure; maps to exit code 3 in the CLI.
struct StreamAbort : Error { using Error::Error; };

}  // namespace memstream
