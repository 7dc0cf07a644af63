#pragma once

#include <stdexcept>
#include <string>

namespace attnscope {

// All library failures derive from Error so callers can catch one type and
// still discriminate on the concrete subclass.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed dump: bad magic, header JSON, header invariants, size mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Chunks handed to the writer out of order, or too few at finalize.
class SequencingError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// File length disagrees with the size implied by the header.
class SizeMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Checksum mismatch on a data chunk.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Invalid numeric or configuration argument.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace attnscope
