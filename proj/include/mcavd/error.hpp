// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mcavd {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Tensor extent disagreement (matmul inner dims, broadcast targets, ...).
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Invalid argument value (dropout p >= 1, negative relevance, NaN score, ...).
class ValueError : public Error {
public:
  using Error::Error;
};

/// Binary or text container violations (bad magic, truncated file, ...).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Corpus / annotation contract violations (wrong option count, bad gt_index, ...).
class SchemaError : public Error {
public:
  using Error::Error;
};

} // namespace mcavd
