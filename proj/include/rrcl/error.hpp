// SPDX-License-Identifier: Apache-2.0
//
// Exception types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace rrcl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array or input shape does not match what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Task construction or class-incremental bookkeeping failed.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MissingExemplarError : public Error {
 public:
  using Error::Error;
};

class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace rrcl
