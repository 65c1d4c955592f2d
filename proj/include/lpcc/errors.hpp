// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lpcc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file on disk did not match its expected layout.
class MalformedFile : public Error {
 public:
  using Error::Error;
};

/// Container magic or version not understood.
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

/// Entropy-coded or container payload could not be parsed.
class DecodeError : public Error {
 public:
  using Error::Error;
};

class EncodeError : public Error {
 public:
  using Error::Error;
};

class EmptyFrame : public Error {
 public:
  using Error::Error;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes disagree when a graph node is created.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpcc
