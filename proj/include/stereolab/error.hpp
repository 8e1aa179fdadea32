// Copyright 2026 The stereolab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace stereolab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing or unusable data on disk (CLI exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed file content; message carries the byte offset where parsing failed.
class FormatError : public DataError {
public:
    FormatError(const std::string& what, long offset)
        : DataError(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
    long offset() const { return offset_; }

private:
    long offset_;
};

/// Checkpoint/config hash mismatch (CLI exit code 4).
class HashMismatchError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

} // namespace stereolab
