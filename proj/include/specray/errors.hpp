// Copyright 2026 The specray Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace specray {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad value passed to an operation (out-of-range argument, non-unit vector, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Malformed input data (tabulated spectra, meshes, maps).
class InvalidData : public Error {
public:
    using Error::Error;
};

// Scene file parse failure; carries 1-based line/column of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(msg), line(line), column(column) {}
    int line = 0;
    int column = 0;
};

// Scene-level invariant violation or dangling cross-reference.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Geometric precondition failure (wrong-side normal, degenerate light query).
class GeometryError : public Error {
public:
    using Error::Error;
};

// Sub-domain routing violation or lost boundary ray.
class RoutingError : public Error {
public:
    using Error::Error;
};

// Ledger merge requested while a terminated sub-domain was never flushed.
class IncompleteGatherError : public Error {
public:
    using Error::Error;
};

// Scheduler made no progress for a full epoch with rays still in flight.
class DeadlockError : public Error {
public:
    using Error::Error;
};

} // namespace specray
