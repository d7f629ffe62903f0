#pragma once

#include <stdexcept>
#include <string>

namespace davg {

/// Argument outside an operation's domain (unknown node id, bad shape, n <= m, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file; the message names the offending field.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf appeared in gradients or parameters.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every advert in an aggregation carried zero mass.
class DegenerateAggregate : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two logs being compared were produced from different seeds or drop times.
class ProvenanceMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace davg
