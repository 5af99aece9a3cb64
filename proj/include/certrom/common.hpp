// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_COMMON_HPP
#define CERTROM_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace certrom
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Violated preconditions (dimension mismatches, invalid arguments).
class ContractError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

// Bad run configuration or model specification.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Singular or non-finite linear algebra.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Unreadable, corrupt or version-mismatched persisted files.
class LoadError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline void Require(bool cond, const std::string &msg)
{
  if (!cond)
  {
    throw ContractError(msg);
  }
}

}  // namespace certrom

#endif  // CERTROM_COMMON_HPP
