// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_PARAM_SPACE_HPP
#define CERTROM_PARAM_SPACE_HPP

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "certrom/common.hpp"

namespace certrom::param
{

enum class Density
{
  Uniform
};

// A point in the parameter box. Default layout: B block diffusivities followed by Q heater
// intensities.
struct Parameter
{
  Vector values;

  Eigen::Index dim() const { return values.size(); }
  double operator[](Eigen::Index i) const { return values(i); }
  bool operator==(const Parameter &other) const { return values == other.values; }
};

struct ParameterDomain
{
  Vector lower;
  Vector upper;
  Density density = Density::Uniform;

  ParameterDomain() = default;
  ParameterDomain(Vector lo, Vector hi, Density rho = Density::Uniform);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Parameter &mu, double slack = 0.0) const;

  // 4 diffusivities in [0.1, 10] and 2 heater intensities in [0, 1].
  static ParameterDomain DeskScale(int blocks = 4, int heaters = 2);
};

// n i.i.d. draws from the domain density; identical output for identical seeds.
std::vector<Parameter> Sample(const ParameterDomain &domain, std::uint64_t seed, std::size_t n);

// Affine map lower -> -1, upper -> +1. Degenerate coordinates map to 0.
Vector Normalize(const ParameterDomain &domain, const Parameter &mu);
Parameter Denormalize(const ParameterDomain &domain, const Vector &z);

void to_json(nlohmann::json &j, const ParameterDomain &d);
// Reads "param_dim", "lower", "upper" (and optional "density").
ParameterDomain DomainFromJson(const nlohmann::json &j);

}  // namespace certrom::param

#endif  // CERTROM_PARAM_SPACE_HPP
