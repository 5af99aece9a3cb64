// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/param_space.hpp"

#include <random>

#include "certrom/json_io.hpp"

namespace certrom::param
{

ParameterDomain::ParameterDomain(Vector lo, Vector hi, Density rho)
  : lower(std::move(lo)), upper(std::move(hi)), density(rho)
{
  Require(lower.size() >= 1, "parameter domain needs at least one dimension");
  Require(lower.size() == upper.size(), "lower/upper size mismatch");
  for (Eigen::Index i = 0; i < lower.size(); i++)
  {
    Require(lower(i) <= upper(i), "lower bound exceeds upper bound in coordinate " +
                                      std::to_string(i));
  }
}

bool ParameterDomain::contains(const Parameter &mu, double slack) const
{
  if (mu.dim() != dim())
  {
    return false;
  }
  return ((mu.values - lower).array() >= -slack).all() &&
         ((upper - mu.values).array() >= -slack).all();
}

ParameterDomain ParameterDomain::DeskScale(int blocks, int heaters)
{
  Vector lo(blocks + heaters), hi(blocks + heaters);
  lo.head(blocks).setConstant(0.1);
  hi.head(blocks).setConstant(10.0);
  lo.tail(heaters).setConstant(0.0);
  hi.tail(heaters).setConstant(1.0);
  return {lo, hi};
}

std::vector<Parameter> Sample(const ParameterDomain &domain, std::uint64_t seed, std::size_t n)
{
  Require(n >= 1, "sample count must be positive");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Parameter> out;
  out.reserve(n);
  const auto p = domain.dim();
  for (std::size_t s = 0; s < n; s++)
  {
    Vector v(p);
    for (Eigen::Index i = 0; i < p; i++)
    {
      // Drawing u first keeps the stream layout independent of degenerate coordinates.
      const double u = unit(gen);
      v(i) = domain.lower(i) + u * (domain.upper(i) - domain.lower(i));
      v(i) = std::min(v(i), domain.upper(i));
    }
    out.push_back({std::move(v)});
  }
  return out;
}

Vector Normalize(const ParameterDomain &domain, const Parameter &mu)
{
  Require(mu.dim() == domain.dim(), "parameter dimension mismatch");
  Vector z(mu.dim());
  for (Eigen::Index i = 0; i < z.size(); i++)
  {
    const double width = domain.upper(i) - domain.lower(i);
    z(i) = width > 0.0 ? 2.0 * (mu[i] - domain.lower(i)) / width - 1.0 : 0.0;
  }
  return z;
}

Parameter Denormalize(const ParameterDomain &domain, const Vector &z)
{
  Require(z.size() == domain.dim(), "normalized vector dimension mismatch");
  Vector v(z.size());
  for (Eigen::Index i = 0; i < z.size(); i++)
  {
    const double width = domain.upper(i) - domain.lower(i);
    v(i) = domain.lower(i) + 0.5 * (z(i) + 1.0) * width;
  }
  return {v};
}

void to_json(nlohmann::json &j, const ParameterDomain &d)
{
  j = nlohmann::json{{"param_dim", d.dim()},
                     {"lower", io::VectorToJson(d.lower)},
                     {"upper", io::VectorToJson(d.upper)},
                     {"density", "uniform"}};
}

ParameterDomain DomainFromJson(const nlohmann::json &j)
{
  try
  {
    const auto lo = io::VectorFromJson(j.at("lower"));
    const auto hi = io::VectorFromJson(j.at("upper"));
    if (j.contains("param_dim") && j.at("param_dim").get<Eigen::Index>() != lo.size())
    {
      throw ConfigError("param_dim does not match the length of lower/upper");
    }
    if (j.contains("density") && j.at("density").get<std::string>() != "uniform")
    {
      throw ConfigError("only the uniform density is supported");
    }
    return {lo, hi};
  }
  catch (const ContractError &e)
  {
    throw ConfigError(e.what());
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("parameter domain: ") + e.what());
  }
}

}  // namespace certrom::param
