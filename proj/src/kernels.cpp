// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/kernels.hpp"

#include <cmath>

#include "certrom/json_io.hpp"

namespace certrom::kernels
{

std::string ToString(Family f)
{
  switch (f)
  {
    case Family::Gaussian:
      return "gaussian";
    case Family::QuadraticMatern:
      return "quadratic_matern";
    case Family::LinearMatrix:
      return "linear_matrix";
    case Family::SingleDim:
      return "single_dim";
  }
  return "unknown";
}

Family FamilyFromString(const std::string &s)
{
  if (s == "gaussian")
  {
    return Family::Gaussian;
  }
  if (s == "quadratic_matern")
  {
    return Family::QuadraticMatern;
  }
  if (s == "linear_matrix")
  {
    return Family::LinearMatrix;
  }
  if (s == "single_dim")
  {
    return Family::SingleDim;
  }
  throw ConfigError("unknown kernel family '" + s + "'");
}

void KernelConfig::Validate() const
{
  Require(dim >= 1, "kernel input dimension must be positive");
  Require(epsilon > 0.0, "kernel shape parameter must be positive");
  if (inner)
  {
    Require(inner->rows() == dim && inner->cols() == dim, "inner matrix must be d x d");
  }
}

KernelConfig KernelConfig::Radial(Family f, double eps, int dim)
{
  KernelConfig cfg{f, eps, std::nullopt, dim};
  cfg.Validate();
  return cfg;
}

KernelConfig KernelConfig::TwoLayer(Family f, double eps, int dim)
{
  return Radial(f, eps, dim).WithInner(eps * Matrix::Identity(dim, dim));
}

KernelConfig KernelConfig::WithInner(Matrix A) const
{
  KernelConfig cfg = *this;
  cfg.inner = std::move(A);
  cfg.Validate();
  return cfg;
}

double Phi(Family f, double r)
{
  switch (f)
  {
    case Family::Gaussian:
      return std::exp(-r * r);
    case Family::QuadraticMatern:
      return (1.0 + r + r * r / 3.0) * std::exp(-r);
    default:
      throw ContractError("Phi is only defined for radial kernels");
  }
}

double PhiPrimeOverR(Family f, double r)
{
  switch (f)
  {
    case Family::Gaussian:
      return -2.0 * std::exp(-r * r);
    case Family::QuadraticMatern:
      return -(1.0 + r) * std::exp(-r) / 3.0;
    default:
      throw ContractError("Phi is only defined for radial kernels");
  }
}

Matrix Transform(const KernelConfig &cfg, const Matrix &X)
{
  Require(X.cols() == cfg.dim, "point dimension does not match the kernel");
  if (cfg.inner)
  {
    // Row by row so a point maps to the same bits whether it is transformed alone or in a
    // batch; interpolation at the centers relies on that.
    const Matrix &A = *cfg.inner;
    Matrix out(X.rows(), A.rows());
    for (Eigen::Index i = 0; i < X.rows(); i++)
    {
      for (Eigen::Index r = 0; r < A.rows(); r++)
      {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < X.cols(); c++)
        {
          acc += A(r, c) * X(i, c);
        }
        out(i, r) = acc;
      }
    }
    return out;
  }
  return cfg.epsilon * X;
}

double Eval(const KernelConfig &cfg, const Vector &x, const Vector &z)
{
  Require(cfg.radial(), "scalar Eval needs a radial kernel");
  Require(x.size() == cfg.dim && z.size() == cfg.dim, "point dimension does not match the kernel");
  const Vector diff = x - z;
  const double r = cfg.inner ? (*cfg.inner * diff).norm() : cfg.epsilon * diff.norm();
  return Phi(cfg.family, r);
}

Matrix GramTransformed(Family f, const Matrix &Xt, const Matrix &Zt)
{
  Require(Xt.cols() == Zt.cols(), "point dimension mismatch");
  Require(f == Family::Gaussian || f == Family::QuadraticMatern, "Gram needs a radial kernel");
  const Eigen::Index m = Xt.rows(), n = Zt.rows(), d = Xt.cols();
  Matrix K(m, n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; i++)
  {
    for (Eigen::Index j = 0; j < n; j++)
    {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < d; c++)
      {
        const double t = Xt(i, c) - Zt(j, c);
        r2 += t * t;
      }
      K(i, j) = Phi(f, std::sqrt(r2));
    }
  }
  return K;
}

Matrix Gram(const KernelConfig &cfg, const Matrix &X, const Matrix &Z)
{
  Require(cfg.radial(), "Gram needs a radial kernel");
  return GramTransformed(cfg.family, Transform(cfg, X), Transform(cfg, Z));
}

Vector Column(const KernelConfig &cfg, const Matrix &X, const Vector &z)
{
  return Gram(cfg, X, z.transpose()).col(0);
}

Matrix EvalLinearMatrix(const Vector &x, const Vector &z, int out_dim)
{
  Require(x.size() == z.size(), "point dimension mismatch");
  Require(out_dim >= 1, "output dimension must be positive");
  return x.dot(z) * Matrix::Identity(out_dim, out_dim);
}

Matrix EvalSingleDim(const Vector &x, const Vector &z, const KernelConfig &base)
{
  Require(x.size() == z.size(), "point dimension mismatch");
  Require(base.radial() && !base.inner, "single-dimensional kernels need a scalar radial base");
  Matrix K = Matrix::Zero(x.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); i++)
  {
    K(i, i) = Phi(base.family, base.epsilon * std::abs(x(i) - z(i)));
  }
  return K;
}

void to_json(nlohmann::json &j, const KernelConfig &cfg)
{
  j = nlohmann::json{{"family", ToString(cfg.family)}, {"epsilon", cfg.epsilon}, {"dim", cfg.dim}};
  if (cfg.inner)
  {
    j["A"] = io::MatrixToJson(*cfg.inner);
  }
}

KernelConfig KernelConfigFromJson(const nlohmann::json &j)
{
  try
  {
    KernelConfig cfg;
    cfg.family = FamilyFromString(j.at("family").get<std::string>());
    cfg.epsilon = j.at("epsilon").get<double>();
    cfg.dim = j.at("dim").get<int>();
    if (j.contains("A"))
    {
      cfg.inner = io::MatrixFromJson(j.at("A"));
    }
    cfg.Validate();
    return cfg;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("kernel config: ") + e.what());
  }
  catch (const ContractError &e)
  {
    throw LoadError(std::string("kernel config: ") + e.what());
  }
}

}  // namespace certrom::kernels
