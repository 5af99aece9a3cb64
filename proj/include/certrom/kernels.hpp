// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_KERNELS_HPP
#define CERTROM_KERNELS_HPP

#include <optional>
#include <string>

#include "json.hpp"

#include "certrom/common.hpp"

namespace certrom::kernels
{

enum class Family
{
  Gaussian,         // Phi(r) = exp(-r^2)
  QuadraticMatern,  // Phi(r) = (1 + r + r^2/3) exp(-r)
  LinearMatrix,     // <x, z> I
  SingleDim         // diag(k(x_i, z_i))
};

std::string ToString(Family f);
Family FamilyFromString(const std::string &s);

// Radial kernels evaluate Phi(eps ||x - z||), or Phi(||A (x - z)||) when the inner matrix is
// present; eps is then already folded into A.
struct KernelConfig
{
  Family family = Family::Gaussian;
  double epsilon = 1.0;
  std::optional<Matrix> inner;  // d x d
  int dim = 1;

  bool radial() const { return family == Family::Gaussian || family == Family::QuadraticMatern; }
  void Validate() const;

  static KernelConfig Radial(Family f, double eps, int dim);
  // Two-layered kernel initialized at A = eps I.
  static KernelConfig TwoLayer(Family f, double eps, int dim);
  KernelConfig WithInner(Matrix A) const;
};

double Phi(Family f, double r);
// Phi'(r) / r, finite at r = 0 for both radial families.
double PhiPrimeOverR(Family f, double r);

// Rows of X mapped so that plain Euclidean distances give the kernel radius.
Matrix Transform(const KernelConfig &cfg, const Matrix &X);

double Eval(const KernelConfig &cfg, const Vector &x, const Vector &z);

// Entrywise Eval over point rows, OpenMP-parallel over the rows of X.
Matrix Gram(const KernelConfig &cfg, const Matrix &X, const Matrix &Z);
// Same with pre-transformed points.
Matrix GramTransformed(Family f, const Matrix &Xt, const Matrix &Zt);

// Column k(X, z) for a single point.
Vector Column(const KernelConfig &cfg, const Matrix &X, const Vector &z);

// <x, z> I_{out_dim}
Matrix EvalLinearMatrix(const Vector &x, const Vector &z, int out_dim);

// diag(k(x_1, z_1), ..., k(x_d, z_d)) with a 1-D radial base kernel.
Matrix EvalSingleDim(const Vector &x, const Vector &z, const KernelConfig &base);

void to_json(nlohmann::json &j, const KernelConfig &cfg);
KernelConfig KernelConfigFromJson(const nlohmann::json &j);

}  // namespace certrom::kernels

#endif  // CERTROM_KERNELS_HPP
