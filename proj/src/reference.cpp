// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/reference.hpp"

#include <cmath>

namespace certrom::reference
{

Matrix GramSerial(kernels::Family family, const Matrix &Xt, const Matrix &Zt)
{
  Require(Xt.cols() == Zt.cols(), "point dimension mismatch");
  Matrix K(Xt.rows(), Zt.rows());
  for (Eigen::Index i = 0; i < Xt.rows(); i++)
  {
    for (Eigen::Index j = 0; j < Zt.rows(); j++)
    {
      double r2 = 0.0;
      for (Eigen::Index c = 0; c < Xt.cols(); c++)
      {
        const double t = Xt(i, c) - Zt(j, c);
        r2 += t * t;
      }
      K(i, j) = kernels::Phi(family, std::sqrt(r2));
    }
  }
  return K;
}

Matrix SolveRepresentorsSerial(const fom::FomModel &fom, const Matrix &components)
{
  Matrix reps(components.rows(), components.cols());
  for (Eigen::Index j = 0; j < components.cols(); j++)
  {
    reps.col(j) = fom.SolveEnergy(Vector(components.col(j)));
  }
  return reps;
}

Matrix ApplyKernelLayerSerial(const sdkn::SdknModel &model, int layer, const Matrix &Z)
{
  const Matrix &centers = model.centers[layer];
  const Matrix &coef = model.coef[layer];
  const Vector &shape = model.shape[layer];
  Matrix out(Z.rows(), Z.cols());
  for (Eigen::Index i = 0; i < Z.cols(); i++)
  {
    for (Eigen::Index s = 0; s < Z.rows(); s++)
    {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < centers.cols(); j++)
      {
        const double t = shape(i) * (Z(s, i) - centers(i, j));
        acc += coef(i, j) * std::exp(-t * t);
      }
      out(s, i) = acc;
    }
  }
  return out;
}

Matrix ForwardBatchSerial(const sdkn::SdknModel &model, const Matrix &X)
{
  Matrix H = X;
  const int L = model.arch.linear_layers();
  for (int l = 0; l < L; l++)
  {
    Matrix Z = H * model.weights[l].transpose();
    H = l + 1 < L ? ApplyKernelLayerSerial(model, l, Z) : std::move(Z);
  }
  return H;
}

}  // namespace certrom::reference
