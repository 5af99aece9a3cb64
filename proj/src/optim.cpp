// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/optim.hpp"

#include <cmath>

namespace certrom::optim
{

AdamState::AdamState(Eigen::Index size, AdamConfig cfg)
  : cfg_(cfg), m_(Vector::Zero(size)), v_(Vector::Zero(size))
{
  Require(cfg.learning_rate > 0.0, "learning rate must be positive");
}

bool AdamState::Step(Eigen::Ref<Vector> params, const Vector &grads)
{
  Require(params.size() == m_.size() && grads.size() == m_.size(),
          "Adam parameter/gradient shape mismatch");
  if (!grads.allFinite())
  {
    return false;
  }
  step_++;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  params.array() -= cfg_.learning_rate * (m_.array() / c1) /
                    ((v_.array() / c2).sqrt() + cfg_.epsilon);
  return true;
}

Vector FdGradient(const ScalarObjective &f, const Vector &params, double h)
{
  Require(h > 0.0, "finite-difference step must be positive");
  Vector grad(params.size());
  Vector probe = params;
  for (Eigen::Index i = 0; i < params.size(); i++)
  {
    probe(i) = params(i) + h;
    const double up = f(probe);
    probe(i) = params(i) - h;
    const double down = f(probe);
    probe(i) = params(i);
    if (!std::isfinite(up) || !std::isfinite(down))
    {
      throw NumericError("objective is not finite near the evaluation point");
    }
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

double MaxRelativeDifference(const Vector &a, const Vector &b, double floor)
{
  Require(a.size() == b.size(), "size mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); i++)
  {
    const double scale = std::max({std::abs(a(i)), std::abs(b(i)), floor});
    worst = std::max(worst, std::abs(a(i) - b(i)) / scale);
  }
  return worst;
}

double ScaledMaxDifference(const Vector &a, const Vector &b)
{
  Require(a.size() == b.size(), "size mismatch");
  const double scale = std::max(a.lpNorm<Eigen::Infinity>(), b.lpNorm<Eigen::Infinity>());
  if (scale == 0.0)
  {
    return 0.0;
  }
  return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

}  // namespace certrom::optim
