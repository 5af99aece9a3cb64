// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_OPTIM_HPP
#define CERTROM_OPTIM_HPP

#include <cstdint>
#include <functional>

#include "certrom/common.hpp"

namespace certrom::optim
{

struct AdamConfig
{
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a flat parameter vector.
class AdamState
{
public:
  AdamState() = default;
  AdamState(Eigen::Index size, AdamConfig cfg);

  // Applies one update in place. A non-finite gradient leaves params and moments untouched
  // and returns false.
  bool Step(Eigen::Ref<Vector> params, const Vector &grads);

  std::int64_t step() const { return step_; }
  const Vector &first_moment() const { return m_; }
  const Vector &second_moment() const { return v_; }
  const AdamConfig &config() const { return cfg_; }

private:
  AdamConfig cfg_;
  std::int64_t step_ = 0;
  Vector m_, v_;
};

using ScalarObjective = std::function<double(const Vector &)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / 2h. Throws NumericError when f is not
// finite at a probe point.
Vector FdGradient(const ScalarObjective &f, const Vector &params, double h);

// Max over entries of |a - b| / max(|a|, |b|, floor).
double MaxRelativeDifference(const Vector &a, const Vector &b, double floor = 1e-8);

// ||a - b||_inf / max(||a||_inf, ||b||_inf); the gradient-agreement measure used by the tests.
double ScaledMaxDifference(const Vector &a, const Vector &b);

}  // namespace certrom::optim

#endif  // CERTROM_OPTIM_HPP
