// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_VKOGA_HPP
#define CERTROM_VKOGA_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "certrom/common.hpp"
#include "certrom/kernels.hpp"

namespace certrom::vkoga
{

enum class StopReason
{
  MaxCenters,
  Tolerance,
  PowerFunction,
  Exhausted
};

std::string ToString(StopReason r);

// One greedy step: selected data index, residual norm that selected it, power function value
// at the selected point.
struct TraceEntry
{
  Eigen::Index index;
  double residual;
  double power;
};

// Sparse kernel expansion s(x) = sum_j alpha_j k(x, c_j) with vector-valued alpha_j.
struct VkogaModel
{
  kernels::KernelConfig kernel;
  Matrix centers;  // n x d, insertion order
  Matrix coef;     // n x b
  // Low-order part: the expansion coefficients are coef + coef_lo to about twice double
  // precision. Empty means zero.
  Matrix coef_lo;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<TraceEntry> trace;
  StopReason stop = StopReason::Exhausted;

  Eigen::Index size() const { return centers.rows(); }

  Vector Predict(const Vector &x) const;
  Matrix PredictBatch(const Matrix &X) const;  // rows are points
};

struct GreedyOptions
{
  Eigen::Index max_centers = 500;
  double greedy_tol = 1e-10;
  double power_tol = 1e-10;
};

// f-greedy VKOGA: each step picks the unselected point of largest l2 residual (lowest index on
// ties) and extends the Newton basis by one Gram-Schmidt step in the native space, so step n
// costs O(N n) plus N kernel evaluations.
VkogaModel Fit(const Matrix &X, const Matrix &Y, const kernels::KernelConfig &kernel,
               const GreedyOptions &opts);

nlohmann::json ToJson(const VkogaModel &m);
VkogaModel VkogaModelFromJson(const nlohmann::json &j);

// Hyperparameters of the inner-matrix optimization.
struct TwoLayerTrainConfig
{
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 5e-3;
  double ridge = 1e-8;
};

struct LooResult
{
  double loss = 0;
  Matrix grad;  // d x d, dL/dA
  bool ok = true;
};

// Batch leave-one-out loss for k_A: with K = K_A(Xb, Xb) + ridge I and C = K^{-1}, the LOO
// residuals are e_i = (C Y)_i / C_ii and the loss is mean_i ||e_i||^2. The gradient follows
// from dC = -C dK C and dK_pq / dA = Phi'(r)/r * A d d^T with d = x_p - x_q.
LooResult LooLoss(kernels::Family family, const Matrix &A, const Matrix &Xb, const Matrix &Yb,
                  double ridge, bool with_gradient = true);

struct TwoLayerReport
{
  Matrix inner;
  std::vector<double> epoch_loss;
  int skipped_batches = 0;
  int steps = 0;
};

// Seeded shuffle per epoch, batches of batch_size (a trailing batch needs >= 2 points), one
// Adam step per batch. Starts from A = eps I of the base kernel.
TwoLayerReport OptimizeTwoLayer(const Matrix &X, const Matrix &Y,
                                const kernels::KernelConfig &base,
                                const TwoLayerTrainConfig &cfg, std::uint64_t seed);

VkogaModel TwoLayerFit(const Matrix &X, const Matrix &Y, const kernels::KernelConfig &base,
                       const TwoLayerTrainConfig &cfg, const GreedyOptions &opts,
                       std::uint64_t seed);

}  // namespace certrom::vkoga

#endif  // CERTROM_VKOGA_HPP
