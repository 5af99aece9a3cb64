// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_SDKN_HPP
#define CERTROM_SDKN_HPP

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "certrom/common.hpp"

namespace certrom::sdkn
{

// Widths [d, h_1, ..., h_{L-1}, b]: L linear-kernel layers, each followed (except the last) by
// a single-dimensional Gaussian kernel layer of the same width.
struct SdknArchitecture
{
  std::vector<int> layer_dims;
  int centers = 64;  // per channel of every kernel layer
  std::uint64_t seed = 0;

  void Validate() const;
  int linear_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  static SdknArchitecture Default(int input_dim, int output_dim);
};

// Matrix-valued linear kernels collapse to weight matrices; kernel layer channel i evaluates
// sum_j coef(i, j) exp(-shape_i^2 (t - center(i, j))^2). Centers and shapes are frozen after
// initialization.
struct SdknModel
{
  SdknArchitecture arch;
  std::vector<Matrix> weights;  // weights[l]: dims[l+1] x dims[l]
  std::vector<Matrix> centers;  // centers[l]: dims[l+1] x M
  std::vector<Matrix> coef;     // coef[l]:    dims[l+1] x M
  std::vector<Vector> shape;    // shape[l]:   dims[l+1]

  int input_dim() const { return arch.layer_dims.front(); }
  int output_dim() const { return arch.layer_dims.back(); }

  Vector Forward(const Vector &x) const;
  // Rows are samples; OpenMP-parallel over the kernel-layer channels.
  Matrix ForwardBatch(const Matrix &X) const;

  Eigen::Index num_trainable() const;
  Vector Parameters() const;  // weights then coefficients, each column-major
  void SetParameters(const Vector &p);
};

struct SdknGradient
{
  std::vector<Matrix> weights;
  std::vector<Matrix> coef;
  double loss = 0;

  Vector Flatten() const;
};

// Channel map of a kernel layer, applied entrywise to a pre-activation block.
Matrix ApplyKernelLayer(const SdknModel &model, int layer, const Matrix &Z);

SdknModel Init(const SdknArchitecture &arch, const Matrix &X_sample);

// Exact gradient of MSE = mean over samples and outputs of (f(x) - y)^2.
SdknGradient Backward(const SdknModel &model, const Matrix &X, const Matrix &Y);

double MeanSquaredError(const SdknModel &model, const Matrix &X, const Matrix &Y);

struct SdknTrainConfig
{
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
};

struct TrainReport
{
  SdknModel model;  // lowest validation MSE over epochs (epoch 0 = the input model)
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;
  bool aborted = false;  // non-finite loss encountered
};

TrainReport Train(const SdknModel &model, const Matrix &X, const Matrix &Y,
                  const SdknTrainConfig &cfg, std::uint64_t seed);

nlohmann::json ToJson(const SdknModel &m);
SdknModel SdknModelFromJson(const nlohmann::json &j);

}  // namespace certrom::sdkn

#endif  // CERTROM_SDKN_HPP
