// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "certrom/log.hpp"
#include "certrom/optim.hpp"
#include "certrom/vkoga.hpp"

namespace certrom::vkoga
{

LooResult LooLoss(kernels::Family family, const Matrix &A, const Matrix &Xb, const Matrix &Yb,
                  double ridge, bool with_gradient)
{
  const Eigen::Index m = Xb.rows();
  Require(m >= 2, "leave-one-out needs at least two points");
  Require(Yb.rows() == m, "input/target row mismatch");
  Require(A.rows() == Xb.cols() && A.cols() == Xb.cols(), "inner matrix must be d x d");

  const Matrix Xt = Xb * A.transpose();
  Matrix K = kernels::GramTransformed(family, Xt, Xt);
  K.diagonal().array() += ridge;

  LooResult out;
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success)
  {
    out.ok = false;
    return out;
  }
  const Matrix C = llt.solve(Matrix::Identity(m, m));
  const Vector d = C.diagonal();
  if (!(d.array() > 0.0).all() || !C.allFinite())
  {
    out.ok = false;
    return out;
  }
  const Matrix alpha = C * Yb;
  const Matrix E = d.cwiseInverse().asDiagonal() * alpha;  // LOO residuals, row i = e_i
  const Vector e2 = E.rowwise().squaredNorm();
  out.loss = e2.mean();
  if (!std::isfinite(out.loss))
  {
    out.ok = false;
    return out;
  }
  if (!with_gradient)
  {
    return out;
  }

  // dL = (2/m) tr(dK S) with S = -alpha U^T C + C diag(g) C, U_i = e_i / C_ii and
  // g_i = ||e_i||^2 / C_ii.
  const Matrix U = d.cwiseInverse().asDiagonal() * E;
  const Vector g = e2.cwiseQuotient(d);
  const Matrix S = -alpha * (U.transpose() * C) + C * g.asDiagonal() * C;
  const Matrix W = (2.0 / static_cast<double>(m)) * 0.5 * (S + S.transpose());

  // sum_pq W_pq Phi'(r)/r (x_p - x_q)(x_p - x_q)^T = X^T L X, L = 2 (diag(rowsum) - c).
  Matrix c(m, m);
  for (Eigen::Index q = 0; q < m; q++)
  {
    for (Eigen::Index p = 0; p < m; p++)
    {
      const double r = (Xt.row(p) - Xt.row(q)).norm();
      c(p, q) = W(p, q) * kernels::PhiPrimeOverR(family, r);
    }
  }
  Matrix L = -2.0 * c;
  L.diagonal() += 2.0 * c.rowwise().sum();
  out.grad = A * (Xb.transpose() * L * Xb);
  return out;
}

TwoLayerReport OptimizeTwoLayer(const Matrix &X, const Matrix &Y,
                                const kernels::KernelConfig &base,
                                const TwoLayerTrainConfig &cfg, std::uint64_t seed)
{
  Require(base.radial(), "two-layer optimization needs a radial base kernel");
  Require(X.rows() == Y.rows(), "input/target row mismatch");
  Require(X.cols() == base.dim, "input dimension does not match the kernel");
  Require(cfg.epochs >= 0 && cfg.batch_size >= 2 && cfg.learning_rate > 0.0 && cfg.ridge > 0.0,
          "invalid two-layer training configuration");

  const Eigen::Index N = X.rows(), d = X.cols();
  TwoLayerReport report;
  Matrix A = base.inner ? *base.inner : Matrix(base.epsilon * Matrix::Identity(d, d));
  optim::AdamState adam(d * d, {cfg.learning_rate});
  std::mt19937_64 gen(seed);
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; epoch++)
  {
    std::shuffle(order.begin(), order.end(), gen);
    double loss_sum = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < N; start += cfg.batch_size)
    {
      const Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, N - start);
      if (size < 2)
      {
        continue;
      }
      Matrix Xb(size, d), Yb(size, Y.cols());
      for (Eigen::Index i = 0; i < size; i++)
      {
        Xb.row(i) = X.row(order[start + i]);
        Yb.row(i) = Y.row(order[start + i]);
      }
      const auto loo = LooLoss(base.family, A, Xb, Yb, cfg.ridge);
      if (!loo.ok || !loo.grad.allFinite())
      {
        report.skipped_batches++;
        log::Warn("two-layer optimization: skipping numerically singular batch in epoch " +
                  std::to_string(epoch));
        continue;
      }
      Eigen::Map<Vector> flat(A.data(), A.size());
      const Eigen::Map<const Vector> grad(loo.grad.data(), loo.grad.size());
      if (adam.Step(flat, grad))
      {
        report.steps++;
      }
      loss_sum += loo.loss;
      batches++;
    }
    report.epoch_loss.push_back(batches > 0 ? loss_sum / batches : 0.0);
  }
  report.inner = A;
  return report;
}

VkogaModel TwoLayerFit(const Matrix &X, const Matrix &Y, const kernels::KernelConfig &base,
                       const TwoLayerTrainConfig &cfg, const GreedyOptions &opts,
                       std::uint64_t seed)
{
  const auto report = OptimizeTwoLayer(X, Y, base, cfg, seed);
  return Fit(X, Y, base.WithInner(report.inner), opts);
}

}  // namespace certrom::vkoga
