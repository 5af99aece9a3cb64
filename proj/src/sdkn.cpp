// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/sdkn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "certrom/json_io.hpp"
#include "certrom/log.hpp"
#include "certrom/optim.hpp"

namespace certrom::sdkn
{

namespace
{

constexpr double kIdentityRidge = 1e-8;
constexpr double kRangePad = 0.1;

double Bump(double shape, double t, double z)
{
  const double s = shape * (t - z);
  return std::exp(-s * s);
}

}  // namespace

void SdknArchitecture::Validate() const
{
  Require(layer_dims.size() >= 2, "SDKN needs at least input and output widths");
  for (int w : layer_dims)
  {
    Require(w >= 1, "SDKN layer widths must be positive");
  }
  Require(centers >= 1, "SDKN kernel layers need at least one center");
}

SdknArchitecture SdknArchitecture::Default(int input_dim, int output_dim)
{
  return {{input_dim, 128, 128, 128, output_dim}, 64, 0};
}

Matrix ApplyKernelLayer(const SdknModel &model, int layer, const Matrix &Z)
{
  const Matrix &centers = model.centers[layer];
  const Matrix &coef = model.coef[layer];
  const Vector &shape = model.shape[layer];
  const Eigen::Index m = Z.rows(), width = Z.cols(), M = centers.cols();
  Matrix out(m, width);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < width; i++)
  {
    for (Eigen::Index s = 0; s < m; s++)
    {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < M; j++)
      {
        acc += coef(i, j) * Bump(shape(i), Z(s, i), centers(i, j));
      }
      out(s, i) = acc;
    }
  }
  return out;
}

Matrix SdknModel::ForwardBatch(const Matrix &X) const
{
  Require(X.cols() == input_dim(), "SDKN input dimension mismatch");
  Matrix H = X;
  const int L = arch.linear_layers();
  for (int l = 0; l < L; l++)
  {
    Matrix Z = H * weights[l].transpose();
    H = l + 1 < L ? ApplyKernelLayer(*this, l, Z) : std::move(Z);
  }
  return H;
}

Vector SdknModel::Forward(const Vector &x) const
{
  return ForwardBatch(x.transpose()).row(0).transpose();
}

Eigen::Index SdknModel::num_trainable() const
{
  Eigen::Index n = 0;
  for (const auto &w : weights)
  {
    n += w.size();
  }
  for (const auto &c : coef)
  {
    n += c.size();
  }
  return n;
}

Vector SdknModel::Parameters() const
{
  Vector p(num_trainable());
  Eigen::Index at = 0;
  for (const auto *group : {&weights, &coef})
  {
    for (const auto &a : *group)
    {
      p.segment(at, a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
      at += a.size();
    }
  }
  return p;
}

void SdknModel::SetParameters(const Vector &p)
{
  Require(p.size() == num_trainable(), "SDKN parameter vector size mismatch");
  Eigen::Index at = 0;
  for (auto *group : {&weights, &coef})
  {
    for (auto &a : *group)
    {
      Eigen::Map<Vector>(a.data(), a.size()) = p.segment(at, a.size());
      at += a.size();
    }
  }
}

Vector SdknGradient::Flatten() const
{
  Eigen::Index n = 0;
  for (const auto *group : {&weights, &coef})
  {
    for (const auto &a : *group)
    {
      n += a.size();
    }
  }
  Vector g(n);
  Eigen::Index at = 0;
  for (const auto *group : {&weights, &coef})
  {
    for (const auto &a : *group)
    {
      g.segment(at, a.size()) = Eigen::Map<const Vector>(a.data(), a.size());
      at += a.size();
    }
  }
  return g;
}

SdknModel Init(const SdknArchitecture &arch, const Matrix &X_sample)
{
  arch.Validate();
  Require(X_sample.rows() >= 1, "SDKN initialization needs sample inputs");
  Require(X_sample.cols() == arch.layer_dims.front(), "sample dimension mismatch");

  SdknModel model;
  model.arch = arch;
  std::mt19937_64 gen(arch.seed);
  const int L = arch.linear_layers();
  const int M = arch.centers;
  Matrix H = X_sample;
  for (int l = 0; l < L; l++)
  {
    const int din = arch.layer_dims[l], dout = arch.layer_dims[l + 1];
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(din)));
    Matrix W(dout, din);
    for (Eigen::Index c = 0; c < W.cols(); c++)
    {
      for (Eigen::Index r = 0; r < W.rows(); r++)
      {
        W(r, c) = normal(gen);
      }
    }
    model.weights.push_back(W);
    const Matrix Z = H * W.transpose();
    if (l + 1 == L)
    {
      break;
    }

    // Equispaced centers over the padded activation range; the coefficients interpolate the
    // identity at the centers so every channel starts close to a pass-through.
    Matrix centers(dout, M), coef(dout, M);
    Vector shape(dout);
    for (int i = 0; i < dout; i++)
    {
      double lo = Z.col(i).minCoeff(), hi = Z.col(i).maxCoeff();
      const double pad = hi > lo ? kRangePad * (hi - lo) : 1.0;
      lo -= pad;
      hi += pad;
      if (M == 1)
      {
        centers(i, 0) = 0.5 * (lo + hi);
        shape(i) = 1.0 / (hi - lo);
      }
      else
      {
        const double spacing = (hi - lo) / (M - 1);
        for (int j = 0; j < M; j++)
        {
          centers(i, j) = lo + j * spacing;
        }
        shape(i) = 1.0 / spacing;
      }
      Matrix K(M, M);
      for (int a = 0; a < M; a++)
      {
        for (int b = 0; b < M; b++)
        {
          K(a, b) = Bump(shape(i), centers(i, a), centers(i, b));
        }
      }
      K.diagonal().array() += kIdentityRidge;
      coef.row(i) = K.ldlt().solve(centers.row(i).transpose()).transpose();
    }
    model.centers.push_back(centers);
    model.coef.push_back(coef);
    model.shape.push_back(shape);
    H = ApplyKernelLayer(model, l, Z);
  }
  return model;
}

SdknGradient Backward(const SdknModel &model, const Matrix &X, const Matrix &Y)
{
  Require(X.rows() >= 1 && X.rows() == Y.rows(), "SDKN batch shape mismatch");
  Require(X.cols() == model.input_dim() && Y.cols() == model.output_dim(),
          "SDKN batch dimension mismatch");
  const int L = model.arch.linear_layers();

  // Forward pass keeping layer inputs H[l] and pre-activations Z[l].
  std::vector<Matrix> H(L), Z(L);
  Matrix cur = X;
  for (int l = 0; l < L; l++)
  {
    H[l] = cur;
    Z[l] = cur * model.weights[l].transpose();
    cur = l + 1 < L ? ApplyKernelLayer(model, l, Z[l]) : Z[l];
  }
  const Matrix diff = cur - Y;
  const double scale = 1.0 / static_cast<double>(diff.size());

  SdknGradient grad;
  grad.loss = scale * diff.squaredNorm();
  grad.weights.resize(L);
  grad.coef.resize(std::max(L - 1, 0));

  Matrix gZ = 2.0 * scale * diff;  // dLoss / dZ[L-1]
  for (int l = L - 1; l >= 0; l--)
  {
    grad.weights[l] = gZ.transpose() * H[l];
    if (l == 0)
    {
      break;
    }
    const Matrix gA = gZ * model.weights[l];  // dLoss / dH[l] = output of kernel layer l-1
    const int k = l - 1;
    const Matrix &centers = model.centers[k];
    const Matrix &coef = model.coef[k];
    const Vector &shape = model.shape[k];
    const Matrix &Zk = Z[k];
    const Eigen::Index m = Zk.rows(), width = Zk.cols(), M = centers.cols();
    Matrix gC = Matrix::Zero(width, M);
    Matrix gZprev(m, width);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < width; i++)
    {
      const double s2 = shape(i) * shape(i);
      for (Eigen::Index s = 0; s < m; s++)
      {
        double dt = 0.0;
        for (Eigen::Index j = 0; j < M; j++)
        {
          const double t = Zk(s, i) - centers(i, j);
          const double kv = std::exp(-s2 * t * t);
          gC(i, j) += gA(s, i) * kv;
          dt += coef(i, j) * (-2.0 * s2 * t * kv);
        }
        gZprev(s, i) = gA(s, i) * dt;
      }
    }
    grad.coef[k] = std::move(gC);
    gZ = std::move(gZprev);
  }
  return grad;
}

double MeanSquaredError(const SdknModel &model, const Matrix &X, const Matrix &Y)
{
  const Matrix diff = model.ForwardBatch(X) - Y;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

TrainReport Train(const SdknModel &model, const Matrix &X, const Matrix &Y,
                  const SdknTrainConfig &cfg, std::uint64_t seed)
{
  Require(X.rows() >= 1 && X.rows() == Y.rows(), "SDKN training data shape mismatch");
  Require(cfg.epochs >= 0 && cfg.batch_size >= 1 && cfg.learning_rate > 0.0,
          "invalid SDKN training configuration");
  const Eigen::Index N = X.rows();
  std::mt19937_64 gen(seed);
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), gen);

  Eigen::Index n_val = static_cast<Eigen::Index>(std::floor(cfg.validation_fraction * N));
  if (N < 10)
  {
    n_val = 0;
  }
  const auto gather = [&](auto first, auto last, Matrix &Xo, Matrix &Yo)
  {
    const auto count = static_cast<Eigen::Index>(std::distance(first, last));
    Xo.resize(count, X.cols());
    Yo.resize(count, Y.cols());
    Eigen::Index r = 0;
    for (auto it = first; it != last; ++it, ++r)
    {
      Xo.row(r) = X.row(*it);
      Yo.row(r) = Y.row(*it);
    }
  };
  std::vector<Eigen::Index> train_idx(order.begin() + n_val, order.end());
  Matrix Xval, Yval;
  if (n_val > 0)
  {
    gather(order.begin(), order.begin() + n_val, Xval, Yval);
  }
  else
  {
    Xval = X;
    Yval = Y;
  }

  TrainReport report;
  report.model = model;
  SdknModel current = model;
  Vector params = current.Parameters();
  optim::AdamState adam(params.size(), {cfg.learning_rate});
  double best = MeanSquaredError(current, Xval, Yval);
  report.validation_loss.push_back(best);
  if (!std::isfinite(best))
  {
    report.aborted = true;
    return report;
  }

  for (int epoch = 1; epoch <= cfg.epochs; epoch++)
  {
    std::shuffle(train_idx.begin(), train_idx.end(), gen);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += cfg.batch_size)
    {
      const auto stop = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Matrix Xb, Yb;
      gather(train_idx.begin() + start, train_idx.begin() + stop, Xb, Yb);
      const auto g = Backward(current, Xb, Yb);
      if (!std::isfinite(g.loss))
      {
        report.aborted = true;
        log::Warn("SDKN training aborted: non-finite loss in epoch " + std::to_string(epoch));
        return report;
      }
      adam.Step(params, g.Flatten());
      current.SetParameters(params);
      loss_sum += g.loss;
      batches++;
    }
    report.train_loss.push_back(batches > 0 ? loss_sum / batches : 0.0);
    const double val = MeanSquaredError(current, Xval, Yval);
    report.validation_loss.push_back(val);
    if (!std::isfinite(val))
    {
      report.aborted = true;
      log::Warn("SDKN training aborted: non-finite validation loss");
      return report;
    }
    if (val < best)
    {
      best = val;
      report.model = current;
      report.best_epoch = epoch;
    }
  }
  return report;
}

nlohmann::json ToJson(const SdknModel &m)
{
  const auto list = [](const auto &arrays)
  {
    nlohmann::json out = nlohmann::json::array();
    for (const auto &a : arrays)
    {
      if constexpr (std::is_same_v<std::decay_t<decltype(a)>, Vector>)
      {
        out.push_back(io::VectorToJson(a));
      }
      else
      {
        out.push_back(io::MatrixToJson(a));
      }
    }
    return out;
  };
  return {{"type", "sdkn"},
          {"layer_dims", m.arch.layer_dims},
          {"centers_per_channel", m.arch.centers},
          {"seed", m.arch.seed},
          {"weights", list(m.weights)},
          {"centers", list(m.centers)},
          {"coef", list(m.coef)},
          {"shape", list(m.shape)}};
}

SdknModel SdknModelFromJson(const nlohmann::json &j)
{
  try
  {
    if (j.at("type") != "sdkn")
    {
      throw LoadError("not an SDKN model");
    }
    SdknModel m;
    m.arch.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    m.arch.centers = j.at("centers_per_channel").get<int>();
    m.arch.seed = j.at("seed").get<std::uint64_t>();
    m.arch.Validate();
    for (const auto &a : j.at("weights"))
    {
      m.weights.push_back(io::MatrixFromJson(a));
    }
    for (const auto &a : j.at("centers"))
    {
      m.centers.push_back(io::MatrixFromJson(a));
    }
    for (const auto &a : j.at("coef"))
    {
      m.coef.push_back(io::MatrixFromJson(a));
    }
    for (const auto &a : j.at("shape"))
    {
      m.shape.push_back(io::VectorFromJson(a));
    }
    const int L = m.arch.linear_layers();
    if (static_cast<int>(m.weights.size()) != L || static_cast<int>(m.coef.size()) != L - 1 ||
        m.centers.size() != m.coef.size() || m.shape.size() != m.coef.size())
    {
      throw LoadError("SDKN layer count mismatch");
    }
    for (int l = 0; l < L; l++)
    {
      if (m.weights[l].rows() != m.arch.layer_dims[l + 1] ||
          m.weights[l].cols() != m.arch.layer_dims[l])
      {
        throw LoadError("SDKN weight shape mismatch in layer " + std::to_string(l));
      }
    }
    return m;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("SDKN model: ") + e.what());
  }
}

}  // namespace certrom::sdkn
