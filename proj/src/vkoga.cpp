// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/vkoga.hpp"

#include <algorithm>
#include <cmath>

#include "certrom/json_io.hpp"

namespace certrom::vkoga
{

std::string ToString(StopReason r)
{
  switch (r)
  {
    case StopReason::MaxCenters:
      return "max_centers";
    case StopReason::Tolerance:
      return "tolerance";
    case StopReason::PowerFunction:
      return "power_function";
    case StopReason::Exhausted:
      return "exhausted";
  }
  return "unknown";
}

namespace
{

StopReason StopReasonFromString(const std::string &s)
{
  for (auto r : {StopReason::MaxCenters, StopReason::Tolerance, StopReason::PowerFunction,
                 StopReason::Exhausted})
  {
    if (ToString(r) == s)
    {
      return r;
    }
  }
  throw LoadError("unknown stop reason '" + s + "'");
}

// Running sum with error-free transformations: products and additions are carried to about
// twice the working precision.
class CompensatedSum
{
public:
  explicit CompensatedSum(double init = 0.0) : sum_(init) {}

  void AddProduct(double x, double y)
  {
    const double p = x * y;
    const double pe = std::fma(x, y, -p);
    const double t = sum_ + p;
    const double z = t - sum_;
    err_ += (sum_ - (t - z)) + (p - z) + pe;
    sum_ = t;
  }

  double value() const { return sum_ + err_; }

private:
  double sum_;
  double err_ = 0.0;
};

// (K (C + C_lo))_ij accumulated in compensated arithmetic, starting from init * Y_ij and
// scaling the products by sign.
Matrix CompensatedApply(const Matrix &K, const Matrix &C, const Matrix &C_lo, const Matrix *Y,
                        double sign)
{
  Matrix out(K.rows(), C.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < C.cols(); j++)
  {
    for (Eigen::Index i = 0; i < K.rows(); i++)
    {
      CompensatedSum acc(Y ? (*Y)(i, j) : 0.0);
      for (Eigen::Index k = 0; k < K.cols(); k++)
      {
        acc.AddProduct(sign * K(i, k), C(k, j));
      }
      for (Eigen::Index k = 0; k < K.cols(); k++)
      {
        acc.AddProduct(sign * K(i, k), C_lo(k, j));
      }
      out(i, j) = acc.value();
    }
  }
  return out;
}

// Iterative refinement of the two-part expansion coefficients against the Gram matrix that
// prediction evaluates. Residuals are formed in compensated arithmetic, so the interpolation
// conditions hold far below the rounding unit of the (possibly huge) coefficients.
void RefineCoefficients(VkogaModel &m, const Matrix &Yc)
{
  constexpr int kSteps = 6;
  const Matrix K = kernels::Gram(m.kernel, m.centers, m.centers);
  const Eigen::PartialPivLU<Matrix> lu(K);
  const double target = 1e-15 * std::max(1.0, Yc.cwiseAbs().maxCoeff());
  m.coef_lo = Matrix::Zero(m.coef.rows(), m.coef.cols());
  for (int step = 0; step < kSteps; step++)
  {
    const Matrix r = CompensatedApply(K, m.coef, m.coef_lo, &Yc, -1.0);
    if (r.cwiseAbs().maxCoeff() <= target)
    {
      break;
    }
    const Matrix delta = lu.solve(r);
    if (!delta.allFinite())
    {
      break;
    }
    // Fold the correction into the low part, then renormalize so coef holds the rounded sum.
    const Matrix lo = m.coef_lo + delta;
    const Matrix hi = m.coef + lo;
    m.coef_lo = lo - (hi - m.coef);
    m.coef = hi;
  }
}

}  // namespace

Vector VkogaModel::Predict(const Vector &x) const
{
  Require(x.size() == input_dim, "input dimension mismatch");
  return PredictBatch(x.transpose()).row(0).transpose();
}

Matrix VkogaModel::PredictBatch(const Matrix &X) const
{
  Require(X.cols() == input_dim, "input dimension mismatch");
  if (size() == 0)
  {
    return Matrix::Zero(X.rows(), output_dim);
  }
  const Matrix lo = coef_lo.size() == coef.size() ? coef_lo : Matrix::Zero(coef.rows(), coef.cols());
  return CompensatedApply(kernels::Gram(kernel, X, centers), coef, lo, nullptr, 1.0);
}

VkogaModel Fit(const Matrix &X, const Matrix &Y, const kernels::KernelConfig &kernel,
               const GreedyOptions &opts)
{
  const Eigen::Index N = X.rows();
  Require(N >= 1, "VKOGA needs at least one data point");
  Require(Y.rows() == N, "input/target row mismatch");
  Require(X.cols() == kernel.dim, "input dimension does not match the kernel");
  Require(opts.max_centers >= 1, "max_centers must be positive");

  const Eigen::Index b = Y.cols();
  const Eigen::Index max_n = std::min(opts.max_centers, N);
  const Matrix Xt = kernels::Transform(kernel, X);

  Matrix newton(N, max_n);          // Newton basis values at all data points
  Matrix beta = Matrix::Zero(max_n, max_n);  // v_m = sum_j beta(m, j) k(., c_j)
  Matrix newton_coef(max_n, b);
  Matrix residual = Y;
  Vector power2 = Vector::Constant(N, kernels::Phi(kernel.family, 0.0));
  std::vector<char> selected(N, 0);

  VkogaModel model;
  model.kernel = kernel;
  model.input_dim = static_cast<int>(X.cols());
  model.output_dim = static_cast<int>(b);
  model.stop = max_n == opts.max_centers ? StopReason::MaxCenters : StopReason::Exhausted;

  std::vector<Eigen::Index> chosen;
  Eigen::Index n = 0;
  for (; n < max_n; n++)
  {
    Eigen::Index pick = -1;
    double best = -1.0;
    for (Eigen::Index i = 0; i < N; i++)
    {
      if (selected[i])
      {
        continue;
      }
      const double r2 = residual.row(i).squaredNorm();
      if (r2 > best)
      {
        best = r2;
        pick = i;
      }
    }
    const double res_norm = std::sqrt(best);
    if (res_norm <= opts.greedy_tol)
    {
      model.stop = StopReason::Tolerance;
      break;
    }
    const double p = std::sqrt(std::max(power2(pick), 0.0));
    if (p < opts.power_tol)
    {
      model.stop = StopReason::PowerFunction;
      break;
    }

    Vector v = kernels::GramTransformed(kernel.family, Xt, Xt.row(pick)).col(0);
    if (n > 0)
    {
      const Vector prev = newton.row(pick).head(n).transpose();
      v.noalias() -= newton.leftCols(n) * prev;
      beta.row(n).head(n) = -(prev.transpose() * beta.topLeftCorner(n, n)) / p;
    }
    v /= p;
    beta(n, n) = 1.0 / p;

    const Eigen::RowVectorXd c = residual.row(pick) / p;
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < N; i++)
    {
      residual.row(i) -= v(i) * c;
      power2(i) -= v(i) * v(i);
    }
    residual.row(pick).setZero();
    power2(pick) = 0.0;
    newton.col(n) = v;
    newton_coef.row(n) = c;
    selected[pick] = 1;
    chosen.push_back(pick);
    model.trace.push_back({pick, res_norm, p});
  }

  model.centers.resize(n, X.cols());
  for (Eigen::Index j = 0; j < n; j++)
  {
    model.centers.row(j) = X.row(chosen[j]);
  }
  model.coef = beta.topLeftCorner(n, n).transpose() * newton_coef.topRows(n);
  if (n > 0)
  {
    Matrix Yc(n, b);
    for (Eigen::Index j = 0; j < n; j++)
    {
      Yc.row(j) = Y.row(chosen[j]);
    }
    RefineCoefficients(model, Yc);
  }
  return model;
}

nlohmann::json ToJson(const VkogaModel &m)
{
  nlohmann::json trace = nlohmann::json::array();
  for (const auto &t : m.trace)
  {
    trace.push_back({{"index", t.index}, {"residual", t.residual}, {"power", t.power}});
  }
  return {{"type", "vkoga"},
          {"kernel", m.kernel},
          {"input_dim", m.input_dim},
          {"output_dim", m.output_dim},
          {"centers", io::MatrixToJson(m.centers)},
          {"coef", io::MatrixToJson(m.coef)},
          {"coef_lo", io::MatrixToJson(m.coef_lo)},
          {"stop", ToString(m.stop)},
          {"trace", std::move(trace)}};
}

VkogaModel VkogaModelFromJson(const nlohmann::json &j)
{
  try
  {
    if (j.at("type") != "vkoga")
    {
      throw LoadError("not a VKOGA model");
    }
    VkogaModel m;
    m.kernel = kernels::KernelConfigFromJson(j.at("kernel"));
    m.input_dim = j.at("input_dim").get<int>();
    m.output_dim = j.at("output_dim").get<int>();
    m.centers = io::MatrixFromJson(j.at("centers"));
    m.coef = io::MatrixFromJson(j.at("coef"));
    if (j.contains("coef_lo"))
    {
      m.coef_lo = io::MatrixFromJson(j.at("coef_lo"));
    }
    if (m.centers.rows() == 0)
    {
      m.centers.resize(0, m.input_dim);
      m.coef.resize(0, m.output_dim);
      m.coef_lo.resize(0, m.output_dim);
    }
    m.stop = StopReasonFromString(j.at("stop").get<std::string>());
    for (const auto &t : j.at("trace"))
    {
      m.trace.push_back({t.at("index").get<Eigen::Index>(), t.at("residual").get<double>(),
                         t.at("power").get<double>()});
    }
    if (m.centers.cols() != m.input_dim || m.coef.cols() != m.output_dim ||
        m.coef.rows() != m.centers.rows() ||
        (m.coef_lo.size() != 0 && (m.coef_lo.rows() != m.coef.rows() ||
                                   m.coef_lo.cols() != m.coef.cols())))
    {
      throw LoadError("VKOGA model arrays are inconsistent");
    }
    return m;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("VKOGA model: ") + e.what());
  }
}

}  // namespace certrom::vkoga
