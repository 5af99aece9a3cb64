// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/rb.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "certrom/json_io.hpp"
#include "certrom/reference.hpp"

namespace certrom::rb
{

namespace
{

constexpr double kZeroEnergy = 1e-12;  // relative residual energy treated as numerically zero
constexpr double kOrthDrop = 1e-8;     // relative norm left after orthogonalization

// Two passes of classical Gram-Schmidt in the G inner product.
void OrthogonalizeAgainst(const Matrix &V, const Matrix &GV, Eigen::Ref<Vector> w)
{
  for (int pass = 0; pass < 2; pass++)
  {
    w -= V * (GV.transpose() * w);
  }
}

}  // namespace

double RelativeProjectionError(const ReducedBasis &basis, const Matrix &snapshots,
                               const fom::FomModel &fom)
{
  const auto &G = fom.energy_product();
  const double total = (snapshots.transpose() * (G * snapshots)).trace();
  if (total <= 0.0)
  {
    return 0.0;
  }
  Matrix R = snapshots - basis.vectors * (basis.vectors.transpose() * (G * snapshots));
  const double rest = (R.transpose() * (G * R)).trace();
  return std::sqrt(std::max(rest, 0.0) / total);
}

ResidualPod ComputeResidualPod(const ReducedBasis &basis, const fom::Trajectory &traj,
                               const fom::FomModel &fom)
{
  Require(traj.snapshots.rows() == fom.dofs(), "trajectory does not match the FOM");
  Require(basis.vectors.rows() == fom.dofs(), "basis does not match the FOM");

  const auto &G = fom.energy_product();
  const Matrix &U = traj.snapshots;
  const Matrix &V = basis.vectors;
  const Matrix GV = G * V;

  ResidualPod pod;
  pod.modes.resize(fom.dofs(), 0);
  pod.total = (U.transpose() * (G * U)).trace();
  if (pod.total <= 0.0)
  {
    return pod;
  }

  Matrix R = U;
  for (Eigen::Index k = 0; k < R.cols(); k++)
  {
    OrthogonalizeAgainst(V, GV, R.col(k));
  }
  Matrix C = R.transpose() * (G * R);
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(C);
  if (eig.info() != Eigen::Success)
  {
    throw NumericError("POD eigendecomposition failed");
  }
  // Descending order, negative round-off clamped.
  const Vector lambda = eig.eigenvalues().reverse().cwiseMax(0.0);
  const Matrix phi = eig.eigenvectors().rowwise().reverse();
  pod.residual = lambda.sum();

  const double floor = kZeroEnergy * kZeroEnergy * pod.total;
  Eigen::Index kept = 0;
  while (kept < lambda.size() && lambda(kept) > floor)
  {
    kept++;
  }
  pod.modes = R * phi.leftCols(kept);
  for (Eigen::Index i = 0; i < kept; i++)
  {
    pod.modes.col(i) /= std::sqrt(lambda(i));
  }
  pod.energy = lambda.head(kept);
  return pod;
}

Eigen::Index ModesForTolerance(const ResidualPod &pod, double tol_pod)
{
  Require(tol_pod > 0.0, "tol_pod must be positive");
  if (pod.total <= 0.0)
  {
    return 0;
  }
  Eigen::Index modes = 0;
  double discarded = pod.residual;
  while (modes < pod.energy.size() && std::sqrt(std::max(discarded, 0.0) / pod.total) > tol_pod)
  {
    discarded -= pod.energy(modes);
    modes++;
  }
  return modes;
}

ReducedBasis AppendModes(const ReducedBasis &basis, const ResidualPod &pod, Eigen::Index count,
                         const fom::FomModel &fom)
{
  Require(count >= 0 && count <= pod.modes.cols(), "mode count out of range");
  const auto &G = fom.energy_product();
  const Matrix &V = basis.vectors;
  Matrix extended(V.rows(), V.cols() + count);
  extended.leftCols(V.cols()) = V;
  Eigen::Index filled = V.cols();
  for (Eigen::Index i = 0; i < count; i++)
  {
    Vector w = pod.modes.col(i);
    const double before = std::sqrt(w.dot(G * w));
    const auto current = extended.leftCols(filled);
    const Matrix Gcurrent = G * current;
    OrthogonalizeAgainst(current, Gcurrent, w);
    const double after = std::sqrt(std::max(w.dot(G * w), 0.0));
    if (after <= kOrthDrop * before)
    {
      continue;
    }
    extended.col(filled++) = w / after;
  }
  return {extended.leftCols(filled)};
}

ReducedBasis ExtendBasisHapod(const ReducedBasis &basis, const fom::Trajectory &traj,
                              const fom::FomModel &fom, double tol_pod)
{
  Require(tol_pod > 0.0, "tol_pod must be positive");
  const auto pod = ComputeResidualPod(basis, traj, fom);
  return AppendModes(basis, pod, ModesForTolerance(pod, tol_pod), fom);
}

Matrix ResidualComponents(const fom::FomModel &fom, const ReducedBasis &basis)
{
  const Eigen::Index n = basis.size();
  const int Q = fom.heaters(), B = fom.blocks();
  Matrix comp(fom.dofs(), Q + n * (1 + B));
  for (int q = 0; q < Q; q++)
  {
    comp.col(q) = fom.source(q);
  }
  comp.middleCols(Q, n) = fom.mass() * basis.vectors;
  for (int b = 0; b < B; b++)
  {
    comp.middleCols(Q + n * (1 + b), n) = fom.stiffness(b) * basis.vectors;
  }
  return comp;
}

namespace
{

Matrix SolveRepresentorsParallel(const fom::FomModel &fom, const Matrix &components)
{
  Matrix reps(components.rows(), components.cols());
  const auto cols = components.cols();
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < cols; j++)
  {
    reps.col(j) = fom.SolveEnergy(Vector(components.col(j)));
  }
  return reps;
}

}  // namespace

ReducedModel ProjectOperators(const fom::FomModel &fom, const ReducedBasis &basis,
                              const ProjectOptions &opts)
{
  Require(basis.vectors.rows() == fom.dofs(), "basis does not match the FOM");
  const Matrix &V = basis.vectors;

  ReducedModel rm;
  rm.basis = basis;
  rm.mass = V.transpose() * (fom.mass() * V);
  for (const auto &A : fom.stiffness())
  {
    rm.stiffness.push_back(V.transpose() * (A * V));
  }
  for (const auto &l : fom.sources())
  {
    rm.sources.push_back(V.transpose() * l);
  }
  rm.output = V.transpose() * fom.output_vector();
  rm.output_dual_norm =
      std::sqrt(std::max(0.0, fom.output_vector().dot(fom.SolveEnergy(fom.output_vector()))));
  rm.dt = fom.dt();
  rm.steps = fom.num_steps();

  if (opts.with_estimator)
  {
    const Matrix comp = ResidualComponents(fom, basis);
    const Matrix reps = opts.parallel ? SolveRepresentorsParallel(fom, comp)
                                      : reference::SolveRepresentorsSerial(fom, comp);
    Matrix gram = comp.transpose() * reps;
    rm.residual_gram = 0.5 * (gram + gram.transpose());
  }
  return rm;
}

ReducedTrajectory SolveReduced(const ReducedModel &rm, const param::Parameter &mu)
{
  const int B = rm.blocks(), Q = rm.heaters();
  Require(mu.dim() == B + Q, "parameter dimension mismatch");
  const Eigen::Index n = rm.size();
  ReducedTrajectory out{Matrix::Zero(n, rm.steps + 1), mu};
  if (n == 0)
  {
    return out;
  }
  Matrix system = rm.mass;
  for (int b = 0; b < B; b++)
  {
    system += rm.dt * mu[b] * rm.stiffness[b];
  }
  Vector forcing = Vector::Zero(n);
  for (int q = 0; q < Q; q++)
  {
    forcing += rm.dt * mu[B + q] * rm.sources[q];
  }
  Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success)
  {
    throw NumericError("reduced system matrix is not positive definite");
  }
  for (int k = 1; k <= rm.steps; k++)
  {
    out.coeffs.col(k) = llt.solve(rm.mass * out.coeffs.col(k - 1) + forcing);
  }
  return out;
}

Vector ResidualWeights(const ReducedModel &rm, const param::Parameter &mu, const Matrix &coeffs,
                       int k)
{
  const int B = rm.blocks(), Q = rm.heaters();
  const Eigen::Index n = rm.size();
  Vector w(rm.components());
  for (int q = 0; q < Q; q++)
  {
    w(q) = mu[B + q];
  }
  w.segment(Q, n) = -(coeffs.col(k) - coeffs.col(k - 1)) / rm.dt;
  for (int b = 0; b < B; b++)
  {
    w.segment(Q + n * (1 + b), n) = -mu[b] * coeffs.col(k);
  }
  return w;
}

Vector ResidualDualNormsSquared(const ReducedModel &rm, const param::Parameter &mu,
                                const Matrix &coeffs)
{
  Require(rm.has_estimator(), "reduced model was projected without estimator data");
  Require(mu.dim() == rm.blocks() + rm.heaters(), "parameter dimension mismatch");
  Require(coeffs.rows() == rm.size() && coeffs.cols() == rm.steps + 1,
          "coefficient trajectory does not match the reduced model");
  Matrix W(rm.components(), rm.steps);
  for (int k = 1; k <= rm.steps; k++)
  {
    W.col(k - 1) = ResidualWeights(rm, mu, coeffs, k);
  }
  const Matrix RW = rm.residual_gram * W;
  return W.cwiseProduct(RW).colwise().sum().transpose().cwiseMax(0.0);
}

double CoercivityLowerBound(const ReducedModel &rm, const param::Parameter &mu)
{
  return mu.values.head(rm.blocks()).minCoeff();
}

double EstimateError(const ReducedModel &rm, const param::Parameter &mu, const Matrix &coeffs)
{
  const double alpha = CoercivityLowerBound(rm, mu);
  Require(alpha > 0.0, "coercivity lower bound must be positive");
  const Vector norms = ResidualDualNormsSquared(rm, mu, coeffs);
  return std::sqrt(rm.dt * norms.sum()) / alpha;
}

double OutputBound(const ReducedModel &rm, double estimate)
{
  Require(estimate >= 0.0, "error estimate must be non-negative");
  return rm.output_dual_norm * estimate;
}

Vector ReducedOutput(const ReducedModel &rm, const Matrix &coeffs)
{
  Require(coeffs.rows() == rm.size(), "coefficient dimension mismatch");
  if (rm.size() == 0)
  {
    return Vector::Zero(coeffs.cols());
  }
  return coeffs.transpose() * rm.output;
}

Matrix Lift(const ReducedBasis &basis, const Matrix &coeffs)
{
  Require(coeffs.rows() == basis.size(), "coefficient dimension mismatch");
  return basis.vectors * coeffs;
}

nlohmann::json ToJson(const ReducedModel &rm)
{
  nlohmann::json stiff = nlohmann::json::array();
  for (const auto &a : rm.stiffness)
  {
    stiff.push_back(io::MatrixToJson(a));
  }
  nlohmann::json src = nlohmann::json::array();
  for (const auto &l : rm.sources)
  {
    src.push_back(io::VectorToJson(l));
  }
  return {{"format", "certrom-reduced-model"},
          {"version", 1},
          {"N_RB", rm.size()},
          {"N_h", rm.basis.vectors.rows()},
          {"B", rm.blocks()},
          {"Q", rm.heaters()},
          {"K", rm.steps},
          {"dt", rm.dt},
          {"basis", io::MatrixToJson(rm.basis.vectors)},
          {"mass", io::MatrixToJson(rm.mass)},
          {"stiffness", std::move(stiff)},
          {"sources", std::move(src)},
          {"output", io::VectorToJson(rm.output)},
          {"output_dual_norm", rm.output_dual_norm},
          {"residual_gram", io::MatrixToJson(rm.residual_gram)}};
}

ReducedModel ReducedModelFromJson(const nlohmann::json &j)
{
  try
  {
    if (j.at("format") != "certrom-reduced-model" || j.at("version") != 1)
    {
      throw LoadError("unsupported reduced model format/version");
    }
    ReducedModel rm;
    const auto n = j.at("N_RB").get<Eigen::Index>();
    const auto dofs = j.at("N_h").get<Eigen::Index>();
    rm.basis.vectors = io::MatrixFromJson(j.at("basis"));
    if (n == 0)
    {
      rm.basis.vectors.resize(dofs, 0);
    }
    rm.mass = io::MatrixFromJson(j.at("mass"));
    for (const auto &a : j.at("stiffness"))
    {
      rm.stiffness.push_back(io::MatrixFromJson(a));
      if (n == 0)
      {
        rm.stiffness.back().resize(0, 0);
      }
    }
    for (const auto &l : j.at("sources"))
    {
      rm.sources.push_back(io::VectorFromJson(l));
    }
    rm.output = io::VectorFromJson(j.at("output"));
    rm.output_dual_norm = j.at("output_dual_norm").get<double>();
    rm.residual_gram = io::MatrixFromJson(j.at("residual_gram"));
    rm.dt = j.at("dt").get<double>();
    rm.steps = j.at("K").get<int>();
    if (rm.basis.vectors.rows() != dofs || rm.size() != n || rm.mass.rows() != n ||
        rm.blocks() != j.at("B").get<int>() || rm.heaters() != j.at("Q").get<int>())
    {
      throw LoadError("reduced model metadata is inconsistent with its arrays");
    }
    return rm;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("reduced model: ") + e.what());
  }
}

void Save(const std::filesystem::path &path, const ReducedModel &rm)
{
  io::WriteJsonFile(path, ToJson(rm));
}

ReducedModel Load(const std::filesystem::path &path)
{
  return ReducedModelFromJson(io::ReadJsonFile(path));
}

}  // namespace certrom::rb
