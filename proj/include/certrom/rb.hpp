// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_RB_HPP
#define CERTROM_RB_HPP

#include <filesystem>

#include "json.hpp"

#include "certrom/common.hpp"
#include "certrom/fom.hpp"
#include "certrom/param_space.hpp"

namespace certrom::rb
{

// G-orthonormal reduced basis, V^T G V = I. An N_h x 0 basis is the empty model.
struct ReducedBasis
{
  Matrix vectors;

  Eigen::Index size() const { return vectors.cols(); }
  static ReducedBasis Empty(Eigen::Index dofs) { return {Matrix(dofs, 0)}; }
};

// POD of the part of a trajectory that the basis misses: modes are G-orthonormal, G-orthogonal
// to the basis and sorted by descending energy. Numerically zero modes are dropped.
struct ResidualPod
{
  Matrix modes;
  Vector energy;      // POD eigenvalue of each mode
  double total = 0;   // G-energy of the whole trajectory
  double residual = 0;  // G-energy of the part orthogonal to the basis
};

ResidualPod ComputeResidualPod(const ReducedBasis &basis, const fom::Trajectory &traj,
                               const fom::FomModel &fom);

// Smallest mode count whose discarded energy satisfies sqrt(discarded / total) <= tol_pod.
Eigen::Index ModesForTolerance(const ResidualPod &pod, double tol_pod);

ReducedBasis AppendModes(const ReducedBasis &basis, const ResidualPod &pod, Eigen::Index count,
                         const fom::FomModel &fom);

// Snapshots of one FOM trajectory are projected onto the G-orthogonal complement of the
// current basis and compressed by POD (method of snapshots in the G inner product). Modes are
// appended until the discarded energy, relative to the trajectory's own energy, drops below
// tol_pod. Existing columns are never modified.
ReducedBasis ExtendBasisHapod(const ReducedBasis &basis, const fom::Trajectory &traj,
                              const fom::FomModel &fom, double tol_pod);

// Relative l2-in-time truncation error of a trajectory in the G norm.
double RelativeProjectionError(const ReducedBasis &basis, const Matrix &snapshots,
                               const fom::FomModel &fom);

// Offline data of the Galerkin reduced model. The residual Gram matrix is indexed by the
// component vectors [l_1..l_Q | M v_1..M v_N | A_1 v_1..A_1 v_N | ... | A_B v_N].
struct ReducedModel
{
  ReducedBasis basis;
  Matrix mass;                  // V^T M V
  std::vector<Matrix> stiffness;  // V^T A_b V
  std::vector<Vector> sources;  // V^T l_q
  Vector output;                // V^T s
  double output_dual_norm = 0;  // sqrt(s^T G^{-1} s)
  Matrix residual_gram;         // empty when projected without estimator data
  double dt = 0;
  int steps = 0;

  Eigen::Index size() const { return basis.size(); }
  int blocks() const { return static_cast<int>(stiffness.size()); }
  int heaters() const { return static_cast<int>(sources.size()); }
  bool has_estimator() const { return residual_gram.rows() > 0; }
  Eigen::Index components() const { return heaters() + size() * (1 + blocks()); }
};

struct ProjectOptions
{
  bool with_estimator = true;
  bool parallel = true;  // OpenMP over the Riesz representor solves
};

ReducedModel ProjectOperators(const fom::FomModel &fom, const ReducedBasis &basis,
                              const ProjectOptions &opts = {});

// Component vectors whose pairwise G^{-1} products form the residual Gram matrix.
Matrix ResidualComponents(const fom::FomModel &fom, const ReducedBasis &basis);

// Reduced coefficients over time; column k is c^k.
struct ReducedTrajectory
{
  Matrix coeffs;  // N_RB x (K+1)
  param::Parameter mu;
};

ReducedTrajectory SolveReduced(const ReducedModel &rm, const param::Parameter &mu);

// Coefficient weights of the step-k residual with respect to the residual components.
Vector ResidualWeights(const ReducedModel &rm, const param::Parameter &mu, const Matrix &coeffs,
                       int k);

// ||r^k||^2 in the dual of (V_h, G) for k = 1..K, evaluated from the offline Gram matrix only.
Vector ResidualDualNormsSquared(const ReducedModel &rm, const param::Parameter &mu,
                                const Matrix &coeffs);

// min-theta coercivity lower bound with respect to G
double CoercivityLowerBound(const ReducedModel &rm, const param::Parameter &mu);

// Bound on sqrt(dt sum_k ||u_h^k - V c^k||_G^2) for arbitrary coefficients c, including
// coefficients that did not come from SolveReduced:
//   E = sqrt(dt * sum_k ||r^k||^2) / alpha_LB(mu).
double EstimateError(const ReducedModel &rm, const param::Parameter &mu, const Matrix &coeffs);
inline double EstimateError(const ReducedModel &rm, const param::Parameter &mu,
                            const ReducedTrajectory &traj)
{
  return EstimateError(rm, mu, traj.coeffs);
}

// ||s||_{V_h'} * E, bounds the discrete L2(0,T) output error.
double OutputBound(const ReducedModel &rm, double estimate);

Vector ReducedOutput(const ReducedModel &rm, const Matrix &coeffs);

Matrix Lift(const ReducedBasis &basis, const Matrix &coeffs);

nlohmann::json ToJson(const ReducedModel &rm);
ReducedModel ReducedModelFromJson(const nlohmann::json &j);
void Save(const std::filesystem::path &path, const ReducedModel &rm);
ReducedModel Load(const std::filesystem::path &path);

}  // namespace certrom::rb

#endif  // CERTROM_RB_HPP
