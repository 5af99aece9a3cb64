// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_FOM_HPP
#define CERTROM_FOM_HPP

#include <filesystem>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "json.hpp"

#include "certrom/common.hpp"
#include "certrom/param_space.hpp"

namespace certrom::fom
{

using SparseMatrix = Eigen::SparseMatrix<double>;

// Desk-scale heat equation on the unit square with homogeneous Dirichlet data. The square is
// split into a sqrt(B) x sqrt(B) grid of blocks with independent diffusivities; Q heaters are
// indicator sources placed in the centre of blocks 0, 1, ..., Q-1.
struct FomSpec
{
  int grid_n = 32;        // interior nodes per axis
  int blocks = 4;         // perfect square
  int heaters = 2;
  double final_time = 1.0;
  int num_steps = 100;
  int output_block = 3;   // subdomain averaged by the output functional
  double source_scale = 100.0;

  int blocks_per_axis() const;
  void Validate() const;
};

void to_json(nlohmann::json &j, const FomSpec &s);
// Reads "grid_n", "blocks", "heaters", "T", "num_steps", "output_block", "source_scale"; any
// missing key keeps its default.
FomSpec FomSpecFromJson(const nlohmann::json &j);

// Parameter-separable operators a(u, v; mu) = sum_b mu_b <A_b u, v> and
// l(v; mu) = sum_q mu_{B+q} <l_q, v>, plus the energy product G = sum_b A_b. Immutable after
// assembly and safe to share between concurrent solves.
class FomModel
{
public:
  explicit FomModel(const FomSpec &spec);

  const FomSpec &spec() const { return spec_; }
  Eigen::Index dofs() const { return mass_.rows(); }
  int blocks() const { return spec_.blocks; }
  int heaters() const { return spec_.heaters; }
  int num_steps() const { return spec_.num_steps; }
  double dt() const { return spec_.final_time / spec_.num_steps; }
  double grid_h() const { return 1.0 / (spec_.grid_n + 1); }

  const SparseMatrix &mass() const { return mass_; }
  const SparseMatrix &stiffness(int b) const { return stiffness_.at(b); }
  const std::vector<SparseMatrix> &stiffness() const { return stiffness_; }
  const Vector &source(int q) const { return sources_.at(q); }
  const std::vector<Vector> &sources() const { return sources_; }
  const Vector &output_vector() const { return output_; }
  const SparseMatrix &energy_product() const { return energy_; }

  // Unsplit 5-point stiffness assembled directly, for the partition identity check.
  SparseMatrix UnsplitStiffness() const;

  // Solves G x = rhs with the factorization computed at assembly.
  Vector SolveEnergy(const Vector &rhs) const;
  Matrix SolveEnergy(const Matrix &rhs) const;

  SparseMatrix Operator(const param::Parameter &mu) const;  // A(mu)
  Vector Rhs(const param::Parameter &mu) const;             // l(mu)

  int BlockOf(double x, double y) const;

private:
  FomSpec spec_;
  SparseMatrix mass_;
  std::vector<SparseMatrix> stiffness_;
  std::vector<Vector> sources_;
  Vector output_;
  SparseMatrix energy_;
  std::shared_ptr<const Eigen::SimplicialLDLT<SparseMatrix>> energy_solver_;
};

// Nodal values over time; column k is u^k, so the storage is the row-major (K+1) x N_h layout
// of the trajectory file.
struct Trajectory
{
  Matrix snapshots;  // N_h x (K+1)
  param::Parameter mu;

  Eigen::Index steps() const { return snapshots.cols() - 1; }
};

// Implicit Euler from u^0 = 0: (M + dt A(mu)) u^k = M u^{k-1} + dt l(mu).
Trajectory Solve(const FomModel &model, const param::Parameter &mu);
// Same scheme from an arbitrary initial state and forcing weights.
Trajectory SolveFrom(const FomModel &model, const param::Parameter &mu, const Vector &u0);

// f_k = s . u^k
Vector Output(const FomModel &model, const Trajectory &traj);

// Trapezoidal time average over [0, T] of an equispaced series.
double TimeAverage(const Vector &series);

// Discrete L2(0,T) norm sqrt(dt * sum_{k>=1} f_k^2), the norm the output bound controls.
double L2TimeNorm(const Vector &series, double dt);

// Binary trajectory file: "CRTRJ1", u64 rows = K+1, u64 cols = N_h, then row-major f64, all
// little-endian.
void WriteTrajectory(const std::filesystem::path &path, const Trajectory &traj);
Matrix ReadTrajectorySnapshots(const std::filesystem::path &path);

}  // namespace certrom::fom

#endif  // CERTROM_FOM_HPP
