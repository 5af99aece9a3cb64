// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/fom.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace certrom::fom
{

namespace
{

using Triplet = Eigen::Triplet<double>;

constexpr char kTrajectoryMagic[6] = {'C', 'R', 'T', 'R', 'J', '1'};

static_assert(std::endian::native == std::endian::little,
              "trajectory files are written in native little-endian order");

struct Region
{
  double x0, x1, y0, y1;
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

Region BlockRegion(int block, int per_axis)
{
  const double w = 1.0 / per_axis;
  const int bx = block % per_axis, by = block / per_axis;
  return {bx * w, (bx + 1) * w, by * w, (by + 1) * w};
}

// Central square of the block with half the block width.
Region HeaterRegion(int block, int per_axis)
{
  const auto r = BlockRegion(block, per_axis);
  const double cx = 0.5 * (r.x0 + r.x1), cy = 0.5 * (r.y0 + r.y1);
  const double half = 0.25 / per_axis;
  return {cx - half, cx + half, cy - half, cy + half};
}

}  // namespace

int FomSpec::blocks_per_axis() const
{
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(blocks))));
  return r * r == blocks ? r : -1;
}

void FomSpec::Validate() const
{
  if (grid_n < 1)
  {
    throw ConfigError("grid_n must be positive");
  }
  if (blocks < 1 || blocks_per_axis() < 1)
  {
    throw ConfigError("blocks must be a perfect square");
  }
  if (heaters < 0 || heaters > blocks)
  {
    throw ConfigError("heaters must be between 0 and the number of blocks");
  }
  if (num_steps < 1 || !(final_time > 0.0))
  {
    throw ConfigError("num_steps must be >= 1 and T > 0");
  }
  if (output_block < 0 || output_block >= blocks)
  {
    throw ConfigError("output_block out of range");
  }
  if (!(source_scale > 0.0))
  {
    throw ConfigError("source_scale must be positive");
  }
}

void to_json(nlohmann::json &j, const FomSpec &s)
{
  j = nlohmann::json{{"grid_n", s.grid_n},           {"blocks", s.blocks},
                     {"heaters", s.heaters},         {"T", s.final_time},
                     {"num_steps", s.num_steps},     {"output_block", s.output_block},
                     {"source_scale", s.source_scale}};
}

FomSpec FomSpecFromJson(const nlohmann::json &j)
{
  FomSpec s;
  try
  {
    s.grid_n = j.value("grid_n", s.grid_n);
    s.blocks = j.value("blocks", s.blocks);
    s.heaters = j.value("heaters", s.heaters);
    s.final_time = j.value("T", s.final_time);
    s.num_steps = j.value("num_steps", s.num_steps);
    s.output_block = j.value("output_block", s.output_block);
    s.source_scale = j.value("source_scale", s.source_scale);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("fom spec: ") + e.what());
  }
  s.Validate();
  return s;
}

int FomModel::BlockOf(double x, double y) const
{
  const int per_axis = spec_.blocks_per_axis();
  const auto clamp = [per_axis](double t)
  { return std::min(per_axis - 1, std::max(0, static_cast<int>(std::floor(t * per_axis)))); };
  return clamp(y) * per_axis + clamp(x);
}

FomModel::FomModel(const FomSpec &spec) : spec_(spec)
{
  spec_.Validate();
  const int n = spec_.grid_n;
  const int per_axis = spec_.blocks_per_axis();
  const Eigen::Index dofs = static_cast<Eigen::Index>(n) * n;
  const double h = grid_h();
  const auto index = [n](int i, int j) { return static_cast<Eigen::Index>(j) * n + i; };
  const auto coord = [h](int i) { return (i + 1) * h; };

  // Each stencil edge carries the arithmetic mean of its endpoint diffusivities, so half of
  // the edge goes to the block of either endpoint.
  std::vector<std::vector<Triplet>> entries(spec_.blocks);
  const auto add_edge = [&](int i, int j, int ni, int nj)
  {
    const int bp = BlockOf(coord(i), coord(j));
    const int bq = BlockOf(coord(ni), coord(nj));
    const bool interior = ni >= 0 && ni < n && nj >= 0 && nj < n;
    const Eigen::Index p = index(i, j);
    for (int b : {bp, bq})
    {
      entries[b].emplace_back(p, p, 0.5);
      if (interior)
      {
        const Eigen::Index q = index(ni, nj);
        entries[b].emplace_back(q, q, 0.5);
        entries[b].emplace_back(p, q, -0.5);
        entries[b].emplace_back(q, p, -0.5);
      }
    }
  };
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      add_edge(i, j, i + 1, j);
      add_edge(i, j, i, j + 1);
      if (i == 0)
      {
        add_edge(i, j, -1, j);
      }
      if (j == 0)
      {
        add_edge(i, j, i, -1);
      }
    }
  }
  stiffness_.resize(spec_.blocks);
  for (int b = 0; b < spec_.blocks; b++)
  {
    stiffness_[b].resize(dofs, dofs);
    stiffness_[b].setFromTriplets(entries[b].begin(), entries[b].end());
    stiffness_[b].makeCompressed();
  }

  mass_.resize(dofs, dofs);
  mass_.setIdentity();
  mass_ *= h * h;

  sources_.assign(spec_.heaters, Vector::Zero(dofs));
  for (int q = 0; q < spec_.heaters; q++)
  {
    const auto region = HeaterRegion(q, per_axis);
    Vector &l = sources_[q];
    for (int j = 0; j < n; j++)
    {
      for (int i = 0; i < n; i++)
      {
        if (region.contains(coord(i), coord(j)))
        {
          l(index(i, j)) = spec_.source_scale * h * h;
        }
      }
    }
    if (l.isZero(0.0))
    {
      throw ConfigError("grid_n = " + std::to_string(n) + " is too coarse to contain heater " +
                        std::to_string(q));
    }
  }

  output_ = Vector::Zero(dofs);
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      if (BlockOf(coord(i), coord(j)) == spec_.output_block)
      {
        output_(index(i, j)) = h * h;
      }
    }
  }
  const double measure = output_.sum();
  if (measure <= 0.0)
  {
    throw ConfigError("output block contains no grid node");
  }
  output_ /= measure;

  energy_ = stiffness_[0];
  for (int b = 1; b < spec_.blocks; b++)
  {
    energy_ += stiffness_[b];
  }
  auto solver = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(energy_);
  if (solver->info() != Eigen::Success)
  {
    throw NumericError("energy product factorization failed");
  }
  energy_solver_ = std::move(solver);
}

SparseMatrix FomModel::UnsplitStiffness() const
{
  const int n = spec_.grid_n;
  const Eigen::Index dofs = static_cast<Eigen::Index>(n) * n;
  std::vector<Triplet> t;
  for (int j = 0; j < n; j++)
  {
    for (int i = 0; i < n; i++)
    {
      const Eigen::Index p = static_cast<Eigen::Index>(j) * n + i;
      t.emplace_back(p, p, 4.0);
      if (i > 0)
      {
        t.emplace_back(p, p - 1, -1.0);
      }
      if (i + 1 < n)
      {
        t.emplace_back(p, p + 1, -1.0);
      }
      if (j > 0)
      {
        t.emplace_back(p, p - n, -1.0);
      }
      if (j + 1 < n)
      {
        t.emplace_back(p, p + n, -1.0);
      }
    }
  }
  SparseMatrix k(dofs, dofs);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

Vector FomModel::SolveEnergy(const Vector &rhs) const
{
  Require(rhs.size() == dofs(), "energy solve dimension mismatch");
  return energy_solver_->solve(rhs);
}

Matrix FomModel::SolveEnergy(const Matrix &rhs) const
{
  Require(rhs.rows() == dofs(), "energy solve dimension mismatch");
  return energy_solver_->solve(rhs);
}

SparseMatrix FomModel::Operator(const param::Parameter &mu) const
{
  Require(mu.dim() == spec_.blocks + spec_.heaters, "parameter dimension mismatch");
  SparseMatrix a = mu[0] * stiffness_[0];
  for (int b = 1; b < spec_.blocks; b++)
  {
    a += mu[b] * stiffness_[b];
  }
  return a;
}

Vector FomModel::Rhs(const param::Parameter &mu) const
{
  Require(mu.dim() == spec_.blocks + spec_.heaters, "parameter dimension mismatch");
  Vector l = Vector::Zero(dofs());
  for (int q = 0; q < spec_.heaters; q++)
  {
    l += mu[spec_.blocks + q] * sources_[q];
  }
  return l;
}

Trajectory SolveFrom(const FomModel &model, const param::Parameter &mu, const Vector &u0)
{
  Require(u0.size() == model.dofs(), "initial state dimension mismatch");
  const double dt = model.dt();
  const int steps = model.num_steps();
  const SparseMatrix system = model.mass() + dt * model.Operator(mu);
  Eigen::SimplicialLLT<SparseMatrix> solver(system);
  if (solver.info() != Eigen::Success)
  {
    throw NumericError("FOM system matrix is not positive definite");
  }
  const Vector forcing = dt * model.Rhs(mu);

  Trajectory traj{Matrix(model.dofs(), steps + 1), mu};
  traj.snapshots.col(0) = u0;
  for (int k = 1; k <= steps; k++)
  {
    traj.snapshots.col(k) = solver.solve(model.mass() * traj.snapshots.col(k - 1) + forcing);
  }
  return traj;
}

Trajectory Solve(const FomModel &model, const param::Parameter &mu)
{
  return SolveFrom(model, mu, Vector::Zero(model.dofs()));
}

Vector Output(const FomModel &model, const Trajectory &traj)
{
  Require(traj.snapshots.rows() == model.dofs(), "trajectory does not match the model");
  return traj.snapshots.transpose() * model.output_vector();
}

double TimeAverage(const Vector &series)
{
  Require(series.size() >= 2, "time average needs at least two samples");
  const auto k = series.size() - 1;
  const double sum = series.sum() - 0.5 * (series(0) + series(k));
  return sum / static_cast<double>(k);
}

double L2TimeNorm(const Vector &series, double dt)
{
  return std::sqrt(dt * series.tail(series.size() - 1).squaredNorm());
}

void WriteTrajectory(const std::filesystem::path &path, const Trajectory &traj)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  const std::uint64_t rows = static_cast<std::uint64_t>(traj.snapshots.cols());
  const std::uint64_t cols = static_cast<std::uint64_t>(traj.snapshots.rows());
  out.write(kTrajectoryMagic, sizeof(kTrajectoryMagic));
  out.write(reinterpret_cast<const char *>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char *>(&cols), sizeof(cols));
  // Column-major N_h x (K+1) is row-major (K+1) x N_h.
  out.write(reinterpret_cast<const char *>(traj.snapshots.data()),
            static_cast<std::streamsize>(rows * cols * sizeof(double)));
}

Matrix ReadTrajectorySnapshots(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw LoadError("cannot open " + path.string());
  }
  char magic[sizeof(kTrajectoryMagic)];
  std::uint64_t rows = 0, cols = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char *>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char *>(&cols), sizeof(cols));
  if (!in || std::memcmp(magic, kTrajectoryMagic, sizeof(magic)) != 0)
  {
    throw LoadError("not a trajectory file: " + path.string());
  }
  Matrix snapshots(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows));
  in.read(reinterpret_cast<char *>(snapshots.data()),
          static_cast<std::streamsize>(rows * cols * sizeof(double)));
  if (!in)
  {
    throw LoadError("truncated trajectory file: " + path.string());
  }
  return snapshots;
}

}  // namespace certrom::fom
