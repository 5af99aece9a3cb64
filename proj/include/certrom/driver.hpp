// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_DRIVER_HPP
#define CERTROM_DRIVER_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "certrom/fom.hpp"
#include "certrom/hierarchy.hpp"
#include "certrom/param_space.hpp"

namespace certrom::driver
{

struct RunConfig
{
  fom::FomSpec fom;
  param::ParameterDomain domain = param::ParameterDomain::DeskScale();
  hierarchy::HierarchyConfig hierarchy;
  std::size_t n_mc = 500;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "certrom_out";
  bool fom_only = false;           // answer every query with the FOM (reference runs)
  bool audit_trajectories = false;  // keep FOM trajectories under out_dir/trajectories
};

RunConfig RunConfigFromJson(const nlohmann::json &j);
RunConfig LoadRunConfig(const std::filesystem::path &path);
nlohmann::json ToJson(const RunConfig &cfg);

// Welford running mean and sum of squared deviations.
struct McAccumulator
{
  std::size_t count = 0;
  double mean = 0;
  double m2 = 0;
  std::size_t rejected = 0;  // non-finite inputs

  std::optional<double> variance() const;  // sample variance, needs count >= 2
};

McAccumulator WelfordUpdate(McAccumulator acc, double value);

struct ProvenanceStats
{
  std::size_t count = 0;
  double mean_wall_time = 0;
  double mean_stage_time = 0;  // time spent in the answering model only
};

struct McReport
{
  McAccumulator f_bar;
  std::map<hierarchy::Provenance, ProvenanceStats> by_provenance;
  std::vector<hierarchy::TrainingEvent> trainings;
  Eigen::Index final_basis_size = 0;
  std::size_t queries = 0;
};

nlohmann::json ToJson(const McReport &r);

McReport Summarize(const std::vector<hierarchy::QueryRecord> &log,
                   const std::vector<hierarchy::TrainingEvent> &trainings = {});

// Query log CSV, schema v1:
//   # certrom query log v1
//   index,mu_0,...,mu_{p-1},provenance,estimated_bound,wall_time_s,f_bar
// estimated_bound is empty for FOM rows; floats use round-trip precision. Rows are flushed
// one at a time.
class QueryLogWriter
{
public:
  QueryLogWriter(const std::filesystem::path &path, Eigen::Index param_dim, bool append = false);
  void Write(const hierarchy::QueryRecord &rec);

private:
  std::ofstream out_;
};

std::string FormatRow(const hierarchy::QueryRecord &rec);
std::string HeaderLine(Eigen::Index param_dim);

struct LogRow
{
  std::size_t index = 0;
  Vector mu;
  hierarchy::Provenance provenance = hierarchy::Provenance::FOM;
  std::optional<double> estimated_bound;
  double wall_time = 0;
  double f_bar = 0;
};

std::vector<LogRow> ReadQueryLog(const std::filesystem::path &path);

// Answers one query with the FOM and appends it to the log, bypassing the surrogates.
hierarchy::QueryRecord FomQuery(hierarchy::HierarchyState &state, const param::Parameter &mu);

// Feeds params[begin, end) through the hierarchy (or the FOM in fom_only mode), writing each
// record when a writer is given and accumulating f_bar.
void RunQueries(hierarchy::HierarchyState &state, const std::vector<param::Parameter> &params,
                std::size_t begin, std::size_t end, bool fom_only, McAccumulator &acc,
                QueryLogWriter *writer);

hierarchy::HierarchyState MakeState(const RunConfig &cfg);

// Full experiment: query_log.csv, summary.json and the final state under out_dir/state.
McReport RunMonteCarlo(const RunConfig &cfg);

// Directory layout: state.json (magic "CRSTATE1", version 1). Loading validates everything
// before returning, so a failure leaves no partial state behind.
void SaveState(const hierarchy::HierarchyState &state, const std::filesystem::path &dir);
hierarchy::HierarchyState LoadState(const std::filesystem::path &dir);

}  // namespace certrom::driver

#endif  // CERTROM_DRIVER_HPP
