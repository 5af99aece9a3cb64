// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/driver.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "certrom/json_io.hpp"
#include "certrom/log.hpp"

namespace certrom::driver
{

namespace
{

constexpr const char *kStateMagic = "CRSTATE1";
constexpr int kStateVersion = 1;
constexpr const char *kLogHeader = "# certrom query log v1";

std::string Exact(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string &s)
{
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
  {
    throw LoadError("malformed number '" + s + "' in query log");
  }
  return v;
}

nlohmann::json NullableDouble(double v)
{
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double FromNullable(const nlohmann::json &j)
{
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

RunConfig RunConfigFromJson(const nlohmann::json &j)
{
  RunConfig cfg;
  cfg.fom = fom::FomSpecFromJson(j);
  if (j.contains("lower") || j.contains("upper"))
  {
    cfg.domain = param::DomainFromJson(j);
  }
  else
  {
    cfg.domain = param::ParameterDomain::DeskScale(cfg.fom.blocks, cfg.fom.heaters);
  }
  cfg.hierarchy = hierarchy::HierarchyConfigFromJson(j);
  try
  {
    cfg.n_mc = j.value("n_mc", cfg.n_mc);
    cfg.seed = j.value("seed", cfg.seed);
    if (!j.contains("ml_seed"))
    {
      cfg.hierarchy.seed = cfg.seed;
    }
    cfg.out_dir = j.value("out_dir", cfg.out_dir.string());
    cfg.fom_only = j.value("fom_only", cfg.fom_only);
    cfg.audit_trajectories = j.value("audit_trajectories", cfg.audit_trajectories);
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (cfg.n_mc < 1)
  {
    throw ConfigError("n_mc must be at least 1");
  }
  if (cfg.domain.dim() != cfg.fom.blocks + cfg.fom.heaters)
  {
    throw ConfigError("param_dim must equal blocks + heaters");
  }
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path &path)
{
  try
  {
    return RunConfigFromJson(io::ReadJsonFile(path));
  }
  catch (const LoadError &e)
  {
    throw ConfigError(e.what());
  }
}

nlohmann::json ToJson(const RunConfig &cfg)
{
  nlohmann::json j = cfg.fom;
  j.update(nlohmann::json(cfg.domain));
  j.update(nlohmann::json(cfg.hierarchy));
  j["n_mc"] = cfg.n_mc;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir.string();
  j["fom_only"] = cfg.fom_only;
  j["audit_trajectories"] = cfg.audit_trajectories;
  return j;
}

std::optional<double> McAccumulator::variance() const
{
  if (count < 2)
  {
    return std::nullopt;
  }
  return m2 / static_cast<double>(count - 1);
}

McAccumulator WelfordUpdate(McAccumulator acc, double value)
{
  if (!std::isfinite(value))
  {
    acc.rejected++;
    return acc;
  }
  acc.count++;
  const double delta = value - acc.mean;
  acc.mean += delta / static_cast<double>(acc.count);
  acc.m2 += delta * (value - acc.mean);
  return acc;
}

McReport Summarize(const std::vector<hierarchy::QueryRecord> &log,
                   const std::vector<hierarchy::TrainingEvent> &trainings)
{
  McReport report;
  report.trainings = trainings;
  report.queries = log.size();
  for (const auto &rec : log)
  {
    report.f_bar = WelfordUpdate(report.f_bar, rec.f_bar);
    auto &stats = report.by_provenance[rec.provenance];
    stats.count++;
    const double stage = rec.provenance == hierarchy::Provenance::ML   ? rec.ml_time
                         : rec.provenance == hierarchy::Provenance::RB ? rec.rb_time
                                                                       : rec.fom_time;
    stats.mean_wall_time += (rec.wall_time - stats.mean_wall_time) / stats.count;
    stats.mean_stage_time += (stage - stats.mean_stage_time) / stats.count;
    report.final_basis_size = rec.basis_size;
  }
  return report;
}

nlohmann::json ToJson(const McReport &r)
{
  nlohmann::json counts = nlohmann::json::object();
  for (auto p : {hierarchy::Provenance::FOM, hierarchy::Provenance::RB, hierarchy::Provenance::ML})
  {
    const auto it = r.by_provenance.find(p);
    const ProvenanceStats stats = it == r.by_provenance.end() ? ProvenanceStats{} : it->second;
    counts[hierarchy::ToString(p)] = {{"count", stats.count},
                                      {"mean_wall_time_s", stats.mean_wall_time},
                                      {"mean_model_time_s", stats.mean_stage_time}};
  }
  nlohmann::json trainings = nlohmann::json::array();
  for (const auto &t : r.trainings)
  {
    trainings.push_back({{"query_index", t.query_index},
                         {"samples", t.samples},
                         {"seconds", t.seconds},
                         {"ok", t.ok}});
  }
  const auto var = r.f_bar.variance();
  return {{"queries", r.queries},
          {"mean", r.f_bar.count > 0 ? nlohmann::json(r.f_bar.mean) : nlohmann::json(nullptr)},
          {"variance", var ? nlohmann::json(*var) : nlohmann::json(nullptr)},
          {"rejected_values", r.f_bar.rejected},
          {"provenance", counts},
          {"trainings", trainings},
          {"final_basis_size", r.final_basis_size}};
}

std::string HeaderLine(Eigen::Index param_dim)
{
  std::string h = "index";
  for (Eigen::Index i = 0; i < param_dim; i++)
  {
    h += ",mu_" + std::to_string(i);
  }
  return h + ",provenance,estimated_bound,wall_time_s,f_bar";
}

std::string FormatRow(const hierarchy::QueryRecord &rec)
{
  std::string row = std::to_string(rec.index);
  for (Eigen::Index i = 0; i < rec.mu.dim(); i++)
  {
    row += "," + Exact(rec.mu[i]);
  }
  row += "," + hierarchy::ToString(rec.provenance) + ",";
  if (std::isfinite(rec.estimated_bound))
  {
    row += Exact(rec.estimated_bound);
  }
  row += "," + Exact(rec.wall_time) + "," + Exact(rec.f_bar);
  return row;
}

QueryLogWriter::QueryLogWriter(const std::filesystem::path &path, Eigen::Index param_dim,
                               bool append)
{
  const bool fresh = !append || !std::filesystem::exists(path);
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_)
  {
    throw std::runtime_error("cannot write " + path.string());
  }
  if (fresh)
  {
    out_ << kLogHeader << '\n' << HeaderLine(param_dim) << '\n';
    out_.flush();
  }
}

void QueryLogWriter::Write(const hierarchy::QueryRecord &rec)
{
  out_ << FormatRow(rec) << '\n';
  out_.flush();
}

std::vector<LogRow> ReadQueryLog(const std::filesystem::path &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw LoadError("cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != kLogHeader)
  {
    throw LoadError("missing or unsupported query log header in " + path.string());
  }
  if (!std::getline(in, line))
  {
    throw LoadError("missing column header in " + path.string());
  }
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 6 || line != HeaderLine(static_cast<Eigen::Index>(columns - 5)))
  {
    throw LoadError("unexpected column header in " + path.string());
  }
  std::vector<LogRow> rows;
  while (std::getline(in, line))
  {
    if (line.empty())
    {
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
    {
      cells.push_back(cell);
    }
    if (line.back() == ',')
    {
      cells.emplace_back();
    }
    if (cells.size() != columns)
    {
      throw LoadError("query log row has the wrong number of fields: " + line);
    }
    const std::size_t p = cells.size() - 5;
    LogRow row;
    row.index = static_cast<std::size_t>(ParseDouble(cells[0]));
    row.mu.resize(static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; i++)
    {
      row.mu(static_cast<Eigen::Index>(i)) = ParseDouble(cells[1 + i]);
    }
    try
    {
      row.provenance = hierarchy::ProvenanceFromString(cells[1 + p]);
    }
    catch (const ConfigError &e)
    {
      throw LoadError(e.what());
    }
    if (!cells[2 + p].empty())
    {
      row.estimated_bound = ParseDouble(cells[2 + p]);
    }
    row.wall_time = ParseDouble(cells[3 + p]);
    row.f_bar = ParseDouble(cells[4 + p]);
    rows.push_back(std::move(row));
  }
  return rows;
}

hierarchy::QueryRecord FomQuery(hierarchy::HierarchyState &state, const param::Parameter &mu)
{
  const auto start = std::chrono::steady_clock::now();
  hierarchy::QueryRecord rec;
  rec.index = state.log.size();
  rec.mu = mu;
  rec.provenance = hierarchy::Provenance::FOM;
  rec.estimated_bound = std::numeric_limits<double>::quiet_NaN();
  const auto traj = fom::Solve(*state.fom, mu);
  rec.output = fom::Output(*state.fom, traj);
  rec.f_bar = fom::TimeAverage(rec.output);
  rec.basis_size = state.rm.size();
  rec.fom_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  rec.wall_time = rec.fom_time;
  state.log.push_back(rec);
  return rec;
}

void RunQueries(hierarchy::HierarchyState &state, const std::vector<param::Parameter> &params,
                std::size_t begin, std::size_t end, bool fom_only, McAccumulator &acc,
                QueryLogWriter *writer)
{
  Require(begin <= end && end <= params.size(), "query range out of bounds");
  for (std::size_t i = begin; i < end; i++)
  {
    const auto rec = fom_only ? FomQuery(state, params[i]) : hierarchy::Query(state, params[i]);
    if (writer)
    {
      writer->Write(rec);
    }
    acc = WelfordUpdate(acc, rec.f_bar);
  }
}

hierarchy::HierarchyState MakeState(const RunConfig &cfg)
{
  auto state = hierarchy::MakeState(cfg.fom, cfg.domain, cfg.hierarchy);
  if (cfg.audit_trajectories)
  {
    state.audit_dir = cfg.out_dir / "trajectories";
  }
  return state;
}

McReport RunMonteCarlo(const RunConfig &cfg)
{
  std::filesystem::create_directories(cfg.out_dir);
  auto state = MakeState(cfg);
  const auto params = param::Sample(cfg.domain, cfg.seed, cfg.n_mc);
  QueryLogWriter writer(cfg.out_dir / "query_log.csv", cfg.domain.dim());
  McAccumulator acc;
  try
  {
    RunQueries(state, params, 0, params.size(), cfg.fom_only, acc, &writer);
  }
  catch (...)
  {
    // Rows already written stay on disk; keep whatever state exists for inspection.
    SaveState(state, cfg.out_dir / "state");
    throw;
  }
  auto report = Summarize(state.log, state.trainings);
  report.f_bar = acc;
  io::WriteJsonFile(cfg.out_dir / "summary.json", ToJson(report));
  SaveState(state, cfg.out_dir / "state");
  return report;
}

void SaveState(const hierarchy::HierarchyState &state, const std::filesystem::path &dir)
{
  std::filesystem::create_directories(dir);
  nlohmann::json log = nlohmann::json::array();
  for (const auto &rec : state.log)
  {
    log.push_back({{"index", rec.index},
                   {"mu", io::VectorToJson(rec.mu.values)},
                   {"provenance", hierarchy::ToString(rec.provenance)},
                   {"estimated_bound", NullableDouble(rec.estimated_bound)},
                   {"wall_time", rec.wall_time},
                   {"ml_time", rec.ml_time},
                   {"rb_time", rec.rb_time},
                   {"fom_time", rec.fom_time},
                   {"output", io::VectorToJson(rec.output)},
                   {"f_bar", rec.f_bar},
                   {"basis_size", rec.basis_size}});
  }
  nlohmann::json inputs = nlohmann::json::array(), coeffs = nlohmann::json::array();
  for (std::size_t i = 0; i < state.train_inputs.size(); i++)
  {
    inputs.push_back(io::VectorToJson(state.train_inputs[i]));
    coeffs.push_back(io::MatrixToJson(state.train_coeffs[i]));
  }
  nlohmann::json trainings = nlohmann::json::array();
  for (const auto &t : state.trainings)
  {
    trainings.push_back({{"query_index", t.query_index},
                         {"samples", t.samples},
                         {"seconds", t.seconds},
                         {"ok", t.ok}});
  }
  nlohmann::json j{{"magic", kStateMagic},
                   {"version", kStateVersion},
                   {"fom", state.fom->spec()},
                   {"domain", state.domain},
                   {"hierarchy", state.config},
                   {"reduced_model", rb::ToJson(state.rm)},
                   {"ml", state.ml ? hierarchy::ToJson(*state.ml) : nlohmann::json(nullptr)},
                   {"train_inputs", std::move(inputs)},
                   {"train_coeffs", std::move(coeffs)},
                   {"new_since_training", state.new_since_training},
                   {"retraining_frozen", state.retraining_frozen},
                   {"last_training_query", state.last_training_query
                                               ? nlohmann::json(*state.last_training_query)
                                               : nlohmann::json(nullptr)},
                   {"log", std::move(log)},
                   {"trainings", std::move(trainings)}};
  if (state.audit_dir)
  {
    j["audit_dir"] = state.audit_dir->string();
  }
  // Write-then-rename so a crash never leaves a truncated state file behind.
  const auto tmp = dir / "state.json.tmp";
  io::WriteJsonFile(tmp, j);
  std::filesystem::rename(tmp, dir / "state.json");
}

hierarchy::HierarchyState LoadState(const std::filesystem::path &dir)
{
  const auto j = io::ReadJsonFile(dir / "state.json");
  try
  {
    if (!j.is_object() || j.value("magic", std::string()) != kStateMagic)
    {
      throw LoadError("not a certrom state file (bad magic)");
    }
    if (j.at("version").get<int>() != kStateVersion)
    {
      throw LoadError("unsupported state version " + j.at("version").dump());
    }
    hierarchy::HierarchyState state = hierarchy::MakeState(
        fom::FomSpecFromJson(j.at("fom")), param::DomainFromJson(j.at("domain")),
        hierarchy::HierarchyConfigFromJson(j.at("hierarchy")));
    state.rm = rb::ReducedModelFromJson(j.at("reduced_model"));
    if (state.rm.basis.vectors.rows() != state.fom->dofs())
    {
      throw LoadError("reduced model does not match the FOM");
    }
    if (!j.at("ml").is_null())
    {
      state.ml = hierarchy::MlModelFromJson(j.at("ml"));
    }
    const auto &inputs = j.at("train_inputs");
    const auto &coeffs = j.at("train_coeffs");
    if (inputs.size() != coeffs.size())
    {
      throw LoadError("training buffer size mismatch");
    }
    for (std::size_t i = 0; i < inputs.size(); i++)
    {
      state.train_inputs.push_back(io::VectorFromJson(inputs[i]));
      state.train_coeffs.push_back(io::MatrixFromJson(coeffs[i]));
      if (state.train_coeffs.back().rows() != state.rm.size())
      {
        throw LoadError("training target dimension does not match the basis");
      }
    }
    state.new_since_training = j.at("new_since_training").get<int>();
    state.retraining_frozen = j.at("retraining_frozen").get<bool>();
    if (!j.at("last_training_query").is_null())
    {
      state.last_training_query = j.at("last_training_query").get<std::size_t>();
    }
    for (const auto &r : j.at("log"))
    {
      hierarchy::QueryRecord rec;
      rec.index = r.at("index").get<std::size_t>();
      rec.mu.values = io::VectorFromJson(r.at("mu"));
      rec.provenance = hierarchy::ProvenanceFromString(r.at("provenance").get<std::string>());
      rec.estimated_bound = FromNullable(r.at("estimated_bound"));
      rec.wall_time = r.at("wall_time").get<double>();
      rec.ml_time = r.at("ml_time").get<double>();
      rec.rb_time = r.at("rb_time").get<double>();
      rec.fom_time = r.at("fom_time").get<double>();
      rec.output = io::VectorFromJson(r.at("output"));
      rec.f_bar = r.at("f_bar").get<double>();
      rec.basis_size = r.at("basis_size").get<Eigen::Index>();
      state.log.push_back(std::move(rec));
    }
    for (const auto &t : j.at("trainings"))
    {
      state.trainings.push_back({t.at("query_index").get<std::size_t>(),
                                 t.at("samples").get<std::size_t>(),
                                 t.at("seconds").get<double>(), t.at("ok").get<bool>()});
    }
    if (j.contains("audit_dir"))
    {
      state.audit_dir = j.at("audit_dir").get<std::string>();
    }
    return state;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("state file: ") + e.what());
  }
  catch (const ConfigError &e)
  {
    throw LoadError(std::string("state file: ") + e.what());
  }
  catch (const ContractError &e)
  {
    throw LoadError(std::string("state file: ") + e.what());
  }
}

}  // namespace certrom::driver
