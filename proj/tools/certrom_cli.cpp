// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

// certrom command line: run, fom-solve, train-ml, report, selftest.
// Failures print {"error": {...}} on stderr and exit nonzero:
//   2 usage, 3 config, 4 load, 5 numeric, 6 contract, 1 anything else.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "certrom/driver.hpp"
#include "certrom/fom.hpp"
#include "certrom/hierarchy.hpp"
#include "certrom/json_io.hpp"
#include "certrom/log.hpp"
#include "certrom/selftest.hpp"

namespace
{

using namespace certrom;

struct CommonOptions
{
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string backend;
};

int Fail(int code, const std::string &type, const std::string &message)
{
  const nlohmann::json err{{"error", {{"type", type}, {"message", message}, {"exit_code", code}}}};
  std::cerr << err.dump() << std::endl;
  return code;
}

driver::RunConfig ResolveConfig(const CommonOptions &opts)
{
  driver::RunConfig cfg =
      opts.config.empty() ? driver::RunConfig{} : driver::LoadRunConfig(opts.config);
  if (opts.seed)
  {
    cfg.seed = *opts.seed;
    cfg.hierarchy.seed = *opts.seed;
  }
  if (!opts.out.empty())
  {
    cfg.out_dir = opts.out;
  }
  if (!opts.backend.empty())
  {
    cfg.hierarchy.backend = hierarchy::BackendFromString(opts.backend);
  }
  cfg.hierarchy.Validate();
  return cfg;
}

void AddCommon(CLI::App *cmd, CommonOptions &opts)
{
  cmd->add_option("--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--seed", opts.seed, "random seed (overrides the config)");
  cmd->add_option("--backend", opts.backend, "ML backend")
      ->check(CLI::IsMember({"vkoga", "vkoga2l", "sdkn", "none"}));
}

int CmdRun(const CommonOptions &opts, bool resume)
{
  const auto cfg = ResolveConfig(opts);
  if (!resume)
  {
    const auto report = driver::RunMonteCarlo(cfg);
    std::cout << driver::ToJson(report).dump(2) << std::endl;
    return 0;
  }
  auto state = driver::LoadState(cfg.out_dir / "state");
  const auto params = param::Sample(state.domain, cfg.seed, cfg.n_mc);
  const std::size_t start = state.log.size();
  if (start > params.size())
  {
    throw ConfigError("saved state already holds more queries than n_mc");
  }
  driver::McAccumulator acc;
  for (const auto &rec : state.log)
  {
    acc = driver::WelfordUpdate(acc, rec.f_bar);
  }
  driver::QueryLogWriter writer(cfg.out_dir / "query_log.csv", state.domain.dim(), true);
  driver::RunQueries(state, params, start, params.size(), cfg.fom_only, acc, &writer);
  auto report = driver::Summarize(state.log, state.trainings);
  report.f_bar = acc;
  io::WriteJsonFile(cfg.out_dir / "summary.json", driver::ToJson(report));
  driver::SaveState(state, cfg.out_dir / "state");
  std::cout << driver::ToJson(report).dump(2) << std::endl;
  return 0;
}

Vector ParseMu(const std::string &text)
{
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ','))
  {
    try
    {
      std::size_t used = 0;
      vals.push_back(std::stod(cell, &used));
      if (used != cell.size())
      {
        throw std::invalid_argument(cell);
      }
    }
    catch (const std::exception &)
    {
      throw ConfigError("--mu: cannot parse '" + cell + "'");
    }
  }
  return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

int CmdFomSolve(const CommonOptions &opts, const std::string &mu_text)
{
  const auto cfg = ResolveConfig(opts);
  const fom::FomModel model(cfg.fom);
  param::Parameter mu;
  if (mu_text.empty())
  {
    mu = param::Sample(cfg.domain, cfg.seed, 1).front();
  }
  else
  {
    mu.values = ParseMu(mu_text);
    if (mu.dim() != cfg.domain.dim() || !cfg.domain.contains(mu))
    {
      throw ConfigError("--mu is not a point of the parameter domain");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const auto traj = fom::Solve(model, mu);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const Vector out = fom::Output(model, traj);
  std::filesystem::create_directories(cfg.out_dir);
  fom::WriteTrajectory(cfg.out_dir / "trajectory.crtrj", traj);
  std::ofstream csv(cfg.out_dir / "output.csv");
  csv << "k,t,f\n";
  for (Eigen::Index k = 0; k < out.size(); k++)
  {
    csv << k << ',' << k * model.dt() << ',' << out(k) << '\n';
  }
  const nlohmann::json result{{"mu", io::VectorToJson(mu.values)},
                              {"f_bar", fom::TimeAverage(out)},
                              {"dofs", model.dofs()},
                              {"steps", model.num_steps()},
                              {"solve_seconds", seconds},
                              {"trajectory", (cfg.out_dir / "trajectory.crtrj").string()}};
  std::cout << result.dump(2) << std::endl;
  return 0;
}

int CmdTrainMl(const CommonOptions &opts, const std::string &state_dir)
{
  auto cfg = ResolveConfig(opts);
  const auto state = driver::LoadState(state_dir.empty() ? cfg.out_dir / "state" : std::filesystem::path(state_dir));
  auto hcfg = state.config;
  if (!opts.backend.empty())
  {
    hcfg.backend = cfg.hierarchy.backend;
  }
  if (opts.seed)
  {
    hcfg.seed = *opts.seed;
  }
  if (hcfg.backend == hierarchy::MlBackend::None)
  {
    throw ConfigError("train-ml needs an ML backend other than none");
  }
  if (state.train_inputs.empty())
  {
    throw ConfigError("the saved state has an empty training buffer");
  }
  const auto start = std::chrono::steady_clock::now();
  const auto model = hierarchy::TrainMl(hcfg, state.train_inputs, state.train_coeffs, hcfg.seed);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::filesystem::create_directories(cfg.out_dir);
  io::WriteJsonFile(cfg.out_dir / "ml_model.json", hierarchy::ToJson(model));
  const nlohmann::json result{{"backend", hierarchy::ToString(hcfg.backend)},
                              {"samples", state.train_inputs.size()},
                              {"basis_size", model.basis_size},
                              {"training_seconds", seconds},
                              {"model", (cfg.out_dir / "ml_model.json").string()}};
  std::cout << result.dump(2) << std::endl;
  return 0;
}

int CmdReport(const CommonOptions &opts, const std::string &log_path)
{
  const std::filesystem::path path =
      !log_path.empty() ? std::filesystem::path(log_path)
                        : std::filesystem::path(opts.out.empty() ? "certrom_out" : opts.out) /
                              "query_log.csv";
  const auto rows = driver::ReadQueryLog(path);
  driver::McAccumulator acc;
  std::map<std::string, std::pair<std::size_t, double>> by_prov{
      {"FOM", {0, 0.0}}, {"RB", {0, 0.0}}, {"ML", {0, 0.0}}};
  for (const auto &r : rows)
  {
    acc = driver::WelfordUpdate(acc, r.f_bar);
    auto &[count, time] = by_prov[hierarchy::ToString(r.provenance)];
    count++;
    time += r.wall_time;
  }
  nlohmann::json prov = nlohmann::json::object();
  for (const auto &[name, ct] : by_prov)
  {
    prov[name] = {{"count", ct.first},
                  {"mean_wall_time_s", ct.first ? ct.second / ct.first : 0.0},
                  {"fraction", rows.empty() ? 0.0 : double(ct.first) / rows.size()}};
  }
  const auto var = acc.variance();
  const nlohmann::json result{
      {"log", path.string()},
      {"queries", rows.size()},
      {"mean", acc.count ? nlohmann::json(acc.mean) : nlohmann::json(nullptr)},
      {"variance", var ? nlohmann::json(*var) : nlohmann::json(nullptr)},
      {"provenance", prov}};
  std::cout << result.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"certrom: certified adaptive FOM / RB / ML surrogate hierarchy"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  CommonOptions opts;
  bool resume = false;
  std::string mu_text, state_dir, log_path;

  auto *run = app.add_subcommand("run", "Monte Carlo estimate through the surrogate hierarchy");
  AddCommon(run, opts);
  run->add_flag("--resume", resume, "continue from OUT/state");

  auto *fom_solve = app.add_subcommand("fom-solve", "solve the full model for one parameter");
  AddCommon(fom_solve, opts);
  fom_solve->add_option("--mu", mu_text, "comma separated parameter (default: one sample)");

  auto *train = app.add_subcommand("train-ml", "fit the ML surrogate on a saved training buffer");
  AddCommon(train, opts);
  train->add_option("--state", state_dir, "state directory (default OUT/state)");

  auto *report = app.add_subcommand("report", "summarize a query log");
  AddCommon(report, opts);
  report->add_option("--log", log_path, "query log CSV (default OUT/query_log.csv)");

  auto *self = app.add_subcommand("selftest", "run the built-in oracle checks");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::CallForHelp &e)
  {
    return app.exit(e);
  }
  catch (const CLI::CallForAllHelp &e)
  {
    return app.exit(e);
  }
  catch (const CLI::ParseError &e)
  {
    return Fail(2, "usage", e.what());
  }

  log::SetLevel(verbose ? log::Level::Info : log::Level::Warn);
  try
  {
    if (*run)
    {
      return CmdRun(opts, resume);
    }
    if (*fom_solve)
    {
      return CmdFomSolve(opts, mu_text);
    }
    if (*train)
    {
      return CmdTrainMl(opts, state_dir);
    }
    if (*report)
    {
      return CmdReport(opts, log_path);
    }
    if (*self)
    {
      const int failures = selftest::Run(std::cout);
      return failures == 0 ? 0 : Fail(1, "selftest", std::to_string(failures) + " check(s) failed");
    }
  }
  catch (const ConfigError &e)
  {
    return Fail(3, "config", e.what());
  }
  catch (const LoadError &e)
  {
    return Fail(4, "load", e.what());
  }
  catch (const NumericError &e)
  {
    return Fail(5, "numeric", e.what());
  }
  catch (const ContractError &e)
  {
    return Fail(6, "contract", e.what());
  }
  catch (const std::exception &e)
  {
    return Fail(1, "internal", e.what());
  }
  return Fail(2, "usage", "no subcommand");
}
