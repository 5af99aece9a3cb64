// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#include "certrom/hierarchy.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "certrom/json_io.hpp"
#include "certrom/log.hpp"

namespace certrom::hierarchy
{

namespace
{

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since)
{
  return std::chrono::duration<double>(Clock::now() - since).count();
}

template <typename Enum, std::size_t N>
Enum FromString(const std::string &s, const Enum (&values)[N], const char *what)
{
  for (auto v : values)
  {
    if (ToString(v) == s)
    {
      return v;
    }
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

constexpr MlBackend kBackends[] = {MlBackend::Vkoga, MlBackend::Vkoga2L, MlBackend::Sdkn,
                                   MlBackend::None};
constexpr TimeMode kTimeModes[] = {TimeMode::TimeVectorized, TimeMode::RandomAccess};
constexpr Provenance kProvenances[] = {Provenance::FOM, Provenance::RB, Provenance::ML};

// Time coordinate of step k in [-1, 1] for random-access inputs.
double NormalizedTime(int k, int steps) { return 2.0 * k / steps - 1.0; }

}  // namespace

std::string ToString(MlBackend b)
{
  switch (b)
  {
    case MlBackend::Vkoga:
      return "vkoga";
    case MlBackend::Vkoga2L:
      return "vkoga2l";
    case MlBackend::Sdkn:
      return "sdkn";
    case MlBackend::None:
      return "none";
  }
  return "unknown";
}

std::string ToString(TimeMode m)
{
  return m == TimeMode::TimeVectorized ? "time_vectorized" : "random_access";
}

std::string ToString(Provenance p)
{
  switch (p)
  {
    case Provenance::FOM:
      return "FOM";
    case Provenance::RB:
      return "RB";
    case Provenance::ML:
      return "ML";
  }
  return "unknown";
}

MlBackend BackendFromString(const std::string &s) { return FromString(s, kBackends, "backend"); }

TimeMode TimeModeFromString(const std::string &s)
{
  return FromString(s, kTimeModes, "time mode");
}

Provenance ProvenanceFromString(const std::string &s)
{
  return FromString(s, kProvenances, "provenance");
}

int HierarchyConfig::RetrainBatch() const
{
  if (retrain_batch > 0)
  {
    return retrain_batch;
  }
  return backend == MlBackend::Sdkn ? 200 : 40;
}

void HierarchyConfig::Validate() const
{
  if (!(tolerance > 0.0))
  {
    throw ConfigError("tolerance must be positive");
  }
  if (!(stop_ratio > 0.0 && stop_ratio <= 1.0))
  {
    throw ConfigError("stop_ratio must lie in (0, 1]");
  }
  if (retrain_batch < 0)
  {
    throw ConfigError("retrain_batch must be non-negative");
  }
  if (!(pod_tol_factor > 0.0))
  {
    throw ConfigError("pod_tol_factor must be positive");
  }
}

void to_json(nlohmann::json &j, const HierarchyConfig &c)
{
  j = nlohmann::json{
      {"tolerance", c.tolerance},
      {"ml_backend", ToString(c.backend)},
      {"retrain_batch", c.RetrainBatch()},
      {"stop_ratio", c.stop_ratio},
      {"time_mode", ToString(c.time_mode)},
      {"pod_tol_factor", c.pod_tol_factor},
      {"certify_enrichment", c.certify_enrichment},
      {"ml_seed", c.seed},
      {"ml",
       {{"kernel", kernels::ToString(c.ml.kernel_family)},
        {"epsilon", c.ml.kernel_epsilon},
        {"max_centers", c.ml.greedy.max_centers},
        {"greedy_tol", c.ml.greedy.greedy_tol},
        {"two_layer_epochs", c.ml.two_layer.epochs},
        {"two_layer_batch_size", c.ml.two_layer.batch_size},
        {"two_layer_learning_rate", c.ml.two_layer.learning_rate},
        {"two_layer_ridge", c.ml.two_layer.ridge},
        {"sdkn_hidden", c.ml.sdkn_hidden},
        {"sdkn_centers", c.ml.sdkn_centers},
        {"sdkn_epochs", c.ml.sdkn_train.epochs},
        {"sdkn_batch_size", c.ml.sdkn_train.batch_size},
        {"sdkn_learning_rate", c.ml.sdkn_train.learning_rate}}}};
}

HierarchyConfig HierarchyConfigFromJson(const nlohmann::json &j)
{
  HierarchyConfig c;
  try
  {
    c.tolerance = j.value("tolerance", c.tolerance);
    if (j.contains("ml_backend"))
    {
      c.backend = BackendFromString(j.at("ml_backend").get<std::string>());
    }
    c.retrain_batch = j.value("retrain_batch", c.retrain_batch);
    c.stop_ratio = j.value("stop_ratio", c.stop_ratio);
    if (j.contains("time_mode"))
    {
      c.time_mode = TimeModeFromString(j.at("time_mode").get<std::string>());
    }
    c.pod_tol_factor = j.value("pod_tol_factor", c.pod_tol_factor);
    c.certify_enrichment = j.value("certify_enrichment", c.certify_enrichment);
    c.seed = j.value("ml_seed", c.seed);
    if (j.contains("ml"))
    {
      const auto &m = j.at("ml");
      if (m.contains("kernel"))
      {
        c.ml.kernel_family = kernels::FamilyFromString(m.at("kernel").get<std::string>());
      }
      c.ml.kernel_epsilon = m.value("epsilon", c.ml.kernel_epsilon);
      c.ml.greedy.max_centers = m.value("max_centers", c.ml.greedy.max_centers);
      c.ml.greedy.greedy_tol = m.value("greedy_tol", c.ml.greedy.greedy_tol);
      c.ml.two_layer.epochs = m.value("two_layer_epochs", c.ml.two_layer.epochs);
      c.ml.two_layer.batch_size = m.value("two_layer_batch_size", c.ml.two_layer.batch_size);
      c.ml.two_layer.learning_rate =
          m.value("two_layer_learning_rate", c.ml.two_layer.learning_rate);
      c.ml.two_layer.ridge = m.value("two_layer_ridge", c.ml.two_layer.ridge);
      c.ml.sdkn_hidden = m.value("sdkn_hidden", c.ml.sdkn_hidden);
      c.ml.sdkn_centers = m.value("sdkn_centers", c.ml.sdkn_centers);
      c.ml.sdkn_train.epochs = m.value("sdkn_epochs", c.ml.sdkn_train.epochs);
      c.ml.sdkn_train.batch_size = m.value("sdkn_batch_size", c.ml.sdkn_train.batch_size);
      c.ml.sdkn_train.learning_rate =
          m.value("sdkn_learning_rate", c.ml.sdkn_train.learning_rate);
    }
  }
  catch (const nlohmann::json::exception &e)
  {
    throw ConfigError(std::string("hierarchy config: ") + e.what());
  }
  c.Validate();
  return c;
}

Matrix MlModel::PredictCoefficients(const Vector &z) const
{
  const Eigen::Index n = basis_size;
  Matrix coeffs = Matrix::Zero(n, steps + 1);
  Matrix inputs;
  if (time_mode == TimeMode::TimeVectorized)
  {
    inputs = z.transpose();
  }
  else
  {
    inputs.resize(steps, z.size() + 1);
    for (int k = 1; k <= steps; k++)
    {
      inputs.row(k - 1) << z.transpose(), NormalizedTime(k, steps);
    }
  }
  Matrix raw;
  if (const auto *v = std::get_if<vkoga::VkogaModel>(&model))
  {
    raw = v->PredictBatch(inputs);
  }
  else if (const auto *s = std::get_if<sdkn::SdknModel>(&model))
  {
    raw = s->ForwardBatch(inputs);
  }
  else
  {
    return coeffs;
  }
  raw = (raw.array().rowwise() * target_scale.transpose().array()).rowwise() +
        target_mean.transpose().array();
  if (time_mode == TimeMode::TimeVectorized)
  {
    coeffs.rightCols(steps) = Eigen::Map<const Matrix>(raw.data(), n, steps);
  }
  else
  {
    coeffs.rightCols(steps) = raw.transpose();
  }
  return coeffs;
}

nlohmann::json ToJson(const MlModel &m)
{
  nlohmann::json j{{"backend", ToString(m.backend)},
                   {"time_mode", ToString(m.time_mode)},
                   {"basis_size", m.basis_size},
                   {"steps", m.steps},
                   {"target_mean", io::VectorToJson(m.target_mean)},
                   {"target_scale", io::VectorToJson(m.target_scale)}};
  if (const auto *v = std::get_if<vkoga::VkogaModel>(&m.model))
  {
    j["model"] = vkoga::ToJson(*v);
  }
  else if (const auto *s = std::get_if<sdkn::SdknModel>(&m.model))
  {
    j["model"] = sdkn::ToJson(*s);
  }
  return j;
}

MlModel MlModelFromJson(const nlohmann::json &j)
{
  try
  {
    MlModel m;
    m.backend = BackendFromString(j.at("backend").get<std::string>());
    m.time_mode = TimeModeFromString(j.at("time_mode").get<std::string>());
    m.basis_size = j.at("basis_size").get<Eigen::Index>();
    m.steps = j.at("steps").get<int>();
    m.target_mean = io::VectorFromJson(j.at("target_mean"));
    m.target_scale = io::VectorFromJson(j.at("target_scale"));
    if (j.contains("model"))
    {
      const auto &mj = j.at("model");
      if (mj.at("type") == "vkoga")
      {
        m.model = vkoga::VkogaModelFromJson(mj);
      }
      else
      {
        m.model = sdkn::SdknModelFromJson(mj);
      }
    }
    return m;
  }
  catch (const nlohmann::json::exception &e)
  {
    throw LoadError(std::string("ML model: ") + e.what());
  }
  catch (const ConfigError &e)
  {
    throw LoadError(std::string("ML model: ") + e.what());
  }
}

TrainingData BuildTrainingData(const std::vector<Vector> &inputs,
                               const std::vector<Matrix> &coeffs, TimeMode mode)
{
  Require(!inputs.empty() && inputs.size() == coeffs.size(), "training buffer is inconsistent");
  const auto count = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index p = inputs.front().size();
  const Eigen::Index n = coeffs.front().rows();
  const int steps = static_cast<int>(coeffs.front().cols()) - 1;
  TrainingData data;
  if (mode == TimeMode::TimeVectorized)
  {
    data.X.resize(count, p);
    data.Y.resize(count, n * steps);
    for (Eigen::Index s = 0; s < count; s++)
    {
      data.X.row(s) = inputs[s].transpose();
      const Matrix tail = coeffs[s].rightCols(steps);
      data.Y.row(s) = Eigen::Map<const Vector>(tail.data(), tail.size()).transpose();
    }
  }
  else
  {
    data.X.resize(count * steps, p + 1);
    data.Y.resize(count * steps, n);
    for (Eigen::Index s = 0; s < count; s++)
    {
      for (int k = 1; k <= steps; k++)
      {
        const Eigen::Index row = s * steps + (k - 1);
        data.X.row(row) << inputs[s].transpose(), NormalizedTime(k, steps);
        data.Y.row(row) = coeffs[s].col(k).transpose();
      }
    }
  }
  return data;
}

MlModel TrainMl(const HierarchyConfig &cfg, const std::vector<Vector> &inputs,
                const std::vector<Matrix> &coeffs, std::uint64_t seed)
{
  Require(cfg.backend != MlBackend::None, "no ML backend configured");
  const auto data = BuildTrainingData(inputs, coeffs, cfg.time_mode);

  MlModel m;
  m.backend = cfg.backend;
  m.time_mode = cfg.time_mode;
  m.basis_size = coeffs.front().rows();
  m.steps = static_cast<int>(coeffs.front().cols()) - 1;
  m.target_mean = data.Y.colwise().mean().transpose();
  const Matrix centered = data.Y.rowwise() - m.target_mean.transpose();
  Vector scale = (centered.colwise().squaredNorm() / static_cast<double>(data.Y.rows()))
                     .transpose()
                     .cwiseSqrt();
  const double floor = 1e-12 * std::max(scale.maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < scale.size(); i++)
  {
    if (!(scale(i) > floor))
    {
      scale(i) = 1.0;
    }
  }
  m.target_scale = scale;
  const Matrix Ys = centered * scale.cwiseInverse().asDiagonal();
  const int dim = static_cast<int>(data.X.cols());

  switch (cfg.backend)
  {
    case MlBackend::Vkoga:
    {
      const auto kernel = kernels::KernelConfig::Radial(cfg.ml.kernel_family,
                                                        cfg.ml.kernel_epsilon, dim);
      m.model = vkoga::Fit(data.X, Ys, kernel, cfg.ml.greedy);
      break;
    }
    case MlBackend::Vkoga2L:
    {
      const auto kernel = kernels::KernelConfig::Radial(cfg.ml.kernel_family,
                                                        cfg.ml.kernel_epsilon, dim);
      m.model = vkoga::TwoLayerFit(data.X, Ys, kernel, cfg.ml.two_layer, cfg.ml.greedy, seed);
      break;
    }
    case MlBackend::Sdkn:
    {
      sdkn::SdknArchitecture arch;
      arch.layer_dims.push_back(dim);
      arch.layer_dims.insert(arch.layer_dims.end(), cfg.ml.sdkn_hidden.begin(),
                             cfg.ml.sdkn_hidden.end());
      arch.layer_dims.push_back(static_cast<int>(Ys.cols()));
      arch.centers = cfg.ml.sdkn_centers;
      arch.seed = seed;
      const auto init = sdkn::Init(arch, data.X);
      auto report = sdkn::Train(init, data.X, Ys, cfg.ml.sdkn_train, seed + 1);
      if (report.aborted)
      {
        log::Warn("SDKN training hit a non-finite loss; keeping the best model so far");
      }
      m.model = std::move(report.model);
      break;
    }
    case MlBackend::None:
      break;
  }
  return m;
}

HierarchyState MakeState(const fom::FomSpec &spec, const param::ParameterDomain &domain,
                         const HierarchyConfig &cfg)
{
  cfg.Validate();
  HierarchyState state;
  state.fom = std::make_shared<const fom::FomModel>(spec);
  if (domain.dim() != spec.blocks + spec.heaters)
  {
    throw ConfigError("parameter dimension must equal blocks + heaters");
  }
  if ((domain.lower.head(spec.blocks).array() <= 0.0).any())
  {
    throw ConfigError("block diffusivities must be bounded away from zero");
  }
  state.domain = domain;
  state.config = cfg;
  state.rm = rb::ProjectOperators(*state.fom, rb::ReducedBasis::Empty(state.fom->dofs()));
  return state;
}

std::optional<double> MlRatioSinceTraining(const HierarchyState &state)
{
  if (!state.ml || !state.last_training_query)
  {
    return std::nullopt;
  }
  const std::size_t first = *state.last_training_query;
  if (state.log.size() <= first)
  {
    return std::nullopt;
  }
  std::size_t ml = 0;
  for (std::size_t i = first; i < state.log.size(); i++)
  {
    ml += state.log[i].provenance == Provenance::ML;
  }
  return static_cast<double>(ml) / static_cast<double>(state.log.size() - first);
}

bool MaybeRetrain(HierarchyState &state)
{
  const auto &cfg = state.config;
  if (cfg.backend == MlBackend::None || state.retraining_frozen ||
      state.new_since_training < cfg.RetrainBatch())
  {
    return false;
  }
  if (const auto ratio = MlRatioSinceTraining(state); ratio && *ratio >= cfg.stop_ratio)
  {
    state.retraining_frozen = true;
    return false;
  }

  const auto start = Clock::now();
  TrainingEvent event{state.log.size(), state.train_inputs.size(), 0.0, true};
  const std::uint64_t seed = cfg.seed + 1000003ULL * (state.trainings.size() + 1);
  try
  {
    state.ml = TrainMl(cfg, state.train_inputs, state.train_coeffs, seed);
    state.last_training_query = state.log.size();
  }
  catch (const std::exception &e)
  {
    event.ok = false;
    log::Warn(std::string("ML training failed, keeping the previous model: ") + e.what());
  }
  state.new_since_training = 0;
  event.seconds = Seconds(start);
  state.trainings.push_back(event);
  return event.ok;
}

bool IngestFom(HierarchyState &state, const fom::Trajectory &traj)
{
  const double tol_pod = state.config.pod_tol_factor * state.config.tolerance;
  const auto pod = rb::ComputeResidualPod(state.rm.basis, traj, *state.fom);
  Eigen::Index count = rb::ModesForTolerance(pod, tol_pod);
  auto basis = rb::AppendModes(state.rm.basis, pod, count, *state.fom);
  std::optional<rb::ReducedModel> rm;
  if (state.config.certify_enrichment)
  {
    for (;;)
    {
      if (basis.size() > 0)
      {
        rm = rb::ProjectOperators(*state.fom, basis);
        const auto red = rb::SolveReduced(*rm, traj.mu);
        const double bound = rb::OutputBound(*rm, rb::EstimateError(*rm, traj.mu, red.coeffs));
        if (bound <= state.config.tolerance)
        {
          break;
        }
      }
      if (count == pod.modes.cols())
      {
        break;
      }
      basis = rb::AppendModes(state.rm.basis, pod, ++count, *state.fom);
      rm.reset();
    }
  }
  if (state.audit_dir)
  {
    std::filesystem::create_directories(*state.audit_dir);
    fom::WriteTrajectory(*state.audit_dir / ("fom_" + std::to_string(state.log.size()) + ".crtrj"),
                         traj);
  }
  if (basis.size() == state.rm.size())
  {
    return false;
  }
  state.rm = rm ? std::move(*rm) : rb::ProjectOperators(*state.fom, basis);
  state.ml.reset();
  state.train_inputs.clear();
  state.train_coeffs.clear();
  state.new_since_training = 0;
  state.retraining_frozen = false;
  state.last_training_query.reset();
  return true;
}

QueryRecord Query(HierarchyState &state, const param::Parameter &mu)
{
  Require(state.domain.contains(mu, 1e-12), "parameter outside the domain");
  const double tol = state.config.tolerance;
  const auto start = Clock::now();
  QueryRecord rec;
  rec.index = state.log.size();
  rec.mu = mu;
  rec.estimated_bound = std::numeric_limits<double>::quiet_NaN();
  const Vector z = param::Normalize(state.domain, mu);
  const auto &rm = state.rm;

  bool answered = false;
  if (state.ml && state.ml->basis_size == rm.size())
  {
    const auto t0 = Clock::now();
    try
    {
      const Matrix coeffs = state.ml->PredictCoefficients(z);
      const double bound = rb::OutputBound(rm, rb::EstimateError(rm, mu, coeffs));
      if (std::isfinite(bound) && bound <= tol)
      {
        rec.provenance = Provenance::ML;
        rec.estimated_bound = bound;
        rec.output = rb::ReducedOutput(rm, coeffs);
        answered = true;
      }
    }
    catch (const std::exception &e)
    {
      log::Warn(std::string("ML answer rejected: ") + e.what());
    }
    rec.ml_time = Seconds(t0);
  }

  bool harvest = false;
  rb::ReducedTrajectory reduced;
  if (!answered)
  {
    const auto t0 = Clock::now();
    reduced = rb::SolveReduced(rm, mu);
    const double bound = rb::OutputBound(rm, rb::EstimateError(rm, mu, reduced));
    if (std::isfinite(bound) && bound <= tol)
    {
      rec.provenance = Provenance::RB;
      rec.estimated_bound = bound;
      rec.output = rb::ReducedOutput(rm, reduced.coeffs);
      answered = true;
      harvest = rm.size() > 0;
    }
    rec.rb_time = Seconds(t0);
  }

  std::optional<fom::Trajectory> traj;
  if (!answered)
  {
    const auto t0 = Clock::now();
    traj = fom::Solve(*state.fom, mu);
    rec.provenance = Provenance::FOM;
    rec.output = fom::Output(*state.fom, *traj);
    rec.fom_time = Seconds(t0);
  }
  rec.f_bar = fom::TimeAverage(rec.output);
  rec.basis_size = rm.size();
  state.log.push_back(rec);

  if (harvest)
  {
    state.train_inputs.push_back(z);
    state.train_coeffs.push_back(std::move(reduced.coeffs));
    state.new_since_training++;
    MaybeRetrain(state);
  }
  if (traj)
  {
    IngestFom(state, *traj);
  }
  state.log.back().wall_time = Seconds(start);
  return state.log.back();
}

}  // namespace certrom::hierarchy
