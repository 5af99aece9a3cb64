// Copyright The certrom Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTROM_HIERARCHY_HPP
#define CERTROM_HIERARCHY_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "json.hpp"

#include "certrom/fom.hpp"
#include "certrom/kernels.hpp"
#include "certrom/param_space.hpp"
#include "certrom/rb.hpp"
#include "certrom/sdkn.hpp"
#include "certrom/vkoga.hpp"

namespace certrom::hierarchy
{

enum class MlBackend
{
  Vkoga,
  Vkoga2L,
  Sdkn,
  None
};

enum class TimeMode
{
  TimeVectorized,
  RandomAccess
};

enum class Provenance
{
  FOM,
  RB,
  ML
};

std::string ToString(MlBackend b);
std::string ToString(TimeMode m);
std::string ToString(Provenance p);
MlBackend BackendFromString(const std::string &s);
TimeMode TimeModeFromString(const std::string &s);
Provenance ProvenanceFromString(const std::string &s);

struct MlSettings
{
  kernels::Family kernel_family = kernels::Family::QuadraticMatern;
  double kernel_epsilon = 1.0;
  vkoga::GreedyOptions greedy{500, 1e-10, 1e-10};
  vkoga::TwoLayerTrainConfig two_layer;
  std::vector<int> sdkn_hidden{128, 128, 128};
  int sdkn_centers = 64;
  sdkn::SdknTrainConfig sdkn_train;
};

struct HierarchyConfig
{
  double tolerance = 5e-2;
  MlBackend backend = MlBackend::Vkoga2L;
  int retrain_batch = 0;  // 0 selects 40 for the VKOGA variants and 200 for SDKN
  double stop_ratio = 0.6;
  TimeMode time_mode = TimeMode::TimeVectorized;
  double pod_tol_factor = 0.1;  // tol_pod = pod_tol_factor * tolerance
  // After a FOM fallback, keep appending residual modes until the bound at that parameter
  // meets the tolerance.
  bool certify_enrichment = true;
  std::uint64_t seed = 0;       // base seed for ML training
  MlSettings ml;

  int RetrainBatch() const;
  void Validate() const;
};

void to_json(nlohmann::json &j, const HierarchyConfig &c);
// Reads "tolerance", "ml_backend", "retrain_batch", "stop_ratio", "time_mode",
// "pod_tol_factor", "certify_enrichment", "ml_seed" and the optional "ml" object.
HierarchyConfig HierarchyConfigFromJson(const nlohmann::json &j);

struct QueryRecord
{
  std::size_t index = 0;
  param::Parameter mu;
  Provenance provenance = Provenance::FOM;
  double estimated_bound = 0;  // NaN for FOM answers
  double wall_time = 0;        // seconds, all stages of this query
  double ml_time = 0, rb_time = 0, fom_time = 0;
  Vector output;               // f(t_k), k = 0..K
  double f_bar = 0;
  Eigen::Index basis_size = 0;  // N_RB when the query was answered
};

struct TrainingEvent
{
  std::size_t query_index = 0;  // the query after which training ran
  std::size_t samples = 0;
  double seconds = 0;
  bool ok = true;
};

// Learned map from normalized parameter (and time in random-access mode) to standardized
// reduced coefficients.
struct MlModel
{
  MlBackend backend = MlBackend::None;
  TimeMode time_mode = TimeMode::TimeVectorized;
  Eigen::Index basis_size = 0;
  int steps = 0;
  Vector target_mean, target_scale;
  std::variant<std::monostate, vkoga::VkogaModel, sdkn::SdknModel> model;

  // N_RB x (K+1) coefficients with a zero initial column.
  Matrix PredictCoefficients(const Vector &z) const;
};

nlohmann::json ToJson(const MlModel &m);
MlModel MlModelFromJson(const nlohmann::json &j);

struct TrainingData
{
  Matrix X;  // rows: inputs
  Matrix Y;  // rows: raw targets
};

// Assembles the supervised problem for the buffer: time-vectorized rows (mu) -> c^1..c^K
// flattened, or random-access rows (mu, t_k) -> c^k.
TrainingData BuildTrainingData(const std::vector<Vector> &inputs,
                               const std::vector<Matrix> &coeffs, TimeMode mode);

// Fits the configured backend on the buffer.
MlModel TrainMl(const HierarchyConfig &cfg, const std::vector<Vector> &inputs,
                const std::vector<Matrix> &coeffs, std::uint64_t seed);

struct HierarchyState
{
  std::shared_ptr<const fom::FomModel> fom;
  param::ParameterDomain domain;
  HierarchyConfig config;
  rb::ReducedModel rm;             // N_RB = 0 until the first FOM ingest
  std::optional<MlModel> ml;
  std::vector<Vector> train_inputs;  // normalized parameters
  std::vector<Matrix> train_coeffs;  // N_RB x (K+1) each
  int new_since_training = 0;
  bool retraining_frozen = false;
  std::optional<std::size_t> last_training_query;  // log size when the current ML was trained
  std::vector<QueryRecord> log;
  std::vector<TrainingEvent> trainings;
  std::optional<std::filesystem::path> audit_dir;  // FOM trajectories are written here
};

HierarchyState MakeState(const fom::FomSpec &spec, const param::ParameterDomain &domain,
                         const HierarchyConfig &cfg);

// Certified query: ML (if trained) -> RB -> FOM, each non-FOM answer accepted only when its
// output bound is <= tolerance. RB answers are harvested as training data; FOM answers enrich
// the basis.
QueryRecord Query(HierarchyState &state, const param::Parameter &mu);

// Extends the basis from a FOM trajectory and reprojects. Returns true when the basis grew,
// which also discards the ML model and the training buffer.
bool IngestFom(HierarchyState &state, const fom::Trajectory &traj);

// Retrains when enough new samples arrived, unless retraining was frozen. When triggered while
// an ML model exists whose ratio since its training reached stop_ratio, retraining is frozen
// instead. Returns true when a training ran.
bool MaybeRetrain(HierarchyState &state);

// Fraction of ML answers among queries since the current model was trained; nullopt without
// a model or queries.
std::optional<double> MlRatioSinceTraining(const HierarchyState &state);

}  // namespace certrom::hierarchy

#endif  // CERTROM_HIERARCHY_HPP
