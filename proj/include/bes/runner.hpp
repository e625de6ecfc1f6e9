#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "bes/models.hpp"
#include "bes/optim.hpp"
#include "bes/tasks.hpp"

namespace bes {

enum class TaskKind { Barbell, GraphProperty, RingRouting };

struct TaskSpec {
  TaskKind kind = TaskKind::Barbell;
  /// Barbell: total node count N. Ring routing: ring length.
  std::size_t size = 50;
  std::size_t k_path = 4;
  BarbellOptions barbell;
  PropertyOptions property;
  RingRoutingOptions ring;
  std::size_t train = 512;
  std::size_t val = 64;
  std::size_t test = 128;
  std::uint64_t data_seed = 0;
  /// Load splits from here (as written by `gen`) instead of generating them.
  std::optional<std::filesystem::path> data_dir;
};

struct RunConfig {
  TaskSpec task;
  /// in_dim, out_dim and readout are overwritten to match the task.
  ModelConfig model;
  AdamHyper optim;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  std::size_t patience = 50;
  std::size_t eval_every = 1;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "runs/default";
  /// Concurrent seeds (1 = sequential). Capped by BE_SPECTRAL_THREADS when set.
  std::size_t parallel_seeds = 1;
  bool save_checkpoints = true;
};

nlohmann::json to_json(const TaskSpec& t);
nlohmann::json to_json(const RunConfig& c);
/// Missing keys keep their defaults. Throws ConfigInvalid.
RunConfig run_config_from_json(const nlohmann::json& j);
/// FNV-1a 64 over the compact JSON dump, as 16 hex digits.
std::string config_hash(const RunConfig& c);

struct DataSplits {
  std::vector<TaskInstance> train, val, test;
};

/// Generates (or loads) the three splits; instance i of a split uses derive_seed(data_seed, ...).
DataSplits make_splits(const TaskSpec& spec);
std::vector<TaskInstance> generate_task(const TaskSpec& spec, std::size_t count, std::uint64_t seed);

/// Shape-dependent model fields for a task.
ModelConfig fit_model_to_task(ModelConfig model, const TaskSpec& spec, const TaskInstance& sample);
LossKind loss_kind(const TaskSpec& spec);

struct EvalResult {
  double loss = 0.0;      // training objective
  double mse = 0.0;       // regression tasks
  double log10_mse = 0.0;
  double accuracy = 0.0;  // classification tasks
  std::size_t supervised = 0;
  bool classification = false;
};

/// Batched evaluation in instance order.
EvalResult evaluate(const MuChebNet& model, const std::vector<TaskInstance>& data, LossKind kind,
                    std::size_t batch_size = 32);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  EvalResult untrained_test;
  EvalResult test;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double wall_seconds = 0.0;
  std::filesystem::path checkpoint;
  std::vector<EpochMetrics> history;
  /// Task-specific statistics (e.g. clean/noisy potential means for ring routing).
  nlohmann::json extras = nlohmann::json::object();
};

struct RunRecord {
  std::string config_hash;
  std::vector<SeedResult> seeds;
  /// Mean and population std of the headline test metric over seeds (mse or accuracy).
  std::string metric_name;
  double metric_mean = 0.0;
  double metric_std = 0.0;
};

/// Trains one seed. Metrics are streamed as JSON lines to `metrics` when given.
/// Throws NaNLoss on a non-finite training loss.
SeedResult train_seed(const RunConfig& config, const DataSplits& data, std::uint64_t seed,
                      std::ostream* metrics = nullptr, const std::filesystem::path& checkpoint_dir = {});

/// Full multi-seed run: writes config.json, seed_<s>/metrics.jsonl, seed_<s>/checkpoint/,
/// record.json and summary.csv under config.out_dir.
RunRecord cmd_train(const RunConfig& config);
RunRecord cmd_train(const RunConfig& config, const DataSplits& data);

nlohmann::json to_json(const EvalResult& r);
nlohmann::json to_json(const SeedResult& r);
nlohmann::json to_json(const RunRecord& r);

/// Potential per node for a trained model on one instance, with role labels and summary
/// statistics in the manifest (clean/noisy contrast for ring routing, bell/bridge means for
/// barbell). Throws ShapeMismatch.
struct MuExport {
  Vector mu;
  nlohmann::json manifest;
};
MuExport export_mu(const MuChebNet& model, const TaskInstance& inst);

/// Worker cap from BE_SPECTRAL_THREADS (default 1).
std::size_t thread_cap();

}  // namespace bes
