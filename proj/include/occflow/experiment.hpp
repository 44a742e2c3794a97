#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "occflow/label.hpp"
#include "occflow/metrics.hpp"
#include "occflow/optim.hpp"
#include "occflow/scene.hpp"

namespace occflow {

/// Invalid configuration. `field` is the dotted path of the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field.empty() ? message : field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Ablation {
  bool no_ta = false;      // static and dynamic temporal aggregation off
  bool no_dyn_ta = false;  // dynamic temporal aggregation off
  bool no_sim = false;     // similarity-flow loss off
  bool single_sdf = false; // one static field, no flow

  /// "full" or the enabled switches joined by '+', in a fixed order.
  std::string label() const;
  /// Accepts no-ta, no-dyn-ta, no-sim and single-sdf.
  void enable(const std::string& name);
};

struct ExperimentConfig {
  std::string scene_file;  // empty: built-in desk scene with `movers` movers
  int movers = 1;
  std::optional<GridSpec> grid;  // overrides the scene volume
  std::optional<int> frames;     // overrides the scene frame count
  std::uint64_t seed = 1;
  std::string out_dir = "runs/base";
  double initial_a = 10.0;
  FieldInit init;
  LabelThresholds labels;
  std::optional<double> mask_confidence;
  std::optional<double> label_noise;
  TrainConfig train;
  EvalConfig eval;
  Ablation ablation;
  int progress_every = 100;  // iterations between progress log lines, 0 = off

  /// Parses and validates; throws ConfigError naming the bad field, or with
  /// the line and column of a JSON syntax error. Relative scene paths resolve
  /// against `base_dir`.
  static ExperimentConfig from_json(const std::string& text, const std::string& base_dir = "");
  static ExperimentConfig load(const std::string& path);
  std::string to_json() const;

  void validate() const;
  /// Scene with the config overrides applied.
  SceneDescription scene() const;
  /// Training settings after the ablation switches.
  TrainConfig effective_train() const;
};

struct PreparedData {
  SceneDescription scene;
  std::vector<RayBatch> batches;  // labeled
  LabelStats stats;
};

/// Scene generation and LiDAR labeling from oracle instance masks.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Initializes and optimizes the fields. `state` keeps the partial trace when
/// optimization throws.
void train_fields(const ExperimentConfig& cfg, const PreparedData& data, const Workers& workers,
                  TrainState& state);

/// Metrics of trained fields, labeled with the ablation and scene id.
MetricsReport evaluate_state(const ExperimentConfig& cfg, const SceneDescription& scene,
                             const TrainState& state, const Workers& workers);

/// Stable identifier of a scene description (hash of its JSON form).
std::string scene_id(const SceneDescription& scene);

struct ExperimentResult {
  MetricsReport report;
  TrainState state;
  LabelStats labels;
};

/// Trains and evaluates without touching the file system.
ExperimentResult run_pipeline(const ExperimentConfig& cfg, const Workers& workers);

/// Paths of the artifacts written by run_experiment, relative to out_dir.
struct ArtifactNames {
  static constexpr const char* metrics_csv = "metrics.csv";
  static constexpr const char* metrics_json = "metrics.json";
  static constexpr const char* loss_trace = "loss_trace.csv";
  static constexpr const char* checkpoint = "checkpoint.grid";
  static constexpr const char* config = "config.json";
  static constexpr const char* scene = "scene.json";
};

/// Full run: pipeline plus metrics, loss trace, renders and checkpoint under
/// cfg.out_dir. On divergence the loss trace is still written and the
/// DivergenceError propagates.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Workers& workers);

/// Depth, color and flow images of the trained fields at frame t.
void write_renders(const std::string& dir, const TrainState& state, const SceneDescription& scene,
                   int t, bool single_sdf, const Workers& workers);

/// Ablation table: one row per report plus deltas against the first row.
/// Throws std::invalid_argument when scene ids or seeds disagree.
std::string compare_reports(const std::vector<MetricsReport>& reports, std::string* csv = nullptr);

}  // namespace occflow
