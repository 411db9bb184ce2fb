#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gama/data.hpp"
#include "gama/metrics.hpp"
#include "gama/perturb.hpp"
#include "gama/trainer.hpp"
#include "gama/types.hpp"

namespace gama {

using Json = nlohmann::ordered_json;

enum class Protocol { kUda, kFsda };

struct DatasetConfig {
  std::string generator;  // "two_moons", "swiss_roll", or "csv"
  int n_per_domain = 500;
  Scalar noise = 0.1;
  Scalar rotation_deg = 0.0;
  Vector translation = Vector::Zero(2);
  Scalar stretch = 1.0;
  std::string csv_path;
  std::uint64_t seed = 0;
  Protocol protocol = Protocol::kUda;
  int shots = 1;

  DatasetBundle build() const;
};

struct MetricOptions {
  int geoalign_k = 10;
  Index geoalign_cap = 2000;
};

/// One declarative experiment: dataset, training, attack, metric options and
/// the output directory. Unknown config keys are rejected.
struct ExperimentConfig {
  DatasetConfig dataset;
  TrainConfig train;
  AttackConfig attack;
  MetricOptions metrics;
  std::string output_dir = "out";

  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig from_file(const std::string& path);
  Json to_json() const;

  /// output_dir resolved under $GAMA_OUTPUT_ROOT when that is set.
  std::string resolved_output_dir() const;
};

struct TrainArtifacts {
  std::string checkpoint_path;
  std::string report_path;
  std::string loss_csv_path;
  FitReport report;
  Scalar final_selection_accuracy = 0.0;
};

/// Runs fit and writes checkpoint, training report, and loss CSV.
TrainArtifacts run_train(const ExperimentConfig& cfg);

struct MetricsReport {
  Scalar target_accuracy = 0.0;
  Scalar robust_accuracy = 0.0;
  Scalar geoalign = 0.0;
  std::vector<Scalar> per_class_accuracy;
  std::string loss_history_ref;
  std::vector<std::uint64_t> seeds;
  std::vector<Scalar> per_seed_target_accuracy;

  Json to_json() const;
};

/// Clean and PGD accuracy on the target test split plus the GeoAlign score
/// between source-train and target-test embeddings.
MetricsReport evaluate(const ExperimentConfig& cfg, const NetSpec& spec,
                       const NetParams& params, const DatasetBundle& bundle);

/// Checkpoint-based evaluation; writes metrics_report.json.
MetricsReport run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                       const std::string& report_out);

/// Ablation grid: the base config plus one variant per dropped component,
/// every variant trained on the same seed list. Dropping a component zeroes
/// its loss weight and, for on/off, its perturbation step size.
struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  Scalar target_accuracy = 0.0;
  Scalar robust_accuracy = 0.0;
  Scalar geoalign = 0.0;
  long label_reads_during_training = 0;
};

struct AblationReport {
  std::vector<std::string> variants;
  std::vector<AblationRow> rows;
  Json to_json() const;
  std::string to_csv() const;

  Scalar mean(const std::string& variant, Scalar AblationRow::*field) const;
  Scalar stddev(const std::string& variant, Scalar AblationRow::*field) const;
};

AblationReport run_ablate(const ExperimentConfig& cfg,
                          const std::vector<std::string>& drop_components,
                          int num_seeds, bool include_source_only_baseline,
                          const std::string& out_dir);

/// Throws ConfigError when the report json is missing required fields.
void validate_metrics_report_json(const Json& j);

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows);
std::string format_double(Scalar v);

}  // namespace gama
