#include "gama/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gama/errors.hpp"

namespace gama {

namespace {

/// Strict object reader: every key must be consumed, unknown keys are
/// rejected with their full path.
class JsonReader {
 public:
  JsonReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_ + ": expected an object");
    }
  }

  template <typename T>
  T require(const char* key) {
    if (!j_.contains(key)) {
      throw ConfigError(path_ + ": missing key '" + key + "'");
    }
    return fetch<T>(key);
  }

  template <typename T>
  T get(const char* key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return fetch<T>(key);
  }

  const Json* child(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  bool has(const char* key) const { return j_.contains(key); }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw ConfigError(path_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  template <typename T>
  T fetch(const char* key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(path_ + ": bad value for '" + key + "'");
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TangentDim parse_tangent(const Json& j) {
  JsonReader r(j, "train.tangent");
  const auto rule = r.require<std::string>("rule");
  if (rule == "fixed") {
    const TangentDim dim = TangentDim::fixed(r.require<int>("m"));
    r.done();
    return dim;
  }
  if (rule == "variance") {
    const TangentDim dim = TangentDim::by_variance(r.require<Scalar>("threshold"));
    r.done();
    return dim;
  }
  throw ConfigError("train.tangent.rule must be 'fixed' or 'variance'");
}

Json tangent_to_json(const TangentDim& dim) {
  Json j;
  if (dim.is_fixed) {
    j["rule"] = "fixed";
    j["m"] = dim.m;
  } else {
    j["rule"] = "variance";
    j["threshold"] = dim.threshold;
  }
  return j;
}

TrainConfig parse_train(const Json& j) {
  JsonReader r(j, "train");
  TrainConfig cfg;
  cfg.epochs = r.get("epochs", cfg.epochs);
  cfg.batch_size_source = r.get("batch_size_source", cfg.batch_size_source);
  cfg.batch_size_target = r.get("batch_size_target", cfg.batch_size_target);
  cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
  cfg.knn_k = r.get("knn_k", cfg.knn_k);
  cfg.source_val_fraction = r.get("source_val_fraction", cfg.source_val_fraction);

  if (const Json* opt = r.child("optimizer")) {
    JsonReader ro(*opt, "train.optimizer");
    const auto name = ro.get<std::string>("name", "adam");
    if (name == "adam") {
      cfg.optimizer.kind = OptimizerKind::kAdam;
    } else if (name == "sgd") {
      cfg.optimizer.kind = OptimizerKind::kSgd;
    } else {
      throw ConfigError("train.optimizer.name must be 'adam' or 'sgd'");
    }
    cfg.optimizer.learning_rate =
        ro.get("learning_rate", cfg.optimizer.learning_rate);
    cfg.optimizer.beta1 = ro.get("beta1", cfg.optimizer.beta1);
    cfg.optimizer.beta2 = ro.get("beta2", cfg.optimizer.beta2);
    cfg.optimizer.eps = ro.get("eps", cfg.optimizer.eps);
    ro.done();
  }

  const auto refresh = r.get<std::string>("manifold_refresh", "per_batch");
  if (refresh == "per_batch") {
    cfg.manifold_refresh = ManifoldRefresh::kPerBatch;
  } else if (refresh == "per_epoch") {
    cfg.manifold_refresh = ManifoldRefresh::kPerEpoch;
  } else {
    throw ConfigError("train.manifold_refresh must be 'per_batch' or 'per_epoch'");
  }

  const auto estimator = r.get<std::string>("manifold_estimator", "pca");
  if (estimator == "pca") {
    cfg.estimator = ManifoldEstimator::kPca;
  } else if (estimator == "autoencoder") {
    cfg.estimator = ManifoldEstimator::kAutoencoder;
  } else {
    throw ConfigError("train.manifold_estimator must be 'pca' or 'autoencoder'");
  }

  const auto geom = r.get<std::string>("geom_distance", "kernel");
  if (geom == "kernel") {
    cfg.geom_distance = GeomDistance::kKernel;
  } else if (geom == "graph") {
    cfg.geom_distance = GeomDistance::kGraph;
  } else {
    throw ConfigError("train.geom_distance must be 'kernel' or 'graph'");
  }

  if (const Json* tangent = r.child("tangent")) {
    cfg.tangent = parse_tangent(*tangent);
  }

  if (const Json* w = r.child("weights")) {
    JsonReader rw(*w, "train.weights");
    cfg.weights.lambda_on = rw.get("lambda_on", cfg.weights.lambda_on);
    cfg.weights.lambda_off = rw.get("lambda_off", cfg.weights.lambda_off);
    cfg.weights.lambda_geom = rw.get("lambda_geom", cfg.weights.lambda_geom);
    cfg.weights.tau = rw.get("tau", cfg.weights.tau);
    rw.done();
  }

  if (const Json* p = r.child("perturb")) {
    JsonReader rp(*p, "train.perturb");
    cfg.perturb.alpha = rp.get("alpha", cfg.perturb.alpha);
    cfg.perturb.beta = rp.get("beta", cfg.perturb.beta);
    cfg.perturb.zero_norm_tol = rp.get("zero_norm_tol", cfg.perturb.zero_norm_tol);
    rp.done();
  }

  if (const Json* net = r.child("net")) {
    JsonReader rn(*net, "train.net");
    cfg.hidden = rn.get("hidden", cfg.hidden);
    cfg.activation =
        activation_from_string(rn.get<std::string>("activation", "tanh"));
    cfg.embedding_layer = rn.get("embedding_layer", cfg.embedding_layer);
    rn.done();
  }

  if (const Json* ae = r.child("autoencoder")) {
    JsonReader ra(*ae, "train.autoencoder");
    cfg.autoencoder.hidden = ra.get("hidden", cfg.autoencoder.hidden);
    cfg.autoencoder.latent = ra.get("latent", cfg.autoencoder.latent);
    cfg.autoencoder.epochs = ra.get("epochs", cfg.autoencoder.epochs);
    cfg.autoencoder.learning_rate =
        ra.get("learning_rate", cfg.autoencoder.learning_rate);
    ra.done();
  }

  r.done();
  return cfg;
}

Json train_to_json(const TrainConfig& cfg) {
  Json j;
  j["epochs"] = cfg.epochs;
  j["batch_size_source"] = cfg.batch_size_source;
  j["batch_size_target"] = cfg.batch_size_target;
  j["seed"] = cfg.seed;
  j["knn_k"] = cfg.knn_k;
  j["source_val_fraction"] = cfg.source_val_fraction;
  j["optimizer"] = {
      {"name", cfg.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
      {"learning_rate", cfg.optimizer.learning_rate},
      {"beta1", cfg.optimizer.beta1},
      {"beta2", cfg.optimizer.beta2},
      {"eps", cfg.optimizer.eps}};
  j["manifold_refresh"] = cfg.manifold_refresh == ManifoldRefresh::kPerBatch
                              ? "per_batch"
                              : "per_epoch";
  j["manifold_estimator"] =
      cfg.estimator == ManifoldEstimator::kPca ? "pca" : "autoencoder";
  j["geom_distance"] =
      cfg.geom_distance == GeomDistance::kKernel ? "kernel" : "graph";
  j["tangent"] = tangent_to_json(cfg.tangent);
  j["weights"] = {{"lambda_on", cfg.weights.lambda_on},
                  {"lambda_off", cfg.weights.lambda_off},
                  {"lambda_geom", cfg.weights.lambda_geom},
                  {"tau", cfg.weights.tau}};
  j["perturb"] = {{"alpha", cfg.perturb.alpha},
                  {"beta", cfg.perturb.beta},
                  {"zero_norm_tol", cfg.perturb.zero_norm_tol}};
  j["net"] = {{"hidden", cfg.hidden},
              {"activation", to_string(cfg.activation)},
              {"embedding_layer", cfg.embedding_layer}};
  j["autoencoder"] = {{"hidden", cfg.autoencoder.hidden},
                      {"latent", cfg.autoencoder.latent},
                      {"epochs", cfg.autoencoder.epochs},
                      {"learning_rate", cfg.autoencoder.learning_rate}};
  return j;
}

DatasetConfig parse_dataset(const Json& j) {
  JsonReader r(j, "dataset");
  DatasetConfig cfg;
  cfg.generator = r.require<std::string>("generator");
  cfg.seed = r.get<std::uint64_t>("seed", cfg.seed);
  const auto protocol = r.get<std::string>("protocol", "uda");
  if (protocol == "uda") {
    cfg.protocol = Protocol::kUda;
  } else if (protocol == "fsda") {
    cfg.protocol = Protocol::kFsda;
  } else {
    throw ConfigError("dataset.protocol must be 'uda' or 'fsda'");
  }
  cfg.shots = r.get("shots", cfg.shots);

  if (cfg.generator == "two_moons") {
    cfg.n_per_domain = r.get("n_per_domain", cfg.n_per_domain);
    cfg.noise = r.get("noise", cfg.noise);
    cfg.rotation_deg = r.get("rotation_deg", cfg.rotation_deg);
    if (const Json* t = r.child("translation")) {
      const auto vals = t->get<std::vector<Scalar>>();
      if (vals.size() != 2) {
        throw ConfigError("dataset.translation must have 2 entries");
      }
      cfg.translation = Eigen::Map<const Vector>(vals.data(), 2);
    }
  } else if (cfg.generator == "swiss_roll") {
    cfg.n_per_domain = r.get("n_per_domain", cfg.n_per_domain);
    cfg.noise = r.get("noise", cfg.noise);
    cfg.stretch = r.get("stretch", cfg.stretch);
  } else if (cfg.generator == "csv") {
    cfg.csv_path = r.require<std::string>("path");
  } else {
    throw ConfigError("dataset.generator must be 'two_moons', 'swiss_roll', or 'csv'");
  }
  r.done();
  return cfg;
}

Json dataset_to_json(const DatasetConfig& cfg) {
  Json j;
  j["generator"] = cfg.generator;
  j["seed"] = cfg.seed;
  j["protocol"] = cfg.protocol == Protocol::kUda ? "uda" : "fsda";
  if (cfg.protocol == Protocol::kFsda) j["shots"] = cfg.shots;
  if (cfg.generator == "two_moons") {
    j["n_per_domain"] = cfg.n_per_domain;
    j["noise"] = cfg.noise;
    j["rotation_deg"] = cfg.rotation_deg;
    j["translation"] = {cfg.translation(0), cfg.translation(1)};
  } else if (cfg.generator == "swiss_roll") {
    j["n_per_domain"] = cfg.n_per_domain;
    j["noise"] = cfg.noise;
    j["stretch"] = cfg.stretch;
  } else {
    j["path"] = cfg.csv_path;
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open " + path + " for writing");
  }
  out << text;
  if (!out) {
    throw DataError("write failed for " + path);
  }
}

Json epoch_metrics_to_json(const std::vector<EpochMetrics>& metrics) {
  Json arr = Json::array();
  for (const auto& em : metrics) {
    arr.push_back({{"epoch", em.epoch},
                   {"cls", em.mean_loss.cls},
                   {"on", em.mean_loss.on},
                   {"off", em.mean_loss.off},
                   {"geom", em.mean_loss.geom},
                   {"total", em.mean_loss.total},
                   {"selection_accuracy", em.selection_accuracy},
                   {"mean_explained_variance", em.mean_explained_variance}});
  }
  return arr;
}

}  // namespace

DatasetBundle DatasetConfig::build() const {
  DatasetBundle bundle;
  if (generator == "two_moons") {
    bundle = gen_two_moons_shift(n_per_domain, noise, rotation_deg, translation,
                                 seed);
  } else if (generator == "swiss_roll") {
    bundle = gen_swiss_roll_shift(n_per_domain, noise, stretch, seed);
  } else if (generator == "csv") {
    CsvSchema schema;
    schema.split_seed = seed;
    schema.drop_target_train_labels = false;  // protocol decides below
    bundle = load_csv(csv_path, schema);
  } else {
    throw ConfigError("unknown dataset generator '" + generator + "'");
  }
  if (protocol == Protocol::kUda) {
    bundle.drop_target_train_labels();
  } else {
    bundle.keep_k_shot(shots, seed);
  }
  bundle.reset_label_reads();
  return bundle;
}

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  JsonReader r(j, "config");
  ExperimentConfig cfg;
  if (const Json* dataset = r.child("dataset")) {
    cfg.dataset = parse_dataset(*dataset);
  } else {
    throw ConfigError("config: missing 'dataset' section");
  }
  if (const Json* train = r.child("train")) {
    cfg.train = parse_train(*train);
  }
  if (const Json* atk = r.child("attack")) {
    JsonReader ra(*atk, "attack");
    cfg.attack.epsilon = ra.get("epsilon", cfg.attack.epsilon);
    cfg.attack.steps = ra.get("steps", cfg.attack.steps);
    cfg.attack.step_size = ra.get("step_size", cfg.attack.step_size);
    cfg.attack.random_start = ra.get("random_start", cfg.attack.random_start);
    ra.done();
  }
  if (const Json* m = r.child("metrics")) {
    JsonReader rm(*m, "metrics");
    cfg.metrics.geoalign_k = rm.get("geoalign_k", cfg.metrics.geoalign_k);
    cfg.metrics.geoalign_cap =
        static_cast<Index>(rm.get<long>("geoalign_cap", cfg.metrics.geoalign_cap));
    rm.done();
  }
  cfg.output_dir = r.get<std::string>("output_dir", cfg.output_dir);
  r.done();
  cfg.train.validate();
  cfg.attack.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return from_json(j);
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["dataset"] = dataset_to_json(dataset);
  j["train"] = train_to_json(train);
  j["attack"] = {{"epsilon", attack.epsilon},
                 {"steps", attack.steps},
                 {"step_size", attack.step_size},
                 {"random_start", attack.random_start}};
  j["metrics"] = {{"geoalign_k", metrics.geoalign_k},
                  {"geoalign_cap", metrics.geoalign_cap}};
  j["output_dir"] = output_dir;
  return j;
}

std::string ExperimentConfig::resolved_output_dir() const {
  const char* root = std::getenv("GAMA_OUTPUT_ROOT");
  if (root && root[0] != '\0' &&
      !std::filesystem::path(output_dir).is_absolute()) {
    return (std::filesystem::path(root) / output_dir).string();
  }
  return output_dir;
}

std::string format_double(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& rows) {
  std::ostringstream out;
  out << "step,cls,on,off,geom,total\n";
  for (const auto& row : rows) {
    out << row.step << ',' << format_double(row.loss.cls) << ','
        << format_double(row.loss.on) << ',' << format_double(row.loss.off)
        << ',' << format_double(row.loss.geom) << ','
        << format_double(row.loss.total) << '\n';
  }
  write_text_file(path, out.str());
}

TrainArtifacts run_train(const ExperimentConfig& cfg) {
  const DatasetBundle bundle = cfg.dataset.build();
  auto [state, report] = fit(bundle, cfg.train);

  const std::string dir = cfg.resolved_output_dir();
  std::filesystem::create_directories(dir);

  TrainArtifacts artifacts;
  artifacts.report = report;
  artifacts.final_selection_accuracy = report.best_selection_accuracy;
  artifacts.checkpoint_path = (std::filesystem::path(dir) / "checkpoint.txt").string();
  artifacts.report_path = (std::filesystem::path(dir) / "train_report.json").string();
  artifacts.loss_csv_path = (std::filesystem::path(dir) / "loss_history.csv").string();

  save_checkpoint(artifacts.checkpoint_path, state.spec, state.best_params,
                  cfg.train.seed);
  write_loss_csv(artifacts.loss_csv_path, state.history);

  Json j;
  j["config"] = cfg.to_json();
  j["seed"] = cfg.train.seed;
  j["mode"] = report.mode;
  j["epochs_run"] = report.epochs_run;
  j["best_epoch"] = report.best_epoch;
  j["best_selection_accuracy"] = report.best_selection_accuracy;
  j["label_reads_after_training"] = report.label_reads_after_training;
  j["clamp_events"] = report.clamp_events;
  j["wall_time_seconds"] = report.wall_seconds;
  j["history"] = epoch_metrics_to_json(report.epoch_metrics);
  write_text_file(artifacts.report_path, j.dump(2) + "\n");
  return artifacts;
}

Json MetricsReport::to_json() const {
  Json j;
  j["target_accuracy"] = target_accuracy;
  j["robust_accuracy"] = robust_accuracy;
  j["geoalign"] = geoalign;
  j["per_class_accuracy"] = per_class_accuracy;
  j["loss_history_ref"] = loss_history_ref;
  j["seeds"] = seeds;
  j["per_seed_target_accuracy"] = per_seed_target_accuracy;
  return j;
}

void validate_metrics_report_json(const Json& j) {
  const auto need = [&](const char* key, bool ok) {
    if (!j.contains(key) || !ok) {
      throw ConfigError(std::string("metrics report: bad or missing '") + key +
                        "'");
    }
  };
  need("target_accuracy", j.contains("target_accuracy") && j["target_accuracy"].is_number());
  need("robust_accuracy", j.contains("robust_accuracy") && j["robust_accuracy"].is_number());
  need("geoalign", j.contains("geoalign") && j["geoalign"].is_number());
  need("per_class_accuracy",
       j.contains("per_class_accuracy") && j["per_class_accuracy"].is_array());
  need("loss_history_ref",
       j.contains("loss_history_ref") && j["loss_history_ref"].is_string());
  need("seeds", j.contains("seeds") && j["seeds"].is_array());
  need("per_seed_target_accuracy", j.contains("per_seed_target_accuracy") &&
                                       j["per_seed_target_accuracy"].is_array());
  if (j["geoalign"].get<Scalar>() < 0.0) {
    throw ConfigError("metrics report: geoalign must be nonnegative");
  }
  if (j["robust_accuracy"].get<Scalar>() >
      j["target_accuracy"].get<Scalar>() + 0.5) {
    throw ConfigError(
        "metrics report: robust accuracy exceeds clean accuracy beyond slack");
  }
}

MetricsReport evaluate(const ExperimentConfig& cfg, const NetSpec& spec,
                       const NetParams& params, const DatasetBundle& bundle) {
  if (spec.input_dim() != bundle.dim()) {
    throw ParameterError("evaluate: checkpoint input dimension " +
                         std::to_string(spec.input_dim()) +
                         " does not match dataset dimension " +
                         std::to_string(bundle.dim()));
  }
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(bundle.target_test.size()));
  for (Index i = 0; i < bundle.target_test.size(); ++i) {
    labels.push_back(bundle.target_test_label(i));
  }

  MetricsReport report;
  report.target_accuracy =
      accuracy_percent(spec, params, bundle.target_test.x, labels);
  report.robust_accuracy = robust_accuracy_percent(
      spec, params, bundle.target_test.x, labels, cfg.attack);
  report.per_class_accuracy = per_class_accuracy(
      spec, params, bundle.target_test.x, labels, bundle.num_classes());

  const Matrix semb = embed_all(spec, params, bundle.source_train.x);
  const Matrix temb = embed_all(spec, params, bundle.target_test.x);
  report.geoalign = geoalign_score(semb, temb, cfg.metrics.geoalign_k,
                                   cfg.metrics.geoalign_cap, cfg.dataset.seed);
  report.seeds = {cfg.train.seed};
  report.per_seed_target_accuracy = {report.target_accuracy};
  return report;
}

MetricsReport run_eval(const ExperimentConfig& cfg,
                       const std::string& checkpoint_path,
                       const std::string& report_out) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const DatasetBundle bundle = cfg.dataset.build();
  MetricsReport report = evaluate(cfg, ck.spec, ck.params, bundle);
  report.loss_history_ref =
      (std::filesystem::path(cfg.resolved_output_dir()) / "loss_history.csv")
          .string();
  const Json j = report.to_json();
  validate_metrics_report_json(j);
  if (!report_out.empty()) {
    write_text_file(report_out, j.dump(2) + "\n");
  }
  return report;
}

Scalar AblationReport::mean(const std::string& variant,
                            Scalar AblationRow::*field) const {
  Scalar sum = 0.0;
  long count = 0;
  for (const auto& row : rows) {
    if (row.variant == variant) {
      sum += row.*field;
      ++count;
    }
  }
  return count > 0 ? sum / static_cast<Scalar>(count) : 0.0;
}

Scalar AblationReport::stddev(const std::string& variant,
                              Scalar AblationRow::*field) const {
  const Scalar mu = mean(variant, field);
  Scalar ss = 0.0;
  long count = 0;
  for (const auto& row : rows) {
    if (row.variant == variant) {
      ss += (row.*field - mu) * (row.*field - mu);
      ++count;
    }
  }
  return count > 1 ? std::sqrt(ss / static_cast<Scalar>(count - 1)) : 0.0;
}

Json AblationReport::to_json() const {
  Json j;
  j["variants"] = variants;
  Json rows_json = Json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"variant", row.variant},
                         {"seed", row.seed},
                         {"target_accuracy", row.target_accuracy},
                         {"robust_accuracy", row.robust_accuracy},
                         {"geoalign", row.geoalign}});
  }
  j["rows"] = rows_json;
  Json summary;
  for (const auto& v : variants) {
    summary[v] = {
        {"target_accuracy_mean", mean(v, &AblationRow::target_accuracy)},
        {"target_accuracy_std", stddev(v, &AblationRow::target_accuracy)},
        {"robust_accuracy_mean", mean(v, &AblationRow::robust_accuracy)},
        {"robust_accuracy_std", stddev(v, &AblationRow::robust_accuracy)},
        {"geoalign_mean", mean(v, &AblationRow::geoalign)},
        {"geoalign_std", stddev(v, &AblationRow::geoalign)}};
  }
  j["summary"] = summary;
  return j;
}

std::string AblationReport::to_csv() const {
  std::ostringstream out;
  out << "variant,seed,target_accuracy,robust_accuracy,geoalign\n";
  for (const auto& row : rows) {
    out << row.variant << ',' << row.seed << ','
        << format_double(row.target_accuracy) << ','
        << format_double(row.robust_accuracy) << ','
        << format_double(row.geoalign) << '\n';
  }
  return out.str();
}

namespace {

/// Dropping a component zeroes its loss weight and, for the perturbation
/// components, the associated step size.
ExperimentConfig apply_variant(const ExperimentConfig& base,
                               const std::string& variant) {
  ExperimentConfig cfg = base;
  if (variant == "full") return cfg;
  if (variant == "no_geom") {
    cfg.train.weights.lambda_geom = 0.0;
  } else if (variant == "no_on") {
    cfg.train.weights.lambda_on = 0.0;
    cfg.train.perturb.alpha = 0.0;
  } else if (variant == "no_off") {
    cfg.train.weights.lambda_off = 0.0;
    cfg.train.perturb.beta = 0.0;
  } else if (variant == "source_only") {
    cfg.train.weights.lambda_on = 0.0;
    cfg.train.weights.lambda_off = 0.0;
    cfg.train.weights.lambda_geom = 0.0;
    cfg.train.perturb.alpha = 0.0;
    cfg.train.perturb.beta = 0.0;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  return cfg;
}

}  // namespace

AblationReport run_ablate(const ExperimentConfig& cfg,
                          const std::vector<std::string>& drop_components,
                          int num_seeds, bool include_source_only_baseline,
                          const std::string& out_dir) {
  if (num_seeds < 1) {
    throw ParameterError("run_ablate: need at least one seed");
  }
  AblationReport report;
  report.variants.push_back("full");
  for (const auto& c : drop_components) {
    if (c != "geom" && c != "on" && c != "off") {
      throw ConfigError("ablate: components must be a subset of {geom, on, off}");
    }
    report.variants.push_back("no_" + c);
  }
  if (include_source_only_baseline) {
    report.variants.push_back("source_only");
  }

  for (int i = 0; i < num_seeds; ++i) {
    for (const auto& variant : report.variants) {
      ExperimentConfig vcfg = apply_variant(cfg, variant);
      vcfg.dataset.seed = cfg.dataset.seed + static_cast<std::uint64_t>(i);
      vcfg.train.seed = cfg.train.seed + static_cast<std::uint64_t>(i);

      const DatasetBundle bundle = vcfg.dataset.build();
      auto [state, fit_report] = fit(bundle, vcfg.train);
      const MetricsReport metrics =
          evaluate(vcfg, state.spec, state.best_params, bundle);

      AblationRow row;
      row.variant = variant;
      row.seed = vcfg.train.seed;
      row.target_accuracy = metrics.target_accuracy;
      row.robust_accuracy = metrics.robust_accuracy;
      row.geoalign = metrics.geoalign;
      row.label_reads_during_training = fit_report.label_reads_after_training;
      report.rows.push_back(row);
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    Json j = report.to_json();
    Json header;
    header["base_config"] = cfg.to_json();
    Json drops;
    for (const auto& v : report.variants) {
      const ExperimentConfig vcfg = apply_variant(cfg, v);
      drops[v] = {{"lambda_on", vcfg.train.weights.lambda_on},
                  {"lambda_off", vcfg.train.weights.lambda_off},
                  {"lambda_geom", vcfg.train.weights.lambda_geom},
                  {"alpha", vcfg.train.perturb.alpha},
                  {"beta", vcfg.train.perturb.beta}};
    }
    header["variant_settings"] = drops;
    j["header"] = header;
    write_text_file(
        (std::filesystem::path(out_dir) / "ablate_report.json").string(),
        j.dump(2) + "\n");
    write_text_file(
        (std::filesystem::path(out_dir) / "ablate_table.csv").string(),
        report.to_csv());
  }
  return report;
}

}  // namespace gama
