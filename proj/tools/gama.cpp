#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gama/data.hpp"
#include "gama/errors.hpp"
#include "gama/experiment.hpp"
#include "gama/metrics.hpp"

namespace {

using gama::ExperimentConfig;
using gama::Json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct CommonOverrides {
  std::string config_path;
  long seed = -1;
  int epochs = -1;
  std::string output_dir;
};

ExperimentConfig load_config(const CommonOverrides& o) {
  ExperimentConfig cfg = ExperimentConfig::from_file(o.config_path);
  if (o.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(o.seed);
  if (o.epochs >= 0) cfg.train.epochs = o.epochs;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  return cfg;
}

int cmd_train(const CommonOverrides& o) {
  const ExperimentConfig cfg = load_config(o);
  const gama::TrainArtifacts artifacts = gama::run_train(cfg);
  std::cout << "mode: " << artifacts.report.mode << "\n"
            << "best epoch: " << artifacts.report.best_epoch << "\n"
            << "best selection accuracy: "
            << artifacts.report.best_selection_accuracy << "\n"
            << "checkpoint: " << artifacts.checkpoint_path << "\n"
            << "report: " << artifacts.report_path << "\n"
            << "loss csv: " << artifacts.loss_csv_path << "\n";
  return kExitOk;
}

int cmd_eval(const CommonOverrides& o, const std::string& checkpoint,
             double epsilon, int steps, double step_size,
             const std::string& out) {
  ExperimentConfig cfg = load_config(o);
  if (epsilon >= 0.0) cfg.attack.epsilon = epsilon;
  if (steps > 0) cfg.attack.steps = steps;
  if (step_size > 0.0) cfg.attack.step_size = step_size;
  cfg.attack.validate();

  std::string report_out = out;
  if (report_out.empty()) {
    const std::string dir = cfg.resolved_output_dir();
    std::filesystem::create_directories(dir);
    report_out =
        (std::filesystem::path(dir) / "metrics_report.json").string();
  }
  const gama::MetricsReport report = gama::run_eval(cfg, checkpoint, report_out);
  std::cout << "target accuracy: " << report.target_accuracy << "\n"
            << "robust accuracy: " << report.robust_accuracy << "\n"
            << "geoalign: " << report.geoalign << "\n"
            << "report: " << report_out << "\n";
  return kExitOk;
}

int cmd_geoalign(const CommonOverrides& o, const std::string& checkpoint,
                 const std::string& source_csv, const std::string& target_csv,
                 int k, double tau, const std::string& out) {
  gama::Matrix semb;
  gama::Matrix temb;
  if (!source_csv.empty() || !target_csv.empty()) {
    if (source_csv.empty() || target_csv.empty()) {
      throw gama::ConfigError(
          "geoalign: need both --source-csv and --target-csv");
    }
    semb = gama::load_matrix_csv(source_csv);
    temb = gama::load_matrix_csv(target_csv);
  } else {
    if (o.config_path.empty() || checkpoint.empty()) {
      throw gama::ConfigError(
          "geoalign: need --config and --checkpoint, or two embedding CSVs");
    }
    const ExperimentConfig cfg = load_config(o);
    const gama::Checkpoint ck = gama::load_checkpoint(checkpoint);
    const gama::DatasetBundle bundle = cfg.dataset.build();
    semb = gama::embed_all(ck.spec, ck.params, bundle.source_train.x);
    temb = gama::embed_all(ck.spec, ck.params, bundle.target_test.x);
  }
  const gama::Scalar score = gama::geoalign_score(semb, temb, k);
  const gama::Scalar soft = gama::geoalign_softmin(semb, temb, k, tau);
  std::cout << "geoalign: " << score << "\n"
            << "geoalign softmin (tau=" << tau << "): " << soft << "\n";
  if (!out.empty()) {
    Json j;
    j["geoalign"] = score;
    j["geoalign_softmin"] = soft;
    j["k"] = k;
    j["tau"] = tau;
    std::ofstream f(out);
    if (!f) throw gama::DataError("cannot open " + out);
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_ablate(const CommonOverrides& o, const std::string& drop_arg,
               int num_seeds, bool include_baseline, std::string out_dir) {
  const ExperimentConfig cfg = load_config(o);
  std::vector<std::string> drops;
  std::string token;
  std::istringstream in(drop_arg);
  while (std::getline(in, token, ',')) {
    if (!token.empty()) drops.push_back(token);
  }
  if (out_dir.empty()) out_dir = cfg.resolved_output_dir();
  const gama::AblationReport report =
      gama::run_ablate(cfg, drops, num_seeds, include_baseline, out_dir);
  std::cout << "variant,target_accuracy_mean,robust_accuracy_mean,geoalign_mean\n";
  for (const auto& v : report.variants) {
    std::cout << v << ','
              << report.mean(v, &gama::AblationRow::target_accuracy) << ','
              << report.mean(v, &gama::AblationRow::robust_accuracy) << ','
              << report.mean(v, &gama::AblationRow::geoalign) << "\n";
  }
  std::cout << "reports under: " << out_dir << "\n";
  return kExitOk;
}

int cmd_gen_data(const std::string& generator, int n, double noise,
                 double rotation_deg, double tx, double ty, double stretch,
                 long seed, const std::string& out) {
  gama::DatasetBundle bundle;
  if (generator == "two_moons") {
    gama::Vector translation(2);
    translation << tx, ty;
    bundle = gama::gen_two_moons_shift(n, noise, rotation_deg, translation,
                                       static_cast<std::uint64_t>(seed));
  } else if (generator == "swiss_roll") {
    bundle = gama::gen_swiss_roll_shift(n, noise, stretch,
                                        static_cast<std::uint64_t>(seed));
  } else {
    throw gama::ConfigError(
        "gen-data: generator must be 'two_moons' or 'swiss_roll'");
  }
  gama::save_csv(out, bundle);
  std::cout << "wrote " << out << " and " << out << ".meta.json\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GAMA: geometry-aware manifold alignment for domain adaptation"};
  app.require_subcommand(1);

  CommonOverrides common;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", common.config_path, "experiment config (json)")
      ->required();
  train->add_option("--seed", common.seed, "override train.seed");
  train->add_option("--epochs", common.epochs, "override train.epochs");
  train->add_option("--output-dir", common.output_dir, "override output_dir");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string checkpoint;
  double epsilon = -1.0;
  int steps = -1;
  double step_size = -1.0;
  std::string eval_out;
  eval->add_option("--config", common.config_path, "experiment config (json)")
      ->required();
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--epsilon", epsilon, "override attack.epsilon");
  eval->add_option("--steps", steps, "override attack.steps");
  eval->add_option("--step-size", step_size, "override attack.step_size");
  eval->add_option("--out", eval_out, "metrics report path");
  eval->add_option("--seed", common.seed, "override train.seed");
  eval->add_option("--output-dir", common.output_dir, "override output_dir");

  auto* geo = app.add_subcommand("geoalign", "geodesic alignment score");
  std::string source_csv, target_csv, geo_out;
  int geo_k = 10;
  double geo_tau = 0.1;
  geo->add_option("--config", common.config_path, "experiment config (json)");
  geo->add_option("--checkpoint", checkpoint, "checkpoint file");
  geo->add_option("--source-csv", source_csv, "raw source embedding csv");
  geo->add_option("--target-csv", target_csv, "raw target embedding csv");
  geo->add_option("--k", geo_k, "neighbors for the joint graph");
  geo->add_option("--tau", geo_tau, "softmin temperature for the diagnostic");
  geo->add_option("--out", geo_out, "score json path");

  auto* ablate = app.add_subcommand("ablate", "component ablation grid");
  std::string drop_arg = "geom,on,off";
  int num_seeds = 5;
  bool include_baseline = false;
  std::string ablate_out;
  ablate->add_option("--config", common.config_path, "experiment config (json)")
      ->required();
  ablate->add_option("--drop", drop_arg,
                     "comma-separated subset of {geom,on,off}");
  ablate->add_option("--seeds", num_seeds, "number of shared seeds");
  ablate->add_flag("--include-baseline", include_baseline,
                   "also run a source-only baseline");
  ablate->add_option("--out-dir", ablate_out, "report directory");
  ablate->add_option("--seed", common.seed, "override base seed");

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset csv");
  std::string generator = "two_moons";
  int n = 500;
  double noise = 0.1;
  double rotation_deg = 0.0;
  double tx = 0.0, ty = 0.0;
  double stretch = 1.0;
  long gseed = 0;
  std::string gen_out;
  gen->add_option("--generator", generator, "two_moons or swiss_roll");
  gen->add_option("--n", n, "samples per domain");
  gen->add_option("--noise", noise, "noise standard deviation");
  gen->add_option("--rotation-deg", rotation_deg, "target rotation (two_moons)");
  gen->add_option("--tx", tx, "target translation x (two_moons)");
  gen->add_option("--ty", ty, "target translation y (two_moons)");
  gen->add_option("--stretch", stretch, "target axis stretch (swiss_roll)");
  gen->add_option("--seed", gseed, "generator seed");
  gen->add_option("--out", gen_out, "output csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(common);
    if (eval->parsed()) {
      return cmd_eval(common, checkpoint, epsilon, steps, step_size, eval_out);
    }
    if (geo->parsed()) {
      return cmd_geoalign(common, checkpoint, source_csv, target_csv, geo_k,
                          geo_tau, geo_out);
    }
    if (ablate->parsed()) {
      return cmd_ablate(common, drop_arg, num_seeds, include_baseline,
                        ablate_out);
    }
    if (gen->parsed()) {
      return cmd_gen_data(generator, n, noise, rotation_deg, tx, ty, stretch,
                          gseed, gen_out);
    }
  } catch (const gama::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gama::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gama::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gama::GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gama::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const gama::TrainingError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
