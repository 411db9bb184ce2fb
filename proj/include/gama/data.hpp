#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gama/types.hpp"

namespace gama {

enum class Domain { kSource, kTarget };

/// One split of a dataset: features by row plus optional integer labels.
struct Split {
  Matrix x;
  std::vector<std::optional<int>> labels;

  Index size() const { return x.rows(); }
  Index dim() const { return x.cols(); }
  bool fully_labeled() const;
  bool any_labeled() const;
  std::vector<int> required_labels() const;  // throws DataError on a gap
};

struct GeneratorMeta {
  std::string name;
  std::vector<std::pair<std::string, Scalar>> params;
  std::uint64_t seed = 0;
};

/// Source train plus target train/test splits. Target-test labels are read
/// through an access-counting method so UDA runs can prove they never looked
/// before final evaluation.
struct DatasetBundle {
  Split source_train;
  Split target_train;
  Split target_test;
  GeneratorMeta meta;

  int num_classes() const;
  Index dim() const { return source_train.dim(); }

  /// Counted label read; the only sanctioned path to target-test labels.
  int target_test_label(Index i) const;
  long label_reads() const { return label_reads_; }
  void reset_label_reads() const { label_reads_ = 0; }

  /// True when any target-train sample carries a label (few-shot protocol).
  bool is_fsda() const { return target_train.any_labeled(); }

  /// UDA protocol: strip every target-train label.
  void drop_target_train_labels();

  /// FSDA protocol: keep exactly k labeled target-train samples per class,
  /// chosen by seeded shuffle; the rest of the pool becomes unlabeled.
  void keep_k_shot(int k_per_class, std::uint64_t seed);

  void validate() const;

 private:
  mutable long label_reads_ = 0;
};

/// Two 2-D moons, one per class, deterministic base points plus seeded
/// Gaussian noise. The target domain draws its own noise stream and is then
/// rotated about the origin and translated.
DatasetBundle gen_two_moons_shift(int n_per_domain, Scalar noise,
                                  Scalar rotation_deg, const Vector& translation,
                                  std::uint64_t seed);

/// 3-D swiss roll with classes by arc-length quartile. The target domain
/// scales coordinate 0 by `stretch` after noise, changing the geometry.
DatasetBundle gen_swiss_roll_shift(int n_per_domain, Scalar noise, Scalar stretch,
                                   std::uint64_t seed);

/// Column layout and split policy for CSV ingestion. Feature columns default
/// to every header cell named f<k>, in file order.
struct CsvSchema {
  std::vector<std::string> feature_columns;
  std::string label_column = "label";
  std::string domain_column = "domain";
  Scalar target_test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  bool drop_target_train_labels = true;
};

DatasetBundle load_csv(const std::string& path, const CsvSchema& schema);

/// One row per sample (f0..f{d-1},label,domain), full-precision features,
/// empty label cells for unlabeled samples. Also writes a <path>.meta.json
/// sidecar with generator name, parameters, seed, and split sizes.
void save_csv(const std::string& path, const DatasetBundle& bundle);

/// Plain numeric matrix from a CSV with a header row (embedding files).
Matrix load_matrix_csv(const std::string& path);

}  // namespace gama
