#include "gama/data.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "gama/errors.hpp"
#include "gama/geometry.hpp"
#include "gama/trainer.hpp"

using namespace gama;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<Vector> sorted_rows(const Matrix& m) {
  std::vector<Vector> rows;
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
  std::sort(rows.begin(), rows.end(), [](const Vector& a, const Vector& b) {
    for (Index i = 0; i < a.size(); ++i) {
      if (a(i) != b(i)) return a(i) < b(i);
    }
    return false;
  });
  return rows;
}

}  // namespace

TEST(TwoMoons, ExactClassBalance) {
  const DatasetBundle bundle =
      gen_two_moons_shift(200, 0.1, 0.0, Vector::Zero(2), 1);
  long count0 = 0, count1 = 0;
  for (const auto& l : bundle.source_train.labels) {
    (*l == 0 ? count0 : count1) += 1;
  }
  EXPECT_EQ(count0, 100);
  EXPECT_EQ(count1, 100);
  EXPECT_EQ(bundle.target_train.size() + bundle.target_test.size(), 200);
  EXPECT_EQ(bundle.target_test.size(), 40);  // 20% of the target domain
}

TEST(TwoMoons, DeterministicUnderSeed) {
  const DatasetBundle a = gen_two_moons_shift(60, 0.05, 20.0, Vector::Zero(2), 9);
  const DatasetBundle b = gen_two_moons_shift(60, 0.05, 20.0, Vector::Zero(2), 9);
  EXPECT_EQ(a.source_train.x, b.source_train.x);
  EXPECT_EQ(a.target_train.x, b.target_train.x);
  EXPECT_EQ(a.target_test.x, b.target_test.x);
  const DatasetBundle c = gen_two_moons_shift(60, 0.05, 20.0, Vector::Zero(2), 10);
  EXPECT_NE(a.source_train.x, c.source_train.x);
}

TEST(TwoMoons, HalfTurnNegatesCoordinates) {
  const DatasetBundle base =
      gen_two_moons_shift(40, 0.1, 0.0, Vector::Zero(2), 4);
  const DatasetBundle turned =
      gen_two_moons_shift(40, 0.1, 180.0, Vector::Zero(2), 4);
  ASSERT_EQ(base.target_train.size(), turned.target_train.size());
  for (Index i = 0; i < base.target_train.size(); ++i) {
    EXPECT_NEAR(turned.target_train.x(i, 0), -base.target_train.x(i, 0), 1e-12);
    EXPECT_NEAR(turned.target_train.x(i, 1), -base.target_train.x(i, 1), 1e-12);
  }
}

TEST(TwoMoons, TranslationApplied) {
  Vector t(2);
  t << 3.0, -1.0;
  const DatasetBundle base = gen_two_moons_shift(40, 0.1, 0.0, Vector::Zero(2), 4);
  const DatasetBundle moved = gen_two_moons_shift(40, 0.1, 0.0, t, 4);
  for (Index i = 0; i < base.target_train.size(); ++i) {
    EXPECT_DOUBLE_EQ(moved.target_train.x(i, 0), base.target_train.x(i, 0) + 3.0);
    EXPECT_DOUBLE_EQ(moved.target_train.x(i, 1), base.target_train.x(i, 1) - 1.0);
  }
}

TEST(TwoMoons, UdaProtocolStripsTrainLabels) {
  DatasetBundle bundle = gen_two_moons_shift(40, 0.1, 30.0, Vector::Zero(2), 4);
  EXPECT_TRUE(bundle.is_fsda());  // generators keep ground truth
  bundle.drop_target_train_labels();
  EXPECT_FALSE(bundle.is_fsda());
  EXPECT_TRUE(bundle.target_test.fully_labeled());
}

TEST(SwissRoll, StretchDoublesCoordinateExactly) {
  const DatasetBundle base = gen_swiss_roll_shift(60, 0.05, 1.0, 11);
  const DatasetBundle stretched = gen_swiss_roll_shift(60, 0.05, 2.0, 11);
  for (Index i = 0; i < base.target_train.size(); ++i) {
    EXPECT_DOUBLE_EQ(stretched.target_train.x(i, 0),
                     2.0 * base.target_train.x(i, 0));
    EXPECT_DOUBLE_EQ(stretched.target_train.x(i, 1), base.target_train.x(i, 1));
    EXPECT_DOUBLE_EQ(stretched.target_train.x(i, 2), base.target_train.x(i, 2));
  }
}

TEST(SwissRoll, FourArcLengthClasses) {
  const DatasetBundle bundle = gen_swiss_roll_shift(400, 0.0, 1.0, 3);
  std::set<int> seen;
  for (const auto& l : bundle.source_train.labels) {
    ASSERT_TRUE(l.has_value());
    EXPECT_GE(*l, 0);
    EXPECT_LE(*l, 3);
    seen.insert(*l);
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(SwissRoll, NoiselessRollHasPlanarTangentFrames) {
  const DatasetBundle bundle = gen_swiss_roll_shift(600, 0.0, 1.0, 5);
  const auto set = PointSet::from_matrix(bundle.source_train.x);
  const KnnGraph graph = build_knn_graph(set, 10, false);
  Scalar worst = 1.0;
  for (int idx : {0, 50, 100, 250, 400, 599}) {
    const TangentFrame frame =
        estimate_tangent(set, graph, idx, TangentDim::fixed(2));
    worst = std::min(worst, frame.explained_variance);
  }
  EXPECT_GE(worst, 0.99);
}

TEST(KShot, ExactCountsAndPoolRemoval) {
  DatasetBundle bundle = gen_two_moons_shift(200, 0.1, 30.0, Vector::Zero(2), 6);
  bundle.keep_k_shot(5, 6);
  std::vector<long> labeled_per_class(2, 0);
  long unlabeled = 0;
  for (const auto& l : bundle.target_train.labels) {
    if (l) {
      ++labeled_per_class[static_cast<std::size_t>(*l)];
    } else {
      ++unlabeled;
    }
  }
  EXPECT_EQ(labeled_per_class[0], 5);
  EXPECT_EQ(labeled_per_class[1], 5);
  EXPECT_EQ(unlabeled, bundle.target_train.size() - 10);

  DatasetBundle again = gen_two_moons_shift(200, 0.1, 30.0, Vector::Zero(2), 6);
  again.keep_k_shot(5, 6);
  for (std::size_t i = 0; i < again.target_train.labels.size(); ++i) {
    EXPECT_EQ(again.target_train.labels[i].has_value(),
              bundle.target_train.labels[i].has_value());
  }
}

TEST(LabelCounter, CountsTargetTestReads) {
  const DatasetBundle bundle =
      gen_two_moons_shift(40, 0.1, 0.0, Vector::Zero(2), 8);
  EXPECT_EQ(bundle.label_reads(), 0);
  bundle.target_test_label(0);
  bundle.target_test_label(1);
  EXPECT_EQ(bundle.label_reads(), 2);
  bundle.reset_label_reads();
  EXPECT_EQ(bundle.label_reads(), 0);
}

TEST(Csv, RoundTripPreservesFeaturesExactly) {
  DatasetBundle bundle = gen_two_moons_shift(60, 0.1, 45.0, Vector::Zero(2), 12);
  const std::string path = temp_path("gama_roundtrip.csv");
  save_csv(path, bundle);

  CsvSchema schema;
  schema.drop_target_train_labels = false;
  const DatasetBundle loaded = load_csv(path, schema);

  // Source rows keep their order; the target split is re-drawn, so compare
  // the domain as a whole.
  EXPECT_EQ(loaded.source_train.x, bundle.source_train.x);

  Matrix target_before(bundle.target_train.size() + bundle.target_test.size(), 2);
  target_before.topRows(bundle.target_train.size()) = bundle.target_train.x;
  target_before.bottomRows(bundle.target_test.size()) = bundle.target_test.x;
  Matrix target_after(loaded.target_train.size() + loaded.target_test.size(), 2);
  target_after.topRows(loaded.target_train.size()) = loaded.target_train.x;
  target_after.bottomRows(loaded.target_test.size()) = loaded.target_test.x;

  const auto before = sorted_rows(target_before);
  const auto after = sorted_rows(target_after);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i], after[i]);
  }
  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
}

TEST(Csv, SidecarMetadataWritten) {
  DatasetBundle bundle = gen_two_moons_shift(40, 0.1, 0.0, Vector::Zero(2), 3);
  const std::string path = temp_path("gama_sidecar.csv");
  save_csv(path, bundle);
  std::ifstream meta(path + ".meta.json");
  ASSERT_TRUE(meta.good());
  std::string contents((std::istreambuf_iterator<char>(meta)),
                       std::istreambuf_iterator<char>());
  EXPECT_NE(contents.find("two_moons_shift"), std::string::npos);
  EXPECT_NE(contents.find("split_sizes"), std::string::npos);
  std::remove(path.c_str());
  std::remove((path + ".meta.json").c_str());
}

TEST(Csv, NanFeatureNamesRow) {
  const std::string path = temp_path("gama_nan.csv");
  {
    std::ofstream out(path);
    out << "f0,f1,label,domain\n";
    out << "0.0,1.0,0,source\n";
    out << "nan,1.0,1,source\n";
    out << "0.5,0.5,0,target\n";
  }
  CsvSchema schema;
  try {
    load_csv(path, schema);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos);
  }
  std::remove(path.c_str());
}

TEST(Csv, MissingColumnNamed) {
  const std::string path = temp_path("gama_missing.csv");
  {
    std::ofstream out(path);
    out << "f0,f1,label\n";
    out << "0.0,1.0,0\n";
  }
  CsvSchema schema;
  try {
    load_csv(path, schema);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("domain"), std::string::npos);
  }
  std::remove(path.c_str());
}

TEST(Csv, MissingFileNamesPath) {
  CsvSchema schema;
  try {
    load_csv("/nonexistent/gama_data.csv", schema);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/gama_data.csv"),
              std::string::npos);
  }
}

TEST(Csv, HighDimensionalManyClassShape) {
  // Office-Home-like shape at reduced n: 65 classes, 2048-dim embeddings.
  const int classes = 65;
  const int d = 2048;
  const std::string path = temp_path("gama_wide.csv");
  {
    std::ofstream out(path);
    for (int c = 0; c < d; ++c) out << 'f' << c << ',';
    out << "label,domain\n";
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<Scalar> uni(-1.0, 1.0);
    const auto emit = [&](int label, const char* domain) {
      for (int c = 0; c < d; ++c) out << uni(rng) << ',';
      out << label << ',' << domain << '\n';
    };
    for (int c = 0; c < classes; ++c) {
      emit(c, "source");
      emit(c, "target");
      emit(c, "target");
    }
  }
  CsvSchema schema;
  schema.drop_target_train_labels = false;
  DatasetBundle bundle = load_csv(path, schema);
  EXPECT_EQ(bundle.dim(), d);
  EXPECT_EQ(bundle.num_classes(), classes);
  EXPECT_EQ(bundle.source_train.size(), classes);

  // One epoch of training must run at this width without error.
  bundle.drop_target_train_labels();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size_source = 16;
  cfg.batch_size_target = 16;
  cfg.hidden = {32, 16};
  cfg.knn_k = 5;
  cfg.source_val_fraction = 0.0;
  const auto [state, report] = fit(bundle, cfg);
  EXPECT_GT(state.history.size(), 0u);
  EXPECT_TRUE(state.params.all_finite());
  std::remove(path.c_str());
}

TEST(MatrixCsv, LoadsPlainNumericTable) {
  const std::string path = temp_path("gama_matrix.csv");
  {
    std::ofstream out(path);
    out << "f0,f1\n1.5,2.5\n-3.0,4.0\n";
  }
  const Matrix m = load_matrix_csv(path);
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(m(1, 1), 4.0);
  std::remove(path.c_str());
}
