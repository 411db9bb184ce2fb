#include "gama/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gama/errors.hpp"

namespace gama {

namespace {

constexpr Scalar kPi = 3.14159265358979323846;

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

std::string fmt_value(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Seeded shuffle split: returns (train_rows, test_rows), each in ascending
/// row order so file order is preserved within a split.
std::pair<std::vector<Index>, std::vector<Index>> split_rows(
    Index n, Scalar test_fraction, std::mt19937_64& rng) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<Scalar>(n)));
  std::vector<Index> test(order.begin(),
                          order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<Index> train(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                           order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(test)};
}

Split take_rows(const Matrix& x, const std::vector<std::optional<int>>& labels,
                const std::vector<Index>& rows) {
  Split s;
  s.x = Matrix(static_cast<Index>(rows.size()), x.cols());
  s.labels.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.x.row(static_cast<Index>(r)) = x.row(rows[r]);
    s.labels.push_back(labels[static_cast<std::size_t>(rows[r])]);
  }
  return s;
}

/// Arc length of the spiral (t cos t, t sin t) from 0 to t.
Scalar spiral_arc_length(Scalar t) {
  return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

}  // namespace

bool Split::fully_labeled() const {
  return std::all_of(labels.begin(), labels.end(),
                     [](const auto& l) { return l.has_value(); });
}

bool Split::any_labeled() const {
  return std::any_of(labels.begin(), labels.end(),
                     [](const auto& l) { return l.has_value(); });
}

std::vector<int> Split::required_labels() const {
  std::vector<int> out;
  out.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) {
      throw DataError("split: missing label at row " + std::to_string(i));
    }
    out.push_back(*labels[i]);
  }
  return out;
}

int DatasetBundle::num_classes() const {
  int hi = -1;
  const auto scan = [&hi](const Split& s) {
    for (const auto& l : s.labels) {
      if (l) hi = std::max(hi, *l);
    }
  };
  scan(source_train);
  scan(target_train);
  scan(target_test);
  return hi + 1;
}

int DatasetBundle::target_test_label(Index i) const {
  if (i < 0 || i >= target_test.size()) {
    throw ParameterError("target_test_label: index out of range");
  }
  const auto& l = target_test.labels[static_cast<std::size_t>(i)];
  if (!l) {
    throw DataError("target_test_label: unlabeled test sample");
  }
  ++label_reads_;
  return *l;
}

void DatasetBundle::drop_target_train_labels() {
  for (auto& l : target_train.labels) l.reset();
}

void DatasetBundle::keep_k_shot(int k_per_class, std::uint64_t seed) {
  if (k_per_class < 1) {
    throw ParameterError("keep_k_shot: k must be positive");
  }
  if (!target_train.fully_labeled()) {
    throw DataError("keep_k_shot: target train pool must be labeled");
  }
  const int classes = num_classes();
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(classes));
  for (Index i = 0; i < target_train.size(); ++i) {
    by_class[static_cast<std::size_t>(*target_train.labels[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  auto rng = substream(seed, 3);
  std::vector<bool> keep(static_cast<std::size_t>(target_train.size()), false);
  for (auto& rows : by_class) {
    if (static_cast<int>(rows.size()) < k_per_class) {
      throw DataError("keep_k_shot: class has fewer than k samples");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    for (int j = 0; j < k_per_class; ++j) {
      keep[static_cast<std::size_t>(rows[static_cast<std::size_t>(j)])] = true;
    }
  }
  for (Index i = 0; i < target_train.size(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) {
      target_train.labels[static_cast<std::size_t>(i)].reset();
    }
  }
}

void DatasetBundle::validate() const {
  if (source_train.size() < 1 || target_train.size() < 1 ||
      target_test.size() < 1) {
    throw DataError("bundle: every split needs at least one sample");
  }
  if (source_train.dim() != target_train.dim() ||
      source_train.dim() != target_test.dim()) {
    throw DataError("bundle: inconsistent feature dimensions");
  }
  if (!source_train.x.allFinite() || !target_train.x.allFinite() ||
      !target_test.x.allFinite()) {
    throw DataError("bundle: non-finite feature");
  }
  if (!source_train.fully_labeled()) {
    throw DataError("bundle: source samples must carry labels");
  }
  if (!target_test.fully_labeled()) {
    throw DataError("bundle: target test samples must carry labels");
  }
}

DatasetBundle gen_two_moons_shift(int n_per_domain, Scalar noise,
                                  Scalar rotation_deg, const Vector& translation,
                                  std::uint64_t seed) {
  if (n_per_domain < 10) {
    throw ParameterError("gen_two_moons_shift: need n_per_domain >= 10");
  }
  if (translation.size() != 2) {
    throw ParameterError("gen_two_moons_shift: translation must be 2-D");
  }

  const auto make_domain = [&](std::mt19937_64& rng) {
    const int n0 = n_per_domain / 2 + n_per_domain % 2;
    const int n1 = n_per_domain / 2;
    Matrix x(n_per_domain, 2);
    std::vector<std::optional<int>> labels(
        static_cast<std::size_t>(n_per_domain));
    std::normal_distribution<Scalar> gauss(0.0, 1.0);
    // Deterministic base points on each moon, seeded noise on top.
    for (int i = 0; i < n0; ++i) {
      const Scalar t = kPi * static_cast<Scalar>(i) /
                       static_cast<Scalar>(std::max(n0 - 1, 1));
      x(i, 0) = std::cos(t) + noise * gauss(rng);
      x(i, 1) = std::sin(t) + noise * gauss(rng);
      labels[static_cast<std::size_t>(i)] = 0;
    }
    for (int i = 0; i < n1; ++i) {
      const Scalar t = kPi * static_cast<Scalar>(i) /
                       static_cast<Scalar>(std::max(n1 - 1, 1));
      x(n0 + i, 0) = 1.0 - std::cos(t) + noise * gauss(rng);
      x(n0 + i, 1) = 0.5 - std::sin(t) + noise * gauss(rng);
      labels[static_cast<std::size_t>(n0 + i)] = 1;
    }
    return std::make_pair(std::move(x), std::move(labels));
  };

  auto rng_source = substream(seed, 0);
  auto [sx, slabels] = make_domain(rng_source);

  auto rng_target = substream(seed, 1);
  auto [tx, tlabels] = make_domain(rng_target);
  const Scalar theta = rotation_deg * kPi / 180.0;
  const Scalar c = std::cos(theta);
  const Scalar s = std::sin(theta);
  for (Index i = 0; i < tx.rows(); ++i) {
    const Scalar px = tx(i, 0);
    const Scalar py = tx(i, 1);
    tx(i, 0) = c * px - s * py + translation(0);
    tx(i, 1) = s * px + c * py + translation(1);
  }

  auto rng_split = substream(seed, 2);
  auto [train_rows, test_rows] = split_rows(tx.rows(), 0.2, rng_split);

  DatasetBundle bundle;
  bundle.source_train.x = std::move(sx);
  bundle.source_train.labels = std::move(slabels);
  bundle.target_train = take_rows(tx, tlabels, train_rows);
  bundle.target_test = take_rows(tx, tlabels, test_rows);
  bundle.meta.name = "two_moons_shift";
  bundle.meta.seed = seed;
  bundle.meta.params = {{"n_per_domain", static_cast<Scalar>(n_per_domain)},
                        {"noise", noise},
                        {"rotation_deg", rotation_deg},
                        {"translation_x", translation(0)},
                        {"translation_y", translation(1)}};
  bundle.validate();
  return bundle;
}

DatasetBundle gen_swiss_roll_shift(int n_per_domain, Scalar noise, Scalar stretch,
                                   std::uint64_t seed) {
  if (n_per_domain < 10) {
    throw ParameterError("gen_swiss_roll_shift: need n_per_domain >= 10");
  }
  const Scalar t_lo = 1.5 * kPi;
  const Scalar t_hi = 4.5 * kPi;
  const Scalar s_lo = spiral_arc_length(t_lo);
  const Scalar s_hi = spiral_arc_length(t_hi);

  const auto make_domain = [&](std::mt19937_64& rng) {
    Matrix x(n_per_domain, 3);
    std::vector<std::optional<int>> labels(
        static_cast<std::size_t>(n_per_domain));
    std::uniform_real_distribution<Scalar> uni(0.0, 1.0);
    std::normal_distribution<Scalar> gauss(0.0, 1.0);
    for (int i = 0; i < n_per_domain; ++i) {
      const Scalar t = t_lo + (t_hi - t_lo) * uni(rng);
      const Scalar h = 21.0 * uni(rng);
      x(i, 0) = t * std::cos(t) + noise * gauss(rng);
      x(i, 1) = h + noise * gauss(rng);
      x(i, 2) = t * std::sin(t) + noise * gauss(rng);
      const Scalar frac = (spiral_arc_length(t) - s_lo) / (s_hi - s_lo);
      labels[static_cast<std::size_t>(i)] =
          std::min(3, static_cast<int>(frac * 4.0));
    }
    return std::make_pair(std::move(x), std::move(labels));
  };

  auto rng_source = substream(seed, 0);
  auto [sx, slabels] = make_domain(rng_source);

  auto rng_target = substream(seed, 1);
  auto [tx, tlabels] = make_domain(rng_target);
  tx.col(0) *= stretch;

  auto rng_split = substream(seed, 2);
  auto [train_rows, test_rows] = split_rows(tx.rows(), 0.2, rng_split);

  DatasetBundle bundle;
  bundle.source_train.x = std::move(sx);
  bundle.source_train.labels = std::move(slabels);
  bundle.target_train = take_rows(tx, tlabels, train_rows);
  bundle.target_test = take_rows(tx, tlabels, test_rows);
  bundle.meta.name = "swiss_roll_shift";
  bundle.meta.seed = seed;
  bundle.meta.params = {{"n_per_domain", static_cast<Scalar>(n_per_domain)},
                        {"noise", noise},
                        {"stretch", stretch}};
  bundle.validate();
  return bundle;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Scalar parse_feature(const std::string& cell, std::size_t row) {
  std::size_t consumed = 0;
  Scalar v = 0.0;
  try {
    v = std::stod(cell, &consumed);
  } catch (const std::exception&) {
    throw DataError("csv: non-numeric feature at row " + std::to_string(row));
  }
  if (consumed != cell.size() || !std::isfinite(v)) {
    throw DataError("csv: non-numeric feature at row " + std::to_string(row));
  }
  return v;
}

}  // namespace

DatasetBundle load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("load_csv: empty file " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  std::vector<std::string> feature_cols = schema.feature_columns;
  if (feature_cols.empty()) {
    for (const auto& name : header) {
      if (name.rfind('f', 0) == 0 && name.size() > 1 &&
          std::all_of(name.begin() + 1, name.end(),
                      [](char ch) { return std::isdigit(ch) != 0; })) {
        feature_cols.push_back(name);
      }
    }
    if (feature_cols.empty()) {
      throw DataError("load_csv: no feature columns (f0..fk) in header");
    }
  }

  const auto col_index = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("load_csv: missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> fidx;
  fidx.reserve(feature_cols.size());
  for (const auto& name : feature_cols) fidx.push_back(col_index(name));
  const std::size_t lidx = col_index(schema.label_column);
  const std::size_t didx = col_index(schema.domain_column);

  std::vector<Vector> rows;
  std::vector<std::optional<int>> labels;
  std::vector<Domain> domains;
  std::size_t rownum = 1;
  while (std::getline(in, line)) {
    ++rownum;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw DataError("csv: row " + std::to_string(rownum) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    Vector x(static_cast<Index>(fidx.size()));
    for (std::size_t c = 0; c < fidx.size(); ++c) {
      x(static_cast<Index>(c)) = parse_feature(cells[fidx[c]], rownum);
    }
    rows.push_back(std::move(x));

    const std::string& lcell = cells[lidx];
    if (lcell.empty()) {
      labels.emplace_back(std::nullopt);
    } else {
      try {
        const int y = std::stoi(lcell);
        if (y < 0) throw std::out_of_range("negative");
        labels.emplace_back(y);
      } catch (const std::exception&) {
        throw DataError("csv: bad label at row " + std::to_string(rownum));
      }
    }

    const std::string& dcell = cells[didx];
    if (dcell == "source") {
      domains.push_back(Domain::kSource);
    } else if (dcell == "target") {
      domains.push_back(Domain::kTarget);
    } else {
      throw DataError("csv: bad domain '" + dcell + "' at row " +
                      std::to_string(rownum));
    }
  }
  if (rows.empty()) {
    throw DataError("load_csv: no data rows in " + path);
  }

  const Index d = rows.front().size();
  std::vector<Index> source_rows, target_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    (domains[i] == Domain::kSource ? source_rows : target_rows)
        .push_back(static_cast<Index>(i));
  }
  if (source_rows.empty() || target_rows.empty()) {
    throw DataError("load_csv: need both source and target rows");
  }

  Matrix all(static_cast<Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    all.row(static_cast<Index>(i)) = rows[i];
  }

  DatasetBundle bundle;
  bundle.source_train = take_rows(all, labels, source_rows);

  Matrix tx(static_cast<Index>(target_rows.size()), d);
  std::vector<std::optional<int>> tlabels;
  tlabels.reserve(target_rows.size());
  for (std::size_t i = 0; i < target_rows.size(); ++i) {
    tx.row(static_cast<Index>(i)) = all.row(target_rows[i]);
    tlabels.push_back(labels[static_cast<std::size_t>(target_rows[i])]);
  }
  auto rng_split = substream(schema.split_seed, 2);
  auto [train_rows, test_rows] =
      split_rows(tx.rows(), schema.target_test_fraction, rng_split);
  bundle.target_train = take_rows(tx, tlabels, train_rows);
  bundle.target_test = take_rows(tx, tlabels, test_rows);
  if (schema.drop_target_train_labels) {
    bundle.drop_target_train_labels();
  }
  bundle.meta.name = "csv";
  bundle.meta.seed = schema.split_seed;
  bundle.validate();
  return bundle;
}

void save_csv(const std::string& path, const DatasetBundle& bundle) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("save_csv: cannot open " + path);
  }
  const Index d = bundle.dim();
  for (Index c = 0; c < d; ++c) {
    out << 'f' << c << ',';
  }
  out << "label,domain\n";

  const auto write_split = [&](const Split& s, const char* domain) {
    for (Index i = 0; i < s.size(); ++i) {
      for (Index c = 0; c < d; ++c) {
        out << fmt_value(s.x(i, c)) << ',';
      }
      const auto& l = s.labels[static_cast<std::size_t>(i)];
      if (l) out << *l;
      out << ',' << domain << '\n';
    }
  };
  write_split(bundle.source_train, "source");
  write_split(bundle.target_train, "target");
  write_split(bundle.target_test, "target");
  if (!out) {
    throw DataError("save_csv: write failed for " + path);
  }

  nlohmann::ordered_json meta;
  meta["generator"] = bundle.meta.name;
  meta["seed"] = bundle.meta.seed;
  nlohmann::ordered_json params;
  for (const auto& [key, value] : bundle.meta.params) {
    params[key] = value;
  }
  meta["params"] = params;
  meta["split_sizes"] = {{"source_train", bundle.source_train.size()},
                         {"target_train", bundle.target_train.size()},
                         {"target_test", bundle.target_test.size()}};
  std::ofstream mout(path + ".meta.json");
  if (!mout) {
    throw DataError("save_csv: cannot open " + path + ".meta.json");
  }
  mout << meta.dump(2) << '\n';
}

Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("load_matrix_csv: cannot open " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("load_matrix_csv: empty file " + path);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t cols = split_line(line).size();

  std::vector<Vector> rows;
  std::size_t rownum = 1;
  while (std::getline(in, line)) {
    ++rownum;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != cols) {
      throw DataError("load_matrix_csv: ragged row " + std::to_string(rownum));
    }
    Vector v(static_cast<Index>(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      v(static_cast<Index>(c)) = parse_feature(cells[c], rownum);
    }
    rows.push_back(std::move(v));
  }
  if (rows.empty()) {
    throw DataError("load_matrix_csv: no data rows in " + path);
  }
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Index>(i)) = rows[i];
  }
  return m;
}

}  // namespace gama
