#include "slad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slad/error.hpp"
#include "slad/rng.hpp"

namespace slad {

namespace {

constexpr std::uint64_t kSplitTag = 0x5350u;
constexpr std::uint64_t kContaminateTag = 0x434fu;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  s = s.substr(first, last - first + 1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
      cell.push_back(ch);
    } else if (ch == ',' && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void Dataset::validate() const {
  if (labels && labels->size() != features.rows()) {
    throw InvalidInput("label count " + std::to_string(labels->size()) + " != row count " +
                       std::to_string(features.rows()));
  }
  if (labels) {
    for (int l : *labels) {
      if (l != 0 && l != 1) throw InvalidInput("labels must be 0 or 1");
    }
  }
  if (!feature_names.empty() && feature_names.size() != features.cols()) {
    throw InvalidInput("feature name count does not match column count");
  }
  if (!features.all_finite()) throw InvalidInput("features contain non-finite values");
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features = Matrix(rows.size(), dims());
  out.feature_names = feature_names;
  if (labels) out.labels.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw InvalidInput("row index " + std::to_string(rows[i]) + " out of range");
    std::ranges::copy(features.row(rows[i]), out.features.row(i).begin());
    if (labels) out.labels->push_back((*labels)[rows[i]]);
  }
  return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw IngestionError("'" + path.string() + "' has no header row");

  std::optional<std::size_t> label_pos;
  if (label_column) {
    auto it = std::find(header.begin(), header.end(), *label_column);
    if (it == header.end()) {
      throw IngestionError("'" + path.string() + "': label column '" + *label_column +
                           "' not found in header (row " + std::to_string(line_no) + ")");
    }
    label_pos = static_cast<std::size_t>(it - header.begin());
  }

  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_pos) data.feature_names.push_back(header[c]);
  }
  const std::size_t d = data.feature_names.size();
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw IngestionError("'" + path.string() + "' row " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " cells, found " +
                           std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        throw IngestionError("'" + path.string() + "' row " + std::to_string(line_no) + ", column " +
                             std::to_string(c + 1) + " ('" + header[c] + "'): cannot parse '" +
                             cells[c] + "' as a finite number");
      }
      if (c == label_pos) {
        if (v != 0.0 && v != 1.0) {
          throw IngestionError("'" + path.string() + "' row " + std::to_string(line_no) +
                               ", column " + std::to_string(c + 1) + ": label must be 0 or 1, got '" +
                               cells[c] + "'");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
    }
    ++n;
  }
  data.features = Matrix(n, d, std::move(values));
  if (label_pos) data.labels = std::move(labels);
  return data;
}

void write_csv(const std::filesystem::path& path, const Dataset& data, const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out.precision(17);
  for (std::size_t c = 0; c < data.dims(); ++c) {
    if (c) out << ',';
    out << (c < data.feature_names.size() ? data.feature_names[c] : "f" + std::to_string(c));
  }
  if (data.labels) out << ',' << label_column;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t c = 0; c < data.dims(); ++c) {
      if (c) out << ',';
      out << data.features(i, c);
    }
    if (data.labels) out << ',' << (*data.labels)[i];
    out << '\n';
  }
}

Standardizer Standardizer::fit(const Matrix& train) {
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  if (n == 0) throw InvalidInput("cannot fit standardization on an empty training set");
  Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += train(i, k);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double dev = train(i, k) - s.mean[k];
      s.deviation[k] += dev * dev;
    }
  }
  for (double& v : s.deviation) v = std::sqrt(v / static_cast<double>(n));
  return s;
}

void Standardizer::apply_inplace(std::span<double> row) const {
  if (row.size() != mean.size()) {
    throw InvalidInput("instance has " + std::to_string(row.size()) + " features, expected " +
                       std::to_string(mean.size()));
  }
  for (std::size_t k = 0; k < row.size(); ++k) {
    row[k] = deviation[k] > 0.0 ? (row[k] - mean[k]) / deviation[k] : 0.0;
  }
}

Matrix Standardizer::apply(const Matrix& x) const {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) apply_inplace(out.row(i));
  return out;
}

std::vector<Dataset> standardize(const Dataset& train, const std::vector<Dataset>& others) {
  const auto s = Standardizer::fit(train.features);
  std::vector<Dataset> out;
  out.reserve(others.size() + 1);
  out.push_back(train);
  out.back().features = s.apply(train.features);
  for (const auto& o : others) {
    out.push_back(o);
    out.back().features = s.apply(o.features);
  }
  return out;
}

SplitSpec split_protocol(const Dataset& data, std::uint64_t seed) {
  if (!data.labels) throw ProtocolError("split protocol requires labels");
  std::vector<std::size_t> inliers;
  std::vector<std::size_t> anomalies;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ((*data.labels)[i] == 0 ? inliers : anomalies).push_back(i);
  }
  if (inliers.empty()) throw ProtocolError("split protocol requires at least one inlier");
  Rng rng(derive_seed(seed, {kSplitTag}));
  rng.shuffle(inliers);
  const std::size_t n_train = inliers.size() / 2;
  SplitSpec split;
  split.seed = seed;
  split.train.assign(inliers.begin(), inliers.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(inliers.begin() + static_cast<std::ptrdiff_t>(n_train), inliers.end());
  split.test.insert(split.test.end(), anomalies.begin(), anomalies.end());
  std::ranges::sort(split.train);
  std::ranges::sort(split.test);
  return split;
}

std::size_t swap_count(std::size_t dims) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(dims) - 1e-12)));
}

ContaminatedSplit contaminate(const SplitSpec& split, const Dataset& data, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= kMaxContamination)) {
    throw InvalidInput("contamination rate must lie in [0, 0.10], got " + std::to_string(rate));
  }
  if (!data.labels) throw InvalidInput("contamination requires labels");
  ContaminatedSplit out{data, split, 0, 0};
  if (rate == 0.0) return out;

  const auto& labels = *data.labels;
  std::vector<std::size_t> train_inliers;
  for (std::size_t i : split.train)
    if (labels[i] == 0) train_inliers.push_back(i);
  std::vector<std::size_t> test_inliers;
  std::vector<std::size_t> anomalies;
  for (std::size_t i : split.test) (labels[i] == 0 ? test_inliers : anomalies).push_back(i);

  Rng rng(derive_seed(seed, {kContaminateTag}));
  rng.shuffle(anomalies);
  const std::size_t n_pool = anomalies.size() / 2;
  const std::size_t n_reserved = anomalies.size() - n_pool;
  std::vector<std::size_t> reserved(anomalies.begin(), anomalies.begin() + static_cast<std::ptrdiff_t>(n_reserved));
  std::vector<std::size_t> pool(anomalies.begin() + static_cast<std::ptrdiff_t>(n_reserved), anomalies.end());

  const double t = static_cast<double>(train_inliers.size());
  const auto needed = static_cast<std::size_t>(std::llround(rate * t / (1.0 - rate)));
  const std::size_t from_pool = std::min(needed, pool.size());
  const std::size_t to_make = needed - from_pool;
  if (to_make > 0 && pool.size() < 2) {
    throw ProtocolError("contamination needs " + std::to_string(needed) +
                        " anomalies but the pool holds " + std::to_string(pool.size()) +
                        "; at least two are required to synthesize more");
  }

  const std::size_t d = data.dims();
  const std::size_t n0 = data.size();
  std::vector<double> values(data.features.data().begin(), data.features.data().end());
  std::vector<int> new_labels(labels);
  const std::size_t k = swap_count(d);
  for (std::size_t s = 0; s < to_make; ++s) {
    const auto parents = rng.sample_without_replacement(pool.size(), 2);
    const auto a = data.features.row(pool[parents[0]]);
    const auto b = data.features.row(pool[parents[1]]);
    std::vector<double> child(a.begin(), a.end());
    for (std::size_t pos : rng.sample_without_replacement(d, k)) child[pos] = b[pos];
    values.insert(values.end(), child.begin(), child.end());
    new_labels.push_back(1);
  }
  out.data.features = Matrix(n0 + to_make, d, std::move(values));
  out.data.labels = std::move(new_labels);

  out.split.train = train_inliers;
  out.split.train.insert(out.split.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(from_pool));
  for (std::size_t s = 0; s < to_make; ++s) out.split.train.push_back(n0 + s);
  out.split.test = test_inliers;
  out.split.test.insert(out.split.test.end(), reserved.begin(), reserved.end());
  std::ranges::sort(out.split.train);
  std::ranges::sort(out.split.test);
  out.synthesized = to_make;
  out.pool_used = from_pool;
  return out;
}

FeatureWeights uniform_weights(std::size_t dims) {
  return {std::vector<double>(dims, 1.0), WeightMode::uniform};
}

FeatureWeights compute_feature_weights(const Matrix& train, std::size_t delta) {
  const std::size_t n = train.rows();
  const std::size_t d = train.cols();
  if (n == 0) throw InvalidInput("feature weights need a nonempty training set");
  if (d >= delta) return uniform_weights(d);

  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) mean[k] += train(i, k);
  for (double& m : mean) m /= static_cast<double>(n);

  std::vector<double> cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const double da = row[a] - mean[a];
      for (std::size_t b = a; b < d; ++b) cov[a * d + b] += da * (row[b] - mean[b]);
    }
  }
  std::vector<double> dev(d);
  for (std::size_t a = 0; a < d; ++a) dev[a] = std::sqrt(cov[a * d + a]);

  FeatureWeights w{std::vector<double>(d, 0.0), WeightMode::correlation};
  for (std::size_t a = 0; a < d; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < d; ++b) {
      if (dev[a] == 0.0 || dev[b] == 0.0) continue;
      const double c = a <= b ? cov[a * d + b] : cov[b * d + a];
      sum += std::min(1.0, std::abs(c / (dev[a] * dev[b])));
    }
    w.values[a] = sum / static_cast<double>(d);
  }
  return w;
}

}  // namespace slad
