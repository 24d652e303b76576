#include "upsilon/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace upsilon {

namespace {

enum Stream : std::uint64_t { kMeans = 1, kLabeled = 2, kUnlabeled = 3, kTestId = 4, kTestOod = 5, kShuffle = 6 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint64_t cls) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(cls)};
  return std::mt19937_64(seq);
}

// Splits `total` across weights by largest remainder; ties go to lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[remainders[i % remainders.size()].second];
  return out;
}

void draw_samples(std::mt19937_64& rng, const std::vector<double>& mean, double sigma, std::size_t count,
                  std::vector<double>& sink) {
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t n = 0; n < count; ++n) {
    for (double mu : mean) sink.push_back(mu + noise(rng));
  }
}

constexpr std::size_t kUnknownClass = std::numeric_limits<std::size_t>::max();

}  // namespace

void BenchmarkSpec::validate() const {
  if (k_id < 2) throw std::invalid_argument("benchmark needs k_id >= 2");
  if (d == 0) throw std::invalid_argument("benchmark needs d >= 1");
  if (signal_dim > d) throw std::invalid_argument("signal_dim must not exceed d");
  if (n_labeled_per_class == 0) throw std::invalid_argument("benchmark needs n_labeled_per_class >= 1");
  if (!(mismatch_ratio >= 0.0 && mismatch_ratio <= 1.0)) throw std::invalid_argument("mismatch_ratio must lie in [0, 1]");
  if (mismatch_ratio > 0.0 && k_ood == 0) throw std::invalid_argument("mismatch_ratio > 0 needs k_ood >= 1");
  if (!(ood_imbalance_ratio >= 1.0)) throw std::invalid_argument("ood_imbalance_ratio must be >= 1");
  if (!(noise_sigma > 0.0)) throw std::invalid_argument("noise_sigma must be positive");
}

std::size_t MismatchedDataset::unlabeled_ood_count() const {
  return static_cast<std::size_t>(std::count(unlabeled_ood.begin(), unlabeled_ood.end(), true));
}

void MismatchedDataset::validate() const {
  if (labeled_y.size() != labeled_x.rows()) throw DimensionError("labeled features/labels size mismatch");
  if (unlabeled_truth.size() != unlabeled_x.rows() || unlabeled_ood.size() != unlabeled_x.rows()) {
    throw DimensionError("unlabeled features/ground truth size mismatch");
  }
  if (test_id_y.size() != test_id_x.rows() || test_full_y.size() != test_full_x.rows()) {
    throw DimensionError("test features/labels size mismatch");
  }
  for (auto y : labeled_y) {
    if (y >= k_id) throw std::invalid_argument("labeled sample outside the ID classes");
  }
  for (auto y : test_id_y) {
    if (y >= k_id) throw std::invalid_argument("ID test sample outside the ID classes");
  }
  const std::size_t d = labeled_x.cols();
  for (const Matrix* m : {&unlabeled_x, &test_id_x, &test_full_x}) {
    if (m->rows() > 0 && m->cols() != d) throw DimensionError("feature dimension differs between splits");
  }
}

MismatchedDataset generate(const BenchmarkSpec& spec) {
  spec.validate();
  const std::size_t n_classes = spec.k_id + spec.k_ood;
  const std::size_t d = spec.d;

  const std::size_t signal = spec.signal_dim == 0 ? d : spec.signal_dim;

  std::vector<std::vector<double>> means(n_classes, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto rng = stream_rng(spec.seed, kMeans, c);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double norm = 0.0;
    for (std::size_t j = 0; j < signal; ++j) {
      means[c][j] = gauss(rng);
      norm += means[c][j] * means[c][j];
    }
    norm = std::sqrt(norm);
    for (auto& v : means[c]) v *= spec.class_separation / norm;
  }

  MismatchedDataset ds;
  ds.k_id = spec.k_id;
  ds.k_ood = spec.k_ood;

  std::vector<double> buf;
  for (std::size_t c = 0; c < spec.k_id; ++c) {
    auto rng = stream_rng(spec.seed, kLabeled, c);
    draw_samples(rng, means[c], spec.noise_sigma, spec.n_labeled_per_class, buf);
    ds.labeled_y.insert(ds.labeled_y.end(), spec.n_labeled_per_class, c);
  }
  ds.labeled_x = Matrix(ds.labeled_y.size(), d, std::move(buf));

  const auto n_ood = static_cast<std::size_t>(std::llround(spec.mismatch_ratio * static_cast<double>(spec.m_unlabeled)));
  const std::size_t n_id = spec.m_unlabeled - n_ood;
  std::vector<std::size_t> class_sizes = apportion(n_id, std::vector<double>(spec.k_id, 1.0));
  if (spec.k_ood > 0) {
    std::vector<double> weights(spec.k_ood, 1.0);
    if (spec.k_ood > 1) {
      for (std::size_t c = 0; c < spec.k_ood; ++c) {
        weights[c] = std::pow(spec.ood_imbalance_ratio, -static_cast<double>(c) / static_cast<double>(spec.k_ood - 1));
      }
    }
    const auto ood_sizes = apportion(n_ood, weights);
    class_sizes.insert(class_sizes.end(), ood_sizes.begin(), ood_sizes.end());
  }

  buf.clear();
  std::vector<std::size_t> truth;
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto rng = stream_rng(spec.seed, kUnlabeled, c);
    draw_samples(rng, means[c], spec.noise_sigma, class_sizes[c], buf);
    truth.insert(truth.end(), class_sizes[c], c);
  }
  std::vector<std::size_t> order(truth.size());
  std::iota(order.begin(), order.end(), 0);
  auto shuffle_rng = stream_rng(spec.seed, kShuffle, 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const Matrix pool(truth.size(), d, std::move(buf));
  ds.unlabeled_x = pool.select_rows(order);
  ds.unlabeled_truth.resize(order.size());
  ds.unlabeled_ood.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ds.unlabeled_truth[i] = truth[order[i]];
    ds.unlabeled_ood[i] = truth[order[i]] >= spec.k_id;
  }

  buf.clear();
  for (std::size_t c = 0; c < spec.k_id; ++c) {
    auto rng = stream_rng(spec.seed, kTestId, c);
    draw_samples(rng, means[c], spec.noise_sigma, spec.n_test_per_class, buf);
    ds.test_id_y.insert(ds.test_id_y.end(), spec.n_test_per_class, c);
  }
  ds.test_id_x = Matrix(ds.test_id_y.size(), d, buf);
  for (std::size_t c = spec.k_id; c < n_classes; ++c) {
    auto rng = stream_rng(spec.seed, kTestOod, c);
    draw_samples(rng, means[c], spec.noise_sigma, spec.n_test_per_class, buf);
  }
  ds.test_full_y = ds.test_id_y;
  for (std::size_t c = spec.k_id; c < n_classes; ++c) ds.test_full_y.insert(ds.test_full_y.end(), spec.n_test_per_class, c);
  ds.test_full_x = Matrix(ds.test_full_y.size(), d, std::move(buf));
  return ds;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    std::size_t start = 0;
    while (start < field.size() && field[start] == ' ') ++start;
    fields.push_back(field.substr(start));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(const std::string& text, std::size_t& out) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

MismatchedDataset ingest_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw CsvFormatError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw CsvFormatError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;
  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw CsvFormatError(path.string() + ": missing column '" + name + "'");
    return it->second;
  };
  const std::size_t label_col = require(schema.label_column);
  const std::size_t split_col = require(schema.split_column);
  const auto ood_it = column.find(schema.ood_column);
  const bool has_ood = ood_it != column.end();
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != label_col && i != split_col && !(has_ood && i == ood_it->second)) feature_cols.push_back(i);
  }
  if (feature_cols.empty()) throw CsvFormatError(path.string() + ": no feature columns");

  struct Row {
    std::vector<double> x;
    std::size_t label;
    int split;  // 0 labeled, 1 unlabeled, 2 test
    int ood;    // -1 unknown
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != header.size()) {
      throw CsvFormatError(where + "expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    Row row;
    for (auto c : feature_cols) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw CsvFormatError(where + "non-numeric value '" + fields[c] + "' in feature column '" + header[c] + "'");
      }
      row.x.push_back(v);
    }
    const std::string& split = fields[split_col];
    if (split == "labeled") row.split = 0;
    else if (split == "unlabeled") row.split = 1;
    else if (split == "test") row.split = 2;
    else throw CsvFormatError(where + "unknown split tag '" + split + "'");

    row.label = kUnknownClass;
    if (!fields[label_col].empty() && !parse_index(fields[label_col], row.label)) {
      throw CsvFormatError(where + "label '" + fields[label_col] + "' is not a class index");
    }
    if (row.split != 1 && row.label == kUnknownClass) throw CsvFormatError(where + "labeled/test rows need a label");
    row.ood = -1;
    if (has_ood && !fields[ood_it->second].empty()) {
      const auto& flag = fields[ood_it->second];
      if (flag == "1" || flag == "true") row.ood = 1;
      else if (flag == "0" || flag == "false") row.ood = 0;
      else throw CsvFormatError(where + "ood flag '" + flag + "' is not 0/1");
    }
    rows.push_back(std::move(row));
  }

  std::size_t k_id = schema.k_id;
  if (k_id == 0) {
    for (const auto& r : rows) {
      if (r.split == 0) k_id = std::max(k_id, r.label + 1);
    }
  }
  if (k_id < 2) throw CsvFormatError(path.string() + ": need labeled rows from at least two ID classes");

  MismatchedDataset ds;
  ds.k_id = k_id;
  const std::size_t d = feature_cols.size();
  std::vector<double> lx, ux, tx, fx;
  std::size_t max_class = k_id - 1;
  for (const auto& r : rows) {
    if (r.label != kUnknownClass) max_class = std::max(max_class, r.label);
    switch (r.split) {
      case 0:
        if (r.label >= k_id) throw CsvFormatError(path.string() + ": labeled row with non-ID class " + std::to_string(r.label));
        lx.insert(lx.end(), r.x.begin(), r.x.end());
        ds.labeled_y.push_back(r.label);
        break;
      case 1:
        ux.insert(ux.end(), r.x.begin(), r.x.end());
        ds.unlabeled_truth.push_back(r.label);
        ds.unlabeled_ood.push_back(r.ood >= 0 ? r.ood == 1 : (r.label != kUnknownClass && r.label >= k_id));
        break;
      default:
        fx.insert(fx.end(), r.x.begin(), r.x.end());
        ds.test_full_y.push_back(r.label);
        if (r.label < k_id) {
          tx.insert(tx.end(), r.x.begin(), r.x.end());
          ds.test_id_y.push_back(r.label);
        }
        break;
    }
  }
  if (ds.labeled_y.empty()) throw CsvFormatError(path.string() + ": no labeled rows");
  ds.k_ood = max_class + 1 - k_id;
  ds.labeled_x = Matrix(ds.labeled_y.size(), d, std::move(lx));
  ds.unlabeled_x = Matrix(ds.unlabeled_truth.size(), d, std::move(ux));
  ds.test_id_x = Matrix(ds.test_id_y.size(), d, std::move(tx));
  ds.test_full_x = Matrix(ds.test_full_y.size(), d, std::move(fx));
  ds.validate();
  return ds;
}

}  // namespace upsilon
