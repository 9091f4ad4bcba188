#pragma once
// svmlight / libsvm ingestion for classification ("label idx:val ...") and
// qid-annotated learning-to-rank files ("grade qid:Q idx:val ..."), plus
// dedup keys, subsampling and splitting.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sea/core_types.hpp"

namespace sea {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Sparse feature row with 0-based, strictly ascending indices.
struct SparseRow {
  std::vector<std::uint32_t> idx;
  std::vector<double> val;

  [[nodiscard]] Vector densify(std::size_t m) const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < m) v[idx[k]] = val[k];
    }
    return v;
  }
  [[nodiscard]] std::size_t max_dim() const { return idx.empty() ? 0 : idx.back() + 1; }
  bool operator==(const SparseRow&) const = default;
  auto operator<=>(const SparseRow&) const = default;
};

struct ClassificationDataset {
  std::vector<SparseRow> rows;
  std::vector<std::size_t> labels;       // contiguous 0-based
  std::vector<std::string> label_names;  // original label text, indexed by remapped id
  std::size_t n_features = 0;

  [[nodiscard]] std::size_t size() const { return rows.size(); }
  [[nodiscard]] std::size_t n_classes() const { return label_names.size(); }
};

struct LtrQuery {
  std::string qid;
  std::vector<SparseRow> docs;
  std::vector<int> grades;
};

struct LtrDataset {
  std::vector<LtrQuery> queries;
  std::size_t n_features = 0;

  [[nodiscard]] std::size_t size() const { return queries.size(); }
  [[nodiscard]] std::size_t n_docs() const {
    std::size_t s = 0;
    for (const auto& q : queries) s += q.docs.size();
    return s;
  }
};

struct DatasetMeta {
  std::size_t n_classes = 0;  // classification
  int grade_min = 0;          // ranking
  int grade_max = 0;
  std::size_t n_features = 0;
  std::size_t n_rows = 0;     // instances or documents
  std::size_t n_queries = 0;
};

inline DatasetMeta meta_of(const ClassificationDataset& ds) {
  return DatasetMeta{ds.n_classes(), 0, 0, ds.n_features, ds.size(), 0};
}

inline DatasetMeta meta_of(const LtrDataset& ds) {
  DatasetMeta m;
  m.n_features = ds.n_features;
  m.n_rows = ds.n_docs();
  m.n_queries = ds.size();
  bool first = true;
  for (const auto& q : ds.queries) {
    for (int g : q.grades) {
      m.grade_min = first ? g : std::min(m.grade_min, g);
      m.grade_max = first ? g : std::max(m.grade_max, g);
      first = false;
    }
  }
  return m;
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

/// Reads the "idx:val" tokens starting at `first`; indices are 1-based in the file.
inline SparseRow parse_features(const std::vector<std::string_view>& toks, std::size_t first, std::size_t line) {
  SparseRow row;
  std::int64_t prev = 0;
  for (std::size_t k = first; k < toks.size(); ++k) {
    const auto tok = toks[k];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos) throw ParseError(line, "expected idx:val, got '" + std::string(tok) + "'");
    std::int64_t index = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + colon, index);
    if (ec != std::errc() || ptr != tok.data() + colon || index < 1) {
      throw ParseError(line, "bad feature index in '" + std::string(tok) + "'");
    }
    if (index <= prev) throw ParseError(line, "feature indices must be strictly ascending");
    prev = index;
    const double v = parse_double(tok.substr(colon + 1), line);
    row.idx.push_back(static_cast<std::uint32_t>(index - 1));
    row.val.push_back(v);
  }
  return row;
}

/// Strips comments and line endings; returns false for blank lines.
inline bool clean_line(std::string& line) {
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
  return line.find_first_not_of(" \t") != std::string::npos;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Parses a classification svmlight stream. Labels are remapped to 0-based ids in
/// ascending numeric order. `n_features` of 0 means "infer from the largest index".
inline ClassificationDataset parse_svmlight(std::istream& in, std::size_t n_features = 0) {
  std::vector<std::string> raw_labels;
  ClassificationDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::clean_line(line)) continue;
    const auto toks = detail::split_ws(line);
    detail::parse_double(toks[0], line_no);  // label must be numeric
    std::size_t first = 1;
    if (toks.size() > 1 && toks[1].starts_with("qid:")) first = 2;
    auto row = detail::parse_features(toks, first, line_no);
    max_dim = std::max(max_dim, row.max_dim());
    raw_labels.emplace_back(toks[0]);
    ds.rows.push_back(std::move(row));
  }
  std::map<double, std::string> distinct;
  for (const auto& l : raw_labels) distinct.emplace(std::stod(l), l);
  std::map<double, std::size_t> id_of;
  for (const auto& [value, text] : distinct) {
    id_of.emplace(value, ds.label_names.size());
    ds.label_names.push_back(text);
  }
  ds.labels.reserve(raw_labels.size());
  for (const auto& l : raw_labels) ds.labels.push_back(id_of.at(std::stod(l)));
  ds.n_features = n_features ? n_features : max_dim;
  return ds;
}

/// Parses a qid-annotated ranking stream. Documents are grouped by qid in order of
/// first appearance; grades must be integers in 0..4.
inline LtrDataset parse_ltr_svmlight(std::istream& in, std::size_t n_features = 0) {
  LtrDataset ds;
  std::unordered_map<std::string, std::size_t> query_index;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::clean_line(line)) continue;
    const auto toks = detail::split_ws(line);
    const double g = detail::parse_double(toks[0], line_no);
    if (g != std::floor(g) || g < 0.0 || g > 4.0) {
      throw ParseError(line_no, "relevance grade must be an integer in 0..4, got '" + std::string(toks[0]) + "'");
    }
    if (toks.size() < 2 || !toks[1].starts_with("qid:")) throw ParseError(line_no, "missing qid");
    const std::string qid(toks[1].substr(4));
    if (qid.empty()) throw ParseError(line_no, "empty qid");
    auto row = detail::parse_features(toks, 2, line_no);
    max_dim = std::max(max_dim, row.max_dim());
    auto [it, inserted] = query_index.try_emplace(qid, ds.queries.size());
    if (inserted) ds.queries.push_back(LtrQuery{qid, {}, {}});
    auto& q = ds.queries[it->second];
    q.docs.push_back(std::move(row));
    q.grades.push_back(static_cast<int>(g));
  }
  ds.n_features = n_features ? n_features : max_dim;
  return ds;
}

inline void write_row(std::ostream& out, const SparseRow& row) {
  for (std::size_t k = 0; k < row.idx.size(); ++k) {
    out << ' ' << (row.idx[k] + 1) << ':' << detail::format_double(row.val[k]);
  }
}

inline void write_svmlight(std::ostream& out, const ClassificationDataset& ds) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.label_names.at(ds.labels[i]);
    write_row(out, ds.rows[i]);
    out << '\n';
  }
}

inline void write_ltr_svmlight(std::ostream& out, const LtrDataset& ds) {
  for (const auto& q : ds.queries) {
    for (std::size_t d = 0; d < q.docs.size(); ++d) {
      out << q.grades[d] << " qid:" << q.qid;
      write_row(out, q.docs[d]);
      out << '\n';
    }
  }
}

inline SparseRow sparse_from_dense(const Vector& v) {
  SparseRow row;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) {
      row.idx.push_back(static_cast<std::uint32_t>(i));
      row.val.push_back(v[i]);
    }
  }
  return row;
}

/// Hash-consing: identical rows share a key, distinct rows get distinct keys.
/// Keys are dense indices in order of first appearance.
inline std::vector<std::int64_t> assign_dedup_keys(const std::vector<SparseRow>& rows) {
  std::map<SparseRow, std::int64_t> table;
  std::vector<std::int64_t> keys;
  keys.reserve(rows.size());
  for (const auto& r : rows) {
    auto [it, inserted] = table.try_emplace(r, static_cast<std::int64_t>(table.size()));
    keys.push_back(it->second);
  }
  return keys;
}

/// ceil(fraction * n) distinct indices drawn uniformly, returned in ascending order.
template <class Rng>
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("subsample fraction must lie in (0, 1]");
  // the small slack keeps e.g. 0.01 * 10000 from rounding up to 101
  const auto k = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (k == n) return all;
  std::vector<std::size_t> picked;
  picked.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), k, rng);
  return picked;  // std::sample keeps relative order
}

template <class Rng>
ClassificationDataset subsample(const ClassificationDataset& ds, double fraction, Rng& rng) {
  ClassificationDataset out;
  out.label_names = ds.label_names;
  out.n_features = ds.n_features;
  for (auto i : subsample_indices(ds.size(), fraction, rng)) {
    out.rows.push_back(ds.rows[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

/// Samples whole queries; a query is never split.
template <class Rng>
LtrDataset subsample(const LtrDataset& ds, double fraction, Rng& rng) {
  LtrDataset out;
  out.n_features = ds.n_features;
  for (auto i : subsample_indices(ds.size(), fraction, rng)) out.queries.push_back(ds.queries[i]);
  return out;
}

template <class Dataset, class Rng>
std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test fraction must lie in (0, 1)");
  const auto test_idx = subsample_indices(ds.size(), test_fraction, rng);
  std::vector<char> is_test(ds.size(), 0);
  for (auto i : test_idx) is_test[i] = 1;
  Dataset train;
  Dataset test;
  train.n_features = test.n_features = ds.n_features;
  if constexpr (requires { ds.label_names; }) {
    train.label_names = test.label_names = ds.label_names;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      auto& dst = is_test[i] ? test : train;
      dst.rows.push_back(ds.rows[i]);
      dst.labels.push_back(ds.labels[i]);
    }
  } else {
    for (std::size_t i = 0; i < ds.size(); ++i) (is_test[i] ? test : train).queries.push_back(ds.queries[i]);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Dense views used by the environments.

/// Dense classification pool: row i of `features` is instance i.
struct ClassificationData {
  Matrix features;                       // N x m
  std::vector<std::size_t> labels;
  std::vector<std::int64_t> dedup_keys;  // per instance
  std::size_t n_classes = 0;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  [[nodiscard]] ContextVector context(std::size_t i) const {
    return ContextVector(features.row(static_cast<Eigen::Index>(i)).transpose(), dedup_keys[i]);
  }
};

inline ClassificationData to_dense(const ClassificationDataset& ds) {
  ClassificationData d;
  d.features.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(ds.n_features));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    d.features.row(static_cast<Eigen::Index>(i)) = ds.rows[i].densify(ds.n_features).transpose();
  }
  d.labels = ds.labels;
  d.dedup_keys = assign_dedup_keys(ds.rows);
  d.n_classes = ds.n_classes();
  return d;
}

struct RankingData {
  std::vector<Matrix> docs;  // per query: n_docs x m
  std::vector<std::vector<int>> grades;

  [[nodiscard]] std::size_t size() const { return docs.size(); }
  [[nodiscard]] std::size_t dim() const { return docs.empty() ? 0 : static_cast<std::size_t>(docs.front().cols()); }
};

/// Dense per-query matrices; candidate lists longer than `max_docs` are truncated.
inline RankingData to_dense(const LtrDataset& ds, std::size_t max_docs = 100) {
  RankingData d;
  for (const auto& q : ds.queries) {
    const std::size_t k = std::min(max_docs, q.docs.size());
    Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(ds.n_features));
    for (std::size_t i = 0; i < k; ++i) m.row(static_cast<Eigen::Index>(i)) = q.docs[i].densify(ds.n_features).transpose();
    d.docs.push_back(std::move(m));
    d.grades.emplace_back(q.grades.begin(), q.grades.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return d;
}

/// Per-feature min-max scaling to [0, 1] using ranges from `reference`.
inline void minmax_scale(Matrix& features, const Matrix& reference) {
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double lo = reference.col(c).minCoeff();
    const double hi = reference.col(c).maxCoeff();
    if (hi > lo) features.col(c) = (features.col(c).array() - lo) / (hi - lo);
    else features.col(c).setZero();
  }
}

}  // namespace sea
