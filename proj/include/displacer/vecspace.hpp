#ifndef DISPLACER_VECSPACE_HPP
#define DISPLACER_VECSPACE_HPP

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/hnsw.hpp"

namespace displacer {

using Vector = std::vector<double>;

struct Neighbor {
  std::string term;
  double distance = 0.0;  // cosine distance, in [0, 2]
  bool operator==(const Neighbor&) const = default;
};

enum class KnnMode { Exact, Approximate };

inline std::string_view to_string(KnnMode m) {
  return m == KnnMode::Exact ? "exact" : "approximate";
}

inline double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

/// 1 - cos(u, v), clamped to [0, 2].
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorCode::DimensionMismatch, "vectors of different length");
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(1.0 - dot(u, v) / (nu * nv), 0.0, 2.0);
}

/// b - a + c, exact in the degenerate cases a == c (gives b) and a == b
/// (gives c).
inline Vector offset_apply(std::span<const double> a, std::span<const double> b,
                           std::span<const double> c) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == c[i])
      out[i] = b[i];
    else if (a[i] == b[i])
      out[i] = c[i];
    else
      out[i] = b[i] - a[i] + c[i];
  }
  return out;
}

inline Vector mean_of(const std::vector<Vector>& vs) {
  if (vs.empty()) return {};
  Vector out(vs.front().size(), 0.0);
  for (const auto& v : vs)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  for (auto& x : out) x /= static_cast<double>(vs.size());
  return out;
}

inline bool is_stopword(std::string_view token) {
  std::string lower(token);
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return lower == "a" || lower == "an" || lower == "the" || lower == "of";
}

struct LoadOptions {
  std::optional<std::size_t> max_rows;  // keep only the first N rows
};

/// Term -> vector store with exact and graph-indexed cosine k-NN.
///
/// Vectors are kept exactly as loaded; normalization happens only inside
/// distance computations. Build (load/add) is exclusive; afterwards all
/// lookups are const and thread-safe.
class EmbeddingSpace {
 public:
  explicit EmbeddingSpace(std::size_t dim = 0) : dim_(dim) {}

  EmbeddingSpace(EmbeddingSpace&&) = default;
  EmbeddingSpace& operator=(EmbeddingSpace&&) = default;

  static EmbeddingSpace load_file(const std::string& path, LoadOptions opts = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open embeddings file " + path);
    return load(in, opts);
  }

  static EmbeddingSpace load_text(std::string_view text, LoadOptions opts = {}) {
    std::istringstream in{std::string(text)};
    return load(in, opts);
  }

  /// Header "N D", then N rows "term c1 ... cD".
  static EmbeddingSpace load(std::istream& in, LoadOptions opts = {}) {
    std::string line;
    if (!std::getline(in, line)) throw Error::at_line(ErrorCode::BadHeader, 1, "missing header");
    std::size_t rows = 0, dim = 0;
    {
      std::istringstream hs(line);
      std::string a, b, extra;
      if (!(hs >> a >> b) || (hs >> extra) || !parse_count(a, rows) || !parse_count(b, dim) ||
          dim == 0)
        throw Error::at_line(ErrorCode::BadHeader, 1, "expected \"N D\", got \"" + line + "\"");
    }
    if (opts.max_rows) rows = std::min(rows, *opts.max_rows);
    EmbeddingSpace space(dim);
    std::size_t lineno = 1;
    Vector v(dim);
    while (space.size() + space.duplicates_ < rows && std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const char* p = line.data();
      const char* end = p + line.size();
      while (p < end && *p == ' ') ++p;
      const char* term_begin = p;
      while (p < end && *p != ' ') ++p;
      std::string term(term_begin, p);
      std::size_t count = 0;
      for (;;) {
        while (p < end && (*p == ' ' || *p == '\r' || *p == '\t')) ++p;
        if (p >= end) break;
        if (count == dim)
          throw Error::at_line(ErrorCode::DimensionMismatch, lineno,
                               "more than " + std::to_string(dim) + " components");
        char* stop = nullptr;
        const double x = std::strtod(p, &stop);
        if (stop == p || !std::isfinite(x))
          throw Error::at_line(ErrorCode::BadRow, lineno, "bad component for \"" + term + "\"");
        v[count++] = x;
        p = stop;
      }
      if (count != dim)
        throw Error::at_line(ErrorCode::DimensionMismatch, lineno,
                             "expected " + std::to_string(dim) + " components, got " +
                                 std::to_string(count));
      try {
        space.add(term, v);
      } catch (const Error& e) {
        throw Error::at_line(e.code(), lineno, e.what());
      }
    }
    return space;
  }

  /// Adds or replaces (last wins) a term. Replacements are recorded in warnings().
  void add(const std::string& term, std::span<const double> v) {
    if (term.empty() || term.find(' ') != std::string::npos)
      throw Error(ErrorCode::BadRow, "term must be nonempty without spaces");
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_)
      throw Error(ErrorCode::DimensionMismatch, "vector for \"" + term + "\" has " +
                                                    std::to_string(v.size()) + " components");
    const double n = norm(v);
    if (n == 0.0 || !std::isfinite(n))
      throw Error(ErrorCode::ZeroVector, "vector for \"" + term + "\" has zero norm");
    index_.reset();
    auto [it, inserted] = ids_.try_emplace(term, terms_.size());
    if (!inserted) {
      ++duplicates_;
      warnings_.push_back("duplicate term \"" + term + "\" replaced");
      const std::size_t id = it->second;
      std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(id * dim_));
      for (std::size_t j = 0; j < dim_; ++j) unit_[id * dim_ + j] = v[j] / n;
      return;
    }
    terms_.push_back(term);
    data_.insert(data_.end(), v.begin(), v.end());
    for (double x : v) unit_.push_back(x / n);
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return terms_.size(); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  bool contains(std::string_view term) const { return ids_.count(std::string(term)) > 0; }

  std::span<const double> row(std::size_t id) const {
    return std::span<const double>(data_).subspan(id * dim_, dim_);
  }

  /// Stored vector of a vocabulary term, if present verbatim.
  std::optional<std::span<const double>> lookup(std::string_view term) const {
    auto it = ids_.find(std::string(term));
    if (it == ids_.end()) return std::nullopt;
    return row(it->second);
  }

  /// Verbatim hit, then the underscore-joined form, then the average of
  /// the in-vocabulary tokens with articles and "of" dropped.
  Vector word2vec(std::string_view phrase) const {
    if (auto v = lookup(phrase)) return {v->begin(), v->end()};
    std::string joined(phrase);
    std::replace(joined.begin(), joined.end(), ' ', '_');
    if (auto v = lookup(joined)) return {v->begin(), v->end()};
    std::vector<Vector> parts;
    std::istringstream ts{std::string(phrase)};
    std::string token;
    while (ts >> token) {
      if (is_stopword(token)) continue;
      if (auto v = lookup(token)) parts.emplace_back(v->begin(), v->end());
    }
    if (parts.empty())
      throw Error(ErrorCode::OutOfVocabulary, "\"" + std::string(phrase) + "\"");
    if (parts.size() == 1) return parts.front();
    return mean_of(parts);
  }

  bool resolvable(std::string_view phrase) const {
    try {
      (void)word2vec(phrase);
      return true;
    } catch (const Error&) {
      return false;
    }
  }

  /// k nearest terms by cosine distance, ascending; ties broken by term.
  std::vector<Neighbor> knn(std::span<const double> v, std::size_t k,
                            KnnMode mode = KnnMode::Exact) const {
    return nearest(v, k, {}, mode);
  }

  /// knn that skips the terms in `exclude`.
  std::vector<Neighbor> vec2word(std::span<const double> v, std::size_t k,
                                 const std::set<std::string>& exclude = {},
                                 KnnMode mode = KnnMode::Exact) const {
    return nearest(v, k, exclude, mode);
  }

  /// v(b) - v(a) + v(c).
  Vector analogy_vector(std::string_view a, std::string_view b, std::string_view c) const {
    const Vector va = word2vec(a), vb = word2vec(b), vc = word2vec(c);
    return offset_apply(va, vb, vc);
  }

  /// Builds the graph index now; otherwise it is built on first approximate query.
  void build_index(HnswParams params = {}) {
    params_ = params;
    auto idx = std::make_shared<HnswIndex>();
    idx->build(unit_, dim_, params);
    index_ = std::move(idx);
  }

  void set_index_params(HnswParams params) {
    params_ = params;
    index_.reset();
  }

  const HnswParams& index_params() const noexcept { return params_; }

 private:
  static bool parse_count(const std::string& s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
  }

  std::shared_ptr<const HnswIndex> index() const {
    std::lock_guard lock(*index_mutex_);
    if (!index_) {
      auto idx = std::make_shared<HnswIndex>();
      idx->build(unit_, dim_, params_);
      index_ = std::move(idx);
    }
    return index_;
  }

  std::vector<Neighbor> nearest(std::span<const double> v, std::size_t k,
                                const std::set<std::string>& exclude, KnnMode mode) const {
    if (v.size() != dim_)
      throw Error(ErrorCode::DimensionMismatch, "query vector has " + std::to_string(v.size()) +
                                                    " components, space has " +
                                                    std::to_string(dim_));
    if (k == 0 || terms_.empty()) return {};
    const double n = norm(v);
    if (n == 0.0) throw Error(ErrorCode::ZeroVector, "query vector has zero norm");
    Vector q(v.begin(), v.end());
    for (auto& x : q) x /= n;

    std::vector<std::pair<double, std::size_t>> scored;
    if (mode == KnnMode::Exact) {
      scored.reserve(terms_.size());
      for (std::size_t i = 0; i < terms_.size(); ++i)
        scored.emplace_back(unit_distance(q, i), i);
    } else {
      const auto idx = index();
      const std::size_t want = std::min(k + exclude.size(), terms_.size());
      for (const auto& [d, id] : idx->search(q, want, std::max(params_.ef_search, 2 * want)))
        scored.emplace_back(unit_distance(q, id), id);
    }
    auto before = [&](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first < y.first;
      return terms_[x.second] < terms_[y.second];
    };
    std::erase_if(scored, [&](const auto& s) { return exclude.count(terms_[s.second]) > 0; });
    const std::size_t m = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(m), scored.end(),
                      before);
    std::vector<Neighbor> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
      out.push_back({terms_[scored[i].second], scored[i].first});
    return out;
  }

  double unit_distance(std::span<const double> q, std::size_t id) const {
    const double* r = unit_.data() + id * dim_;
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += q[j] * r[j];
    return std::clamp(1.0 - s, 0.0, 2.0);
  }

  std::size_t dim_ = 0;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<double> data_;  // as loaded, row-major
  std::vector<double> unit_;  // normalized copy for search
  std::vector<std::string> warnings_;
  std::size_t duplicates_ = 0;

  HnswParams params_;
  std::unique_ptr<std::mutex> index_mutex_ = std::make_unique<std::mutex>();
  mutable std::shared_ptr<const HnswIndex> index_;
};

}  // namespace displacer

#endif  // DISPLACER_VECSPACE_HPP
