#ifndef DISPLACER_HNSW_HPP
#define DISPLACER_HNSW_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace displacer {

struct HnswParams {
  std::size_t max_degree = 16;        // M; layer 0 keeps 2*M
  std::size_t ef_construction = 100;
  std::size_t ef_search = 400;
  std::uint64_t seed = 100;
};

/// Hierarchical navigable small-world graph over unit-norm rows, distance
/// 1 - dot. The graph only proposes candidates; callers re-rank exactly.
class HnswIndex {
 public:
  using Id = std::uint32_t;

  HnswIndex() = default;

  /// `rows` is row-major, `dim` columns, every row already normalized.
  /// The index keeps its own single-precision copy.
  void build(std::span<const double> rows, std::size_t dim, HnswParams params = {}) {
    rows_.assign(rows.begin(), rows.end());
    dim_ = dim;
    params_ = params;
    const std::size_t n = dim ? rows.size() / dim : 0;
    links_.assign(n, {});
    levels_.assign(n, 0);
    entry_ = 0;
    top_level_ = -1;
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double level_mult = 1.0 / std::log(static_cast<double>(std::max<std::size_t>(params.max_degree, 2)));
    visited_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::max(unit(rng), 1e-12);
      const int level = static_cast<int>(-std::log(u) * level_mult);
      insert(static_cast<Id>(i), level);
    }
  }

  std::size_t size() const noexcept { return links_.size(); }
  bool empty() const noexcept { return links_.empty(); }

  /// Up to `k` candidate ids, nearest first. `query` must be unit-norm.
  std::vector<std::pair<double, Id>> search(std::span<const double> query, std::size_t k,
                                            std::size_t ef = 0) const {
    if (empty() || k == 0) return {};
    ef = std::max({ef ? ef : params_.ef_search, k});
    const std::vector<float> q(query.begin(), query.end());
    Id cur = entry_;
    double cur_d = distance(q, cur);
    for (int level = top_level_; level > 0; --level) greedy(q, level, cur, cur_d);
    std::vector<std::uint32_t> marks(size(), 0);
    auto found = search_layer(q, {{cur_d, cur}}, ef, 0, marks, 1);
    if (found.size() > k) found.resize(k);
    return found;
  }

 private:
  using Candidate = std::pair<double, Id>;

  // Graph distances only steer the search; callers re-rank exactly, so
  // single precision and reordered partial sums are fine here.
  double distance(std::span<const float> q, Id id) const {
    const float* row = rows_.data() + static_cast<std::size_t>(id) * dim_;
    const float* qp = q.data();
    float s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t j = 0;
    for (; j + 4 <= dim_; j += 4) {
      s0 += qp[j] * row[j];
      s1 += qp[j + 1] * row[j + 1];
      s2 += qp[j + 2] * row[j + 2];
      s3 += qp[j + 3] * row[j + 3];
    }
    for (; j < dim_; ++j) s0 += qp[j] * row[j];
    return 1.0 - static_cast<double>((s0 + s1) + (s2 + s3));
  }

  double distance(Id a, Id b) const { return distance(row(a), b); }

  std::span<const float> row(Id id) const {
    return std::span<const float>(rows_).subspan(static_cast<std::size_t>(id) * dim_, dim_);
  }

  std::size_t capacity(int level) const {
    return level == 0 ? 2 * params_.max_degree : params_.max_degree;
  }

  void greedy(std::span<const float> q, int level, Id& cur, double& cur_d) const {
    bool moved = true;
    while (moved) {
      moved = false;
      for (Id nb : links_[cur][static_cast<std::size_t>(level)]) {
        const double d = distance(q, nb);
        if (d < cur_d) {
          cur_d = d;
          cur = nb;
          moved = true;
        }
      }
    }
  }

  // Best-first beam search on one layer; result sorted ascending.
  std::vector<Candidate> search_layer(std::span<const float> q, std::vector<Candidate> seeds,
                                      std::size_t ef, int level, std::vector<std::uint32_t>& marks,
                                      std::uint32_t stamp) const {
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> frontier;
    std::priority_queue<Candidate> best;
    for (const auto& s : seeds) {
      marks[s.second] = stamp;
      frontier.push(s);
      best.push(s);
    }
    while (best.size() > ef) best.pop();
    while (!frontier.empty()) {
      const Candidate c = frontier.top();
      if (c.first > best.top().first && best.size() >= ef) break;
      frontier.pop();
      for (Id nb : links_[c.second][static_cast<std::size_t>(level)]) {
        if (marks[nb] == stamp) continue;
        marks[nb] = stamp;
        const double d = distance(q, nb);
        if (best.size() < ef || d < best.top().first) {
          frontier.push({d, nb});
          best.push({d, nb});
          if (best.size() > ef) best.pop();
        }
      }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    while (!best.empty()) {
      out.push_back(best.top());
      best.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Diversity heuristic: keep a candidate only if it is closer to the base
  // than to every neighbor already kept.
  std::vector<Id> select(const std::vector<Candidate>& sorted, std::size_t m) const {
    std::vector<Id> kept;
    for (const auto& [d, id] : sorted) {
      if (kept.size() >= m) break;
      bool good = true;
      for (Id k : kept)
        if (distance(id, k) < d) {
          good = false;
          break;
        }
      if (good) kept.push_back(id);
    }
    // Fill remaining slots with the nearest rejected candidates.
    for (const auto& [d, id] : sorted) {
      if (kept.size() >= m) break;
      if (std::find(kept.begin(), kept.end(), id) == kept.end()) kept.push_back(id);
    }
    return kept;
  }

  void insert(Id id, int level) {
    levels_[id] = level;
    links_[id].assign(static_cast<std::size_t>(level) + 1, {});
    if (top_level_ < 0) {
      entry_ = id;
      top_level_ = level;
      return;
    }
    const auto q = row(id);
    Id cur = entry_;
    double cur_d = distance(q, cur);
    for (int l = top_level_; l > level; --l) greedy(q, l, cur, cur_d);
    std::vector<Candidate> seeds{{cur_d, cur}};
    for (int l = std::min(level, top_level_); l >= 0; --l) {
      ++stamp_;
      auto found = search_layer(q, seeds, params_.ef_construction, l, visited_, stamp_);
      const auto chosen = select(found, params_.max_degree);
      auto& mine = links_[id][static_cast<std::size_t>(l)];
      mine = chosen;
      for (Id nb : chosen) {
        auto& theirs = links_[nb][static_cast<std::size_t>(l)];
        theirs.push_back(id);
        if (theirs.size() > capacity(l)) {
          std::vector<Candidate> cands;
          cands.reserve(theirs.size());
          for (Id t : theirs) cands.push_back({distance(nb, t), t});
          std::sort(cands.begin(), cands.end());
          theirs = select(cands, capacity(l));
        }
      }
      seeds = std::move(found);
    }
    if (level > top_level_) {
      top_level_ = level;
      entry_ = id;
    }
  }

  std::vector<float> rows_;
  std::size_t dim_ = 0;
  HnswParams params_;
  std::vector<std::vector<std::vector<Id>>> links_;  // node -> level -> neighbors
  std::vector<int> levels_;
  Id entry_ = 0;
  int top_level_ = -1;
  std::vector<std::uint32_t> visited_;
  std::uint32_t stamp_ = 0;
};

}  // namespace displacer

#endif  // DISPLACER_HNSW_HPP
