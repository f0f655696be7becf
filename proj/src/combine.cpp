#include "combalign/combine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace combalign {

bool is_one_to_one(const MatchSet& m) {
  std::unordered_set<int> src, dst;
  for (auto [u, v] : m.pairs) {
    if (!src.insert(u).second || !dst.insert(v).second) return false;
  }
  return true;
}

Eigen::MatrixXd ensemble_weights(const AlignmentMatrix& t_wl,
                                 const AlignmentMatrix& t_gw,
                                 EnsembleMode mode) {
  if (t_wl.rows() != t_gw.rows() || t_wl.cols() != t_gw.cols()) {
    throw std::invalid_argument("ensemble_weights: shape mismatch");
  }
  if (mode == EnsembleMode::Product) return t_wl.cwiseProduct(t_gw);
  return 0.5 * (t_wl + t_gw);
}

WeightedBipartite build_bipartite(const Eigen::MatrixXd& weights,
                                  const AlignmentMatrix& t_gw, int r) {
  const int n1 = static_cast<int>(t_gw.rows());
  const int n2 = static_cast<int>(t_gw.cols());
  if (weights.rows() != n1 || weights.cols() != n2) {
    throw std::invalid_argument("build_bipartite: shape mismatch");
  }
  if (r < 1 || r > n2) {
    throw std::invalid_argument("build_bipartite: r must be in [1, n2]");
  }
  WeightedBipartite b;
  b.n1 = n1;
  b.n2 = n2;
  b.edges.reserve(static_cast<std::size_t>(n1) * r);
  std::vector<int> order(n2);
  for (int i = 0; i < n1; ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + r, order.end(),
                      [&](int a, int c) {
                        if (t_gw(i, a) != t_gw(i, c))
                          return t_gw(i, a) > t_gw(i, c);
                        return a < c;
                      });
    for (int j = 0; j < r; ++j) {
      b.edges.push_back({i, order[j], weights(i, order[j])});
    }
  }
  return b;
}

MatchSet max_weight_matching(const WeightedBipartite& b) {
  for (const auto& e : b.edges) {
    if (e.source < 0 || e.source >= b.n1 || e.target < 0 ||
        e.target >= b.n2) {
      throw std::out_of_range("max_weight_matching: edge endpoint out of range");
    }
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) {
      throw std::invalid_argument(
          "max_weight_matching: weights must be finite and >= 0");
    }
  }

  // Minimization on costs -w, solved as a left-saturating assignment by
  // giving every source an exclusive zero-weight dummy target (= staying
  // unmatched). Dummy target of source i has index n2 + i.
  const int n1 = b.n1;
  const int n2 = b.n2;
  const int nt = n2 + n1;
  std::vector<std::vector<std::pair<int, double>>> adj(n1);  // (target, cost)
  for (const auto& e : b.edges) adj[e.source].push_back({e.target, -e.weight});
  for (int i = 0; i < n1; ++i) adj[i].push_back({n2 + i, 0.0});

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n1, 0.0), v(nt, 0.0);
  std::vector<int> match_left(n1, -1), match_right(nt, -1);

  std::vector<double> dist(nt);
  std::vector<int> prev_left(nt);
  std::vector<char> settled(nt);
  // (distance, target); lower index wins distance ties
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;

  for (int s = 0; s < n1; ++s) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev_left.begin(), prev_left.end(), -1);
    std::fill(settled.begin(), settled.end(), 0);
    while (!heap.empty()) heap.pop();

    for (auto [k, c] : adj[s]) {
      const double rc = c - u[s] - v[k];
      if (rc < dist[k]) {
        dist[k] = rc;
        prev_left[k] = s;
        heap.push({rc, k});
      }
    }

    int sink = -1;
    double delta = 0.0;
    std::vector<int> settled_targets;
    while (!heap.empty()) {
      auto [d, k] = heap.top();
      heap.pop();
      if (settled[k]) continue;
      settled[k] = 1;
      settled_targets.push_back(k);
      if (match_right[k] == -1) {
        sink = k;
        delta = d;
        break;
      }
      const int j = match_right[k];
      for (auto [k2, c2] : adj[j]) {
        if (settled[k2]) continue;
        const double nd = d + (c2 - u[j] - v[k2]);
        if (nd < dist[k2]) {
          dist[k2] = nd;
          prev_left[k2] = j;
          heap.push({nd, k2});
        }
      }
    }
    // The dummy target guarantees a sink exists.
    if (sink == -1) throw std::logic_error("augmenting path search failed");

    u[s] += delta;
    for (int k : settled_targets) {
      if (k == sink) continue;
      v[k] += dist[k] - delta;
      const int j = match_right[k];
      if (j != -1) u[j] += delta - dist[k];
    }

    int k = sink;
    while (k != -1) {
      const int j = prev_left[k];
      const int next = match_left[j];
      match_left[j] = k;
      match_right[k] = j;
      if (j == s) break;
      k = next;
    }
  }

  MatchSet m;
  for (int i = 0; i < n1; ++i) {
    if (match_left[i] >= 0 && match_left[i] < n2) {
      m.pairs.emplace_back(i, match_left[i]);
    }
  }
  return m;
}

MatchSet combine(const AlignmentMatrix& t_wl, const AlignmentMatrix& t_gw,
                 int r, EnsembleMode mode) {
  if (r < 1) throw std::invalid_argument("combine: r must be >= 1");
  const int n2 = static_cast<int>(t_gw.cols());
  const Eigen::MatrixXd weights = ensemble_weights(t_wl, t_gw, mode);
  const WeightedBipartite b = build_bipartite(weights, t_gw, std::min(r, n2));
  return max_weight_matching(b);
}

}  // namespace combalign
