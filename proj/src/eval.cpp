#include "combalign/eval.hpp"

#include <cstdio>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace combalign {

namespace {

int argmax_row(const AlignmentMatrix& t, int u) {
  int best = 0;
  for (int k = 1; k < t.cols(); ++k) {
    if (t(u, k) > t(u, best)) best = k;
  }
  return best;
}

int argmax_col(const AlignmentMatrix& t, int k) {
  int best = 0;
  for (int u = 1; u < t.rows(); ++u) {
    if (t(u, k) > t(best, k)) best = u;
  }
  return best;
}

void check_anchor(const AlignmentMatrix& t, int u, int v) {
  if (u < 0 || u >= t.rows() || v < 0 || v >= t.cols()) {
    throw std::out_of_range("anchor (" + std::to_string(u) + ", " +
                            std::to_string(v) + ") out of range");
  }
}

std::string format_pairs(const MetricsReport& r, const char* sep) {
  std::string out;
  char buf[64];
  for (const auto& [k, val] : r.hits) {
    std::snprintf(buf, sizeof(buf), "hits@%d=%.6f%s", k, val, sep);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "map=%.6f%s", r.map_score, sep);
  out += buf;
  std::snprintf(buf, sizeof(buf), "one_to_many_ratio=%.6f%s",
                r.one_to_many_ratio, sep);
  out += buf;
  std::snprintf(buf, sizeof(buf), "mutual_inconsistency_ratio=%.6f",
                r.mutual_inconsistency_ratio);
  out += buf;
  return out;
}

}  // namespace

int rank_of(const AlignmentMatrix& t, int u, int v) {
  check_anchor(t, u, v);
  const double val = t(u, v);
  int rank = 1;
  for (int k = 0; k < t.cols(); ++k) {
    if (k == v) continue;
    if (t(u, k) > val || (t(u, k) == val && k < v)) ++rank;
  }
  return rank;
}

double hits_at_k(const AlignmentMatrix& t, const GroundTruth& gt, int k) {
  if (k < 1 || k > t.cols()) {
    throw std::out_of_range("hits_at_k: k must be in [1, n2]");
  }
  if (gt.pairs.empty()) throw std::invalid_argument("hits_at_k: empty anchors");
  int hit = 0;
  for (auto [u, v] : gt.pairs) {
    if (rank_of(t, u, v) <= k) ++hit;
  }
  return static_cast<double>(hit) / gt.pairs.size();
}

double hits_at_k(const MatchSet& m, const GroundTruth& gt, int k) {
  if (k != 1) {
    throw std::out_of_range("hits_at_k: a match set defines only k=1");
  }
  if (gt.pairs.empty()) throw std::invalid_argument("hits_at_k: empty anchors");
  std::unordered_map<int, int> pred;
  for (auto [u, v] : m.pairs) pred[u] = v;
  int hit = 0;
  for (auto [u, v] : gt.pairs) {
    auto it = pred.find(u);
    if (it != pred.end() && it->second == v) ++hit;
  }
  return static_cast<double>(hit) / gt.pairs.size();
}

double mean_average_precision(const AlignmentMatrix& t, const GroundTruth& gt) {
  if (gt.pairs.empty()) {
    throw std::invalid_argument("mean_average_precision: empty anchors");
  }
  double total = 0.0;
  for (auto [u, v] : gt.pairs) total += 1.0 / rank_of(t, u, v);
  return total / gt.pairs.size();
}

double one_to_many_ratio(const AlignmentMatrix& t) {
  const int n1 = static_cast<int>(t.rows());
  if (n1 == 0) return 0.0;
  std::vector<int> pred(n1);
  std::unordered_map<int, int> claims;
  for (int u = 0; u < n1; ++u) {
    pred[u] = argmax_row(t, u);
    ++claims[pred[u]];
  }
  int shared = 0;
  for (int u = 0; u < n1; ++u) {
    if (claims[pred[u]] > 1) ++shared;
  }
  return static_cast<double>(shared) / n1;
}

double one_to_many_ratio(const MatchSet& m) {
  if (m.pairs.empty()) return 0.0;
  std::unordered_map<int, int> claims;
  for (auto [u, v] : m.pairs) ++claims[v];
  int shared = 0;
  for (auto [u, v] : m.pairs) {
    if (claims[v] > 1) ++shared;
  }
  return static_cast<double>(shared) / m.pairs.size();
}

double mutual_inconsistency_ratio(const AlignmentMatrix& t) {
  const int n1 = static_cast<int>(t.rows());
  if (n1 == 0) return 0.0;
  int inconsistent = 0;
  for (int u = 0; u < n1; ++u) {
    if (argmax_col(t, argmax_row(t, u)) != u) ++inconsistent;
  }
  return static_cast<double>(inconsistent) / n1;
}

double mutual_inconsistency_ratio(const MatchSet& m) {
  if (m.pairs.empty()) return 0.0;
  std::unordered_map<int, int> back;  // target -> first matched source
  for (auto [u, v] : m.pairs) {
    if (!back.count(v)) back[v] = u;
  }
  int inconsistent = 0;
  for (auto [u, v] : m.pairs) {
    if (back[v] != u) ++inconsistent;
  }
  return static_cast<double>(inconsistent) / m.pairs.size();
}

MatchSet constrained_predictions(const AlignmentMatrix& t) {
  const int n1 = static_cast<int>(t.rows());
  std::unordered_map<int, int> winner;  // target -> best source
  std::vector<int> pred(n1);
  for (int u = 0; u < n1; ++u) {
    pred[u] = argmax_row(t, u);
    auto it = winner.find(pred[u]);
    if (it == winner.end() || t(u, pred[u]) > t(it->second, pred[u])) {
      winner.insert_or_assign(pred[u], u);
    }
  }
  MatchSet m;
  for (int u = 0; u < n1; ++u) {
    if (winner[pred[u]] == u) m.pairs.emplace_back(u, pred[u]);
  }
  return m;
}

MetricsReport evaluate_alignment(const AlignmentMatrix& t,
                                 const GroundTruth& gt) {
  MetricsReport r;
  for (int k : {1, 5, 10}) {
    if (k <= t.cols()) r.hits[k] = hits_at_k(t, gt, k);
  }
  r.map_score = mean_average_precision(t, gt);
  r.one_to_many_ratio = one_to_many_ratio(t);
  r.mutual_inconsistency_ratio = mutual_inconsistency_ratio(t);
  return r;
}

MetricsReport evaluate_matchset(const MatchSet& m, const GroundTruth& gt) {
  MetricsReport r;
  r.hits[1] = hits_at_k(m, gt, 1);
  r.map_score = r.hits[1];  // a matching carries only rank-1 predictions
  r.one_to_many_ratio = one_to_many_ratio(m);
  r.mutual_inconsistency_ratio = mutual_inconsistency_ratio(m);
  return r;
}

std::string format_metrics_block(const MetricsReport& r) {
  return format_pairs(r, "\n") + "\n";
}

std::string format_metrics_line(const MetricsReport& r) {
  return format_pairs(r, " ");
}

}  // namespace combalign
