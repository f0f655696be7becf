#include "combalign/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace combalign {

namespace {

std::uint64_t edge_key(int u, int v) {
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint32_t>(v);
}

std::vector<std::pair<int, int>> canonicalize_edges(
    int n, const std::vector<std::pair<int, int>>& edges) {
  std::set<std::pair<int, int>> dedup;
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw std::out_of_range("edge endpoint (" + std::to_string(u) + ", " +
                              std::to_string(v) + ") out of range for n=" +
                              std::to_string(n));
    }
    if (u == v) continue;
    dedup.emplace(std::min(u, v), std::max(u, v));
  }
  return {dedup.begin(), dedup.end()};
}

// Prints a double with enough digits to round-trip bit-identically.
void print_double(std::FILE* f, double x) { std::fprintf(f, "%.17g", x); }

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_for_write(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

}  // namespace

Eigen::MatrixXd Graph::dense_adjacency() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (auto [u, v] : edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

Eigen::SparseMatrix<double> Graph::sparse_adjacency() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * edges.size());
  for (auto [u, v] : edges) {
    trips.emplace_back(u, v, 1.0);
    trips.emplace_back(v, u, 1.0);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                 const Eigen::MatrixXd& features) {
  if (n < 0) throw std::invalid_argument("negative node count");
  if (features.rows() != n) {
    throw std::invalid_argument("feature row count " +
                                std::to_string(features.rows()) +
                                " does not match node count " +
                                std::to_string(n));
  }
  Graph g;
  g.n = n;
  g.edges = canonicalize_edges(n, edges);
  g.features = features;
  return g;
}

Graph load_graph(const std::string& edge_path,
                 const std::string& feature_path) {
  Eigen::MatrixXd feats = load_dense_matrix(feature_path);
  const int n = static_cast<int>(feats.rows());

  std::ifstream in(edge_path);
  if (!in) throw std::runtime_error("cannot open edge file: " + edge_path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long long u, v;
    if (!(ls >> u >> v)) {
      throw std::runtime_error(edge_path + ": line " + std::to_string(lineno) +
                               ": expected \"src<TAB>dst\"");
    }
    std::string rest;
    if (ls >> rest) {
      throw std::runtime_error(edge_path + ": line " + std::to_string(lineno) +
                               ": trailing content \"" + rest + "\"");
    }
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw std::out_of_range(edge_path + ": line " + std::to_string(lineno) +
                              ": endpoint out of range for n=" +
                              std::to_string(n));
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  return make_graph(n, edges, feats);
}

void save_graph(const Graph& g, const std::string& edge_path,
                const std::string& feature_path) {
  auto f = open_for_write(edge_path);
  for (auto [u, v] : g.edges) std::fprintf(f.get(), "%d\t%d\n", u, v);
  f.reset();
  save_dense_matrix(g.features, feature_path);
}

GroundTruth load_anchors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open anchor file: " + path);
  GroundTruth gt;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    int u, v;
    if (!(ls >> u >> v)) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": expected \"src<TAB>dst\"");
    }
    gt.pairs.emplace_back(u, v);
  }
  return gt;
}

void save_anchors(const GroundTruth& gt, const std::string& path) {
  auto f = open_for_write(path);
  for (auto [u, v] : gt.pairs) std::fprintf(f.get(), "%d\t%d\n", u, v);
}

Eigen::MatrixXd load_dense_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path + ": missing \"rows cols\" header");
  }
  std::istringstream hdr(line);
  long long rows, cols;
  if (!(hdr >> rows >> cols) || rows < 0 || cols < 0) {
    throw std::runtime_error(path + ": line 1: malformed \"rows cols\" header");
  }
  Eigen::MatrixXd m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw std::runtime_error(path + ": expected " + std::to_string(rows) +
                               " rows, got " + std::to_string(i));
    }
    std::istringstream ls(line);
    for (long long j = 0; j < cols; ++j) {
      double x;
      if (!(ls >> x)) {
        throw std::runtime_error(path + ": line " + std::to_string(i + 2) +
                                 ": expected " + std::to_string(cols) +
                                 " values");
      }
      m(i, j) = x;
    }
  }
  return m;
}

void save_dense_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  auto f = open_for_write(path);
  std::fprintf(f.get(), "%lld %lld\n", static_cast<long long>(m.rows()),
               static_cast<long long>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) std::fputc(' ', f.get());
      print_double(f.get(), m(i, j));
    }
    std::fputc('\n', f.get());
  }
}

Eigen::MatrixXd normalized_adjacency(const Graph& g) {
  return Eigen::MatrixXd(normalized_adjacency_sparse(g));
}

Eigen::SparseMatrix<double> normalized_adjacency_sparse(const Graph& g) {
  Eigen::VectorXd deg = Eigen::VectorXd::Ones(g.n);  // A + I row sums
  for (auto [u, v] : g.edges) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * g.edges.size() + g.n);
  for (int i = 0; i < g.n; ++i) trips.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (auto [u, v] : g.edges) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  Eigen::SparseMatrix<double> p(g.n, g.n);
  p.setFromTriplets(trips.begin(), trips.end());
  return p;
}

SyntheticPair gen_synthetic_pair(const Graph& g, double p_edge, double p_feat,
                                 std::uint64_t seed) {
  if (p_edge < 0.0 || p_edge > 1.0 || p_feat < 0.0 || p_feat > 1.0) {
    throw std::invalid_argument("perturbation probabilities must be in [0,1]");
  }
  std::mt19937_64 rng(seed);
  const int n = g.n;

  // Random node permutation: source node i becomes target node perm[i].
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Relabel, then drop each edge independently.
  std::unordered_set<std::uint64_t> present;
  std::vector<std::pair<int, int>> kept;
  for (auto [u, v] : g.edges) {
    int a = perm[u], b = perm[v];
    if (a > b) std::swap(a, b);
    present.insert(edge_key(a, b));
    if (unit(rng) >= p_edge) kept.emplace_back(a, b);
  }

  // Add Binomial(m, p_edge)-many random non-edges, matching the expected
  // number of removals.
  int to_add = 0;
  std::binomial_distribution<int> binom(g.num_edges(), p_edge);
  if (p_edge > 0.0 && g.num_edges() > 0) to_add = binom(rng);
  const long long max_edges = static_cast<long long>(n) * (n - 1) / 2;
  to_add = static_cast<int>(std::min<long long>(
      to_add, max_edges - static_cast<long long>(present.size())));
  std::uniform_int_distribution<int> node(0, n > 0 ? n - 1 : 0);
  while (to_add > 0) {
    int a = node(rng), b = node(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!present.insert(edge_key(a, b)).second) continue;
    kept.emplace_back(a, b);
    --to_add;
  }

  // Permute feature rows, then resample perturbed entries from the empirical
  // distribution of their column.
  Eigen::MatrixXd feats(n, g.features.cols());
  for (int i = 0; i < n; ++i) feats.row(perm[i]) = g.features.row(i);
  if (p_feat > 0.0 && n > 0) {
    std::uniform_int_distribution<int> row(0, n - 1);
    for (int i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < feats.cols(); ++j) {
        if (unit(rng) < p_feat) feats(i, j) = g.features(row(rng), j);
      }
    }
  }

  SyntheticPair out;
  out.source = g;
  out.target = make_graph(n, kept, feats);
  out.truth.pairs.reserve(n);
  for (int i = 0; i < n; ++i) out.truth.pairs.emplace_back(i, perm[i]);
  return out;
}

}  // namespace combalign
