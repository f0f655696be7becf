#ifndef COMBALIGN_GRAPH_HPP
#define COMBALIGN_GRAPH_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace combalign {

/// Undirected attributed graph. Edges are stored once each with
/// source < target; self-loops are dropped on construction.
struct Graph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd features;  // n x d_in

  int num_edges() const { return static_cast<int>(edges.size()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  Eigen::MatrixXd dense_adjacency() const;
  Eigen::SparseMatrix<double> sparse_adjacency() const;
};

/// One-to-one ground-truth correspondences (source id, target id).
struct GroundTruth {
  std::vector<std::pair<int, int>> pairs;
};

struct SyntheticPair {
  Graph source;
  Graph target;
  GroundTruth truth;
};

/// Builds a graph from an explicit edge list; validates endpoints,
/// deduplicates undirected edges and drops self-loops.
Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                 const Eigen::MatrixXd& features);

// File formats:
//   edge file:    one edge per line "src<TAB>dst", 0-based ids, '#' comments
//   feature file: header "n d_in", then n rows of d_in floats
//   anchor file:  one pair per line "src<TAB>dst"
Graph load_graph(const std::string& edge_path, const std::string& feature_path);
void save_graph(const Graph& g, const std::string& edge_path,
                const std::string& feature_path);

GroundTruth load_anchors(const std::string& path);
void save_anchors(const GroundTruth& gt, const std::string& path);

// Dense float text format shared by feature files and alignment-matrix dumps.
Eigen::MatrixXd load_dense_matrix(const std::string& path);
void save_dense_matrix(const Eigen::MatrixXd& m, const std::string& path);

/// Symmetrically normalized adjacency with self-loops,
/// P = D^{-1/2} (A + I) D^{-1/2}.
Eigen::MatrixXd normalized_adjacency(const Graph& g);

/// Normalized adjacency in sparse form (same entries as the dense variant).
Eigen::SparseMatrix<double> normalized_adjacency_sparse(const Graph& g);

/// Produces a noisy copy of g under a uniformly random node permutation:
/// each edge is removed with probability p_edge, an equal expected number of
/// random non-edges is added, and each feature entry is resampled from its
/// column's empirical distribution with probability p_feat. The returned
/// ground truth is the permutation. Deterministic given seed.
SyntheticPair gen_synthetic_pair(const Graph& g, double p_edge, double p_feat,
                                 std::uint64_t seed);

}  // namespace combalign

#endif  // COMBALIGN_GRAPH_HPP
