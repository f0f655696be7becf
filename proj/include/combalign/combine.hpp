#ifndef COMBALIGN_COMBINE_HPP
#define COMBALIGN_COMBINE_HPP

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "combalign/embed.hpp"

namespace combalign {

struct BipartiteEdge {
  int source = 0;
  int target = 0;
  double weight = 0.0;
};

/// Bipartite graph over the two node sets with at most r edges per source.
struct WeightedBipartite {
  int n1 = 0;
  int n2 = 0;
  std::vector<BipartiteEdge> edges;
};

/// Disjoint (source, target) pairs; one-to-one and mutual by construction
/// when produced by max_weight_matching.
struct MatchSet {
  std::vector<std::pair<int, int>> pairs;
};

bool is_one_to_one(const MatchSet& m);

enum class EnsembleMode { Product, Average };

/// Element-wise product ("both confident", default) or simple average of the
/// two alignment matrices.
Eigen::MatrixXd ensemble_weights(const AlignmentMatrix& t_wl,
                                 const AlignmentMatrix& t_gw,
                                 EnsembleMode mode);

/// Keeps, for each source, the r targets with largest T_GW entries (ties to
/// the lower target index); edge weights come from the ensemble matrix.
WeightedBipartite build_bipartite(const Eigen::MatrixXd& weights,
                                  const AlignmentMatrix& t_gw, int r);

/// Exact maximum-weight matching on the sparse bipartite graph via shortest
/// augmenting paths with dual potentials. Sources may stay unmatched when
/// that does not reduce the total weight; ties resolve to lower indices.
MatchSet max_weight_matching(const WeightedBipartite& b);

/// Full combine step: ensemble weights, top-r pruning, matching.
MatchSet combine(const AlignmentMatrix& t_wl, const AlignmentMatrix& t_gw,
                 int r, EnsembleMode mode = EnsembleMode::Product);

}  // namespace combalign

#endif  // COMBALIGN_COMBINE_HPP
