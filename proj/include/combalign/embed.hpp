#ifndef COMBALIGN_EMBED_HPP
#define COMBALIGN_EMBED_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "combalign/graph.hpp"

namespace combalign {

/// n1 x n2 matrix of matching probabilities (or unnormalized scores).
using AlignmentMatrix = Eigen::MatrixXd;

enum class GnnKind { LightweightGcn, Gcn };

enum class EmbeddingSource { Learnable, ParameterFree, PropagationOnly };

/// Transformation matrices for feature propagation. For Gcn, mats holds K
/// matrices (d_in x d, then d x d). For LightweightGcn, a single matrix of
/// shape (K+1)*d_in x d applied to the concatenated propagation powers.
struct GnnParams {
  GnnKind kind = GnnKind::Gcn;
  int layers = 3;
  std::vector<Eigen::MatrixXd> mats;
  bool learnable = false;

  int input_dim() const;
  int output_dim() const;
};

struct Embedding {
  Eigen::MatrixXd matrix;  // n x d
  EmbeddingSource source = EmbeddingSource::Learnable;
};

/// Gcn: Z^(0) = X, Z^(k) = ReLU(P Z^(k-1) W^(k)), returns sum of all layers.
/// LightweightGcn: Concat(X, PX, ..., P^K X) W, no nonlinearity.
Embedding feat_prop_trans(const Graph& g, const GnnParams& params);

/// Non-learnable hash-style parameters drawn i.i.d. Gaussian with standard
/// deviation 1/sqrt(d).
GnnParams random_wl_params(int d_in, int d, int layers, std::uint64_t seed);

/// Rows scaled to unit L2 norm; zero rows stay zero.
Eigen::MatrixXd row_l2_normalized(const Eigen::MatrixXd& m);

/// ReLU followed by division by the global sum, so entries are nonnegative
/// and sum to 1. A zero-sum input is degenerate: returns the uniform matrix
/// and sets *degenerate when provided.
Eigen::MatrixXd normalize_similarity(const Eigen::MatrixXd& scores,
                                     bool* degenerate = nullptr);

/// WL-then-Inner-Product: propagates both graphs through shared random
/// parameters and returns Norm(H_s H_t^T). Falls back to the uniform matrix
/// with a warning when the similarity is identically zero.
AlignmentMatrix wl_alignment(const Graph& gs, const Graph& gt, int layers,
                             std::uint64_t seed, int dim = 32);

}  // namespace combalign

#endif  // COMBALIGN_EMBED_HPP
