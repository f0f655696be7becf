#ifndef COMBALIGN_MARGINALS_HPP
#define COMBALIGN_MARGINALS_HPP

#include <optional>

#include <Eigen/Dense>

#include "combalign/embed.hpp"

namespace combalign {

/// Probability vectors over the two node sets; mu.sum() == nu.sum().
struct Marginals {
  Eigen::VectorXd mu;
  Eigen::VectorXd nu;
};

/// Row/column sums of an alignment prior: mu = T 1, nu = T^T 1.
/// Throws on zero total mass (degenerate prior).
Marginals marginals_from_alignment(const AlignmentMatrix& t);

Marginals uniform_marginals(int n1, int n2);

/// Marginals recomputed from the current learnable embeddings via
/// Norm(Z_s Z_t^T). Returns nullopt when the similarity is identically zero,
/// in which case the caller keeps the previous marginals.
std::optional<Marginals> adaptive_marginals(const Embedding& zs,
                                            const Embedding& zt);

/// Floors entries at eps and rescales each vector to sum to 1; applied before
/// Sinkhorn so no scaling division can hit zero.
void floor_and_renormalize(Marginals& m, double eps = 1e-12);

}  // namespace combalign

#endif  // COMBALIGN_MARGINALS_HPP
