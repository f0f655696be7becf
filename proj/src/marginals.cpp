#include "combalign/marginals.hpp"

#include <stdexcept>

namespace combalign {

Marginals marginals_from_alignment(const AlignmentMatrix& t) {
  if (t.minCoeff() < 0.0) {
    throw std::invalid_argument("alignment prior has negative entries");
  }
  if (!(t.sum() > 0.0)) {
    throw std::invalid_argument("alignment prior has zero total mass");
  }
  Marginals m;
  m.mu = t.rowwise().sum();
  m.nu = t.colwise().sum().transpose();
  return m;
}

Marginals uniform_marginals(int n1, int n2) {
  if (n1 < 1 || n2 < 1) {
    throw std::invalid_argument("marginal sizes must be >= 1");
  }
  Marginals m;
  m.mu = Eigen::VectorXd::Constant(n1, 1.0 / n1);
  m.nu = Eigen::VectorXd::Constant(n2, 1.0 / n2);
  return m;
}

std::optional<Marginals> adaptive_marginals(const Embedding& zs,
                                            const Embedding& zt) {
  if (zs.matrix.cols() != zt.matrix.cols()) {
    throw std::invalid_argument("adaptive_marginals: embedding dims differ");
  }
  bool degenerate = false;
  Eigen::MatrixXd t = normalize_similarity(
      row_l2_normalized(zs.matrix) * row_l2_normalized(zt.matrix).transpose(),
      &degenerate);
  if (degenerate) return std::nullopt;
  return marginals_from_alignment(t);
}

void floor_and_renormalize(Marginals& m, double eps) {
  m.mu = m.mu.cwiseMax(eps);
  m.nu = m.nu.cwiseMax(eps);
  m.mu /= m.mu.sum();
  m.nu /= m.nu.sum();
}

}  // namespace combalign
