#include "combalign/embed.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace combalign {

int GnnParams::input_dim() const {
  if (mats.empty()) return 0;
  const int rows = static_cast<int>(mats[0].rows());
  return kind == GnnKind::LightweightGcn ? rows / (layers + 1) : rows;
}

int GnnParams::output_dim() const {
  return mats.empty() ? 0 : static_cast<int>(mats[0].cols());
}

namespace {

void check_shapes(const Graph& g, const GnnParams& params) {
  const int d_in = g.feature_dim();
  if (params.layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (params.kind == GnnKind::LightweightGcn) {
    if (params.mats.size() != 1) {
      throw std::invalid_argument("lightweight-gcn expects a single matrix");
    }
    if (params.mats[0].rows() !=
        static_cast<Eigen::Index>(params.layers + 1) * d_in) {
      throw std::invalid_argument(
          "lightweight-gcn matrix rows must be (K+1)*d_in");
    }
    return;
  }
  if (static_cast<int>(params.mats.size()) != params.layers) {
    throw std::invalid_argument("gcn expects one matrix per layer");
  }
  Eigen::Index prev = d_in;
  for (const auto& w : params.mats) {
    if (w.rows() != prev) {
      throw std::invalid_argument("transformation matrix shapes do not chain");
    }
    prev = w.cols();
  }
}

}  // namespace

Embedding feat_prop_trans(const Graph& g, const GnnParams& params) {
  check_shapes(g, params);
  const Eigen::SparseMatrix<double> p = normalized_adjacency_sparse(g);

  Eigen::MatrixXd z;
  if (params.kind == GnnKind::LightweightGcn) {
    const int d_in = g.feature_dim();
    Eigen::MatrixXd concat(g.n, (params.layers + 1) * d_in);
    Eigen::MatrixXd power = g.features;
    concat.leftCols(d_in) = power;
    for (int k = 1; k <= params.layers; ++k) {
      power = p * power;
      concat.middleCols(k * d_in, d_in) = power;
    }
    z = concat * params.mats[0];
  } else {
    Eigen::MatrixXd layer = g.features;
    z = Eigen::MatrixXd::Zero(g.n, params.output_dim());
    for (int k = 0; k < params.layers; ++k) {
      layer = ((p * layer) * params.mats[k]).cwiseMax(0.0);
      z += layer;
    }
  }
  if (!z.allFinite()) {
    throw std::runtime_error("non-finite embedding output");
  }
  Embedding out;
  out.matrix = std::move(z);
  out.source = params.learnable ? EmbeddingSource::Learnable
                                : EmbeddingSource::ParameterFree;
  return out;
}

// Signed weights are essential here: all-positive hash matrices collapse the
// inner products towards the high-degree rows and the argmax stops tracking
// the true correspondence.
GnnParams random_wl_params(int d_in, int d, int layers, std::uint64_t seed) {
  if (d_in < 1 || d < 1 || layers < 1) {
    throw std::invalid_argument("random_wl_params: dims and layers must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(double(d)));

  GnnParams params;
  params.kind = GnnKind::Gcn;
  params.layers = layers;
  params.learnable = false;
  for (int k = 0; k < layers; ++k) {
    const int rows = (k == 0) ? d_in : d;
    Eigen::MatrixXd w(rows, d);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) w(i, j) = gauss(rng);
    params.mats.push_back(std::move(w));
  }
  return params;
}

Eigen::MatrixXd row_l2_normalized(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double nrm = m.row(i).norm();
    if (nrm > 0.0) out.row(i) /= nrm;
  }
  return out;
}

Eigen::MatrixXd normalize_similarity(const Eigen::MatrixXd& scores,
                                     bool* degenerate) {
  Eigen::MatrixXd s = scores.cwiseMax(0.0);
  const double total = s.sum();
  if (degenerate) *degenerate = !(total > 0.0);
  if (!(total > 0.0)) {
    return Eigen::MatrixXd::Constant(
        scores.rows(), scores.cols(),
        1.0 / (static_cast<double>(scores.rows()) * scores.cols()));
  }
  return s / total;
}

AlignmentMatrix wl_alignment(const Graph& gs, const Graph& gt, int layers,
                             std::uint64_t seed, int dim) {
  if (gs.feature_dim() != gt.feature_dim()) {
    throw std::invalid_argument("wl_alignment: feature dimensions differ");
  }
  GnnParams params = random_wl_params(gs.feature_dim(), dim, layers, seed);
  const Embedding hs = feat_prop_trans(gs, params);
  const Embedding ht = feat_prop_trans(gt, params);
  // Cosine-style similarity: without the row normalization the inner
  // products track embedding norms (hub nodes win every row).
  bool degenerate = false;
  AlignmentMatrix t = normalize_similarity(
      row_l2_normalized(hs.matrix) * row_l2_normalized(ht.matrix).transpose(),
      &degenerate);
  if (degenerate) {
    std::cerr << "warning: WL similarity is identically zero; "
                 "falling back to the uniform prior\n";
  }
  return t;
}

}  // namespace combalign
