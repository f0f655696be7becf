#ifndef COMBALIGN_GW_HPP
#define COMBALIGN_GW_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "combalign/embed.hpp"
#include "combalign/graph.hpp"
#include "combalign/marginals.hpp"

namespace combalign {

/// Mixing coefficients of the multi-view intra-graph cost; each vector lives
/// on the probability simplex.
struct CostCoefficients {
  Eigen::Vector3d beta_s = Eigen::Vector3d::Constant(1.0 / 3.0);
  Eigen::Vector3d beta_t = Eigen::Vector3d::Constant(1.0 / 3.0);
};

enum class CostMode { MultiView, AdjacencySparse };
enum class GradMode { Analytic, FiniteDifference };

struct GwConfig {
  int outer_iters = 50;        // I
  int ot_iters = 2;            // I_ot, proximal rounds per outer iteration
  int sinkhorn_iters = 10000;  // J, scaling-sweep cap per proximal round
  double sinkhorn_tol = 1e-12;  // early exit once the column residual drops
  double tau_t = 0.5;  // proximal temperature, relative to the mean cost
  double tau_beta = 1.0;    // learning rate for beta
  double tau_w = 0.01;      // learning rate for the transformation matrices
  CostMode cost_mode = CostMode::MultiView;
  GradMode grad_mode = GradMode::Analytic;
  bool log_domain = false;        // stabilized Sinkhorn for small tau_t
  bool grad_self_check = false;   // cross-check analytic vs finite differences
  bool adaptive_marginals = false;
};

/// Learnable parameters Theta = {beta, transformation matrices}.
struct GwParams {
  CostCoefficients coeffs;
  GnnParams gnn;
};

struct ThetaGradients {
  Eigen::Vector3d beta_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d beta_t = Eigen::Vector3d::Zero();
  std::vector<Eigen::MatrixXd> mats;
};

struct GraftResult {
  AlignmentMatrix t_gw;
  std::vector<double> objective;  // one entry per outer iteration
  GwParams theta;
};

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// ReLU followed by column-wise normalization; a column that becomes all-zero
/// is reset to uniform.
void project_columns(Eigen::MatrixXd& w);

/// Multi-view intra-graph cost beta1*A + beta2*XX^T + beta3*ZZ^T with X and Z
/// row-L2-normalized before the outer products.
Eigen::MatrixXd intra_cost(const Graph& g, const Embedding& z,
                           const Eigen::Vector3d& beta);

/// Inter-graph transport cost in the factored O(n^3) form; equals the direct
/// quadruple sum for any transport plan t. Warns when t's marginals drift
/// from marg.
Eigen::MatrixXd inter_cost(const Eigen::MatrixXd& cs,
                           const Eigen::MatrixXd& ct, const AlignmentMatrix& t,
                           const Marginals& marg);

/// Sparse adjacency-only inter cost (cost_mode=adjacency-sparse).
Eigen::MatrixXd inter_cost_adjacency(const Graph& gs, const Graph& gt,
                                     const AlignmentMatrix& t);

/// <C_gwd, T>, clamped at zero against rounding.
double gwd_objective(const Eigen::MatrixXd& cs, const Eigen::MatrixXd& ct,
                     const AlignmentMatrix& t);

/// Objective evaluated from scratch at the given parameters (forward pass
/// only); shared by the finite-difference oracle and the trajectory.
double gw_objective_at(const Graph& gs, const Graph& gt,
                       const AlignmentMatrix& t, const GwParams& theta);

/// I_ot KL-proximal rounds, each solved by J Sinkhorn sweeps. Returned plan
/// has row sums mu and column sums nu within tolerance for the default J.
AlignmentMatrix sinkhorn_proximal_step(const Eigen::MatrixXd& c_gwd,
                                       const AlignmentMatrix& t_prev,
                                       const Marginals& marg,
                                       const GwConfig& cfg);

/// Analytic gradients of the objective w.r.t. beta and the shared
/// transformation matrices, with the transport plan held fixed.
ThetaGradients gw_gradients(const Graph& gs, const Graph& gt,
                            const AlignmentMatrix& t, const GwParams& theta);

/// Central-difference gradients; reserved for tiny instances.
ThetaGradients gw_gradients_fd(const Graph& gs, const Graph& gt,
                               const AlignmentMatrix& t, const GwParams& theta,
                               double step = 1e-5);

/// One projected gradient step on Theta with T held fixed.
void update_params(const Graph& gs, const Graph& gt, const AlignmentMatrix& t,
                   GwParams& theta, const GwConfig& cfg);

/// Seeded uniform transformation matrices projected into the feasible set.
GnnParams init_learnable_params(GnnKind kind, int d_in, int d, int layers,
                                std::uint64_t seed);

/// The full GW learning loop: alternates cost computation, parameter updates
/// and proximal transport updates from T = mu nu^T.
GraftResult graft(const Graph& gs, const Graph& gt, const Marginals& marg,
                  const GwConfig& cfg, std::uint64_t seed, int dim = 32,
                  GnnKind kind = GnnKind::Gcn, int layers = 3);

}  // namespace combalign

#endif  // COMBALIGN_GW_HPP
