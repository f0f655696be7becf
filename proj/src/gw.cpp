#include "combalign/gw.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <stdexcept>

namespace combalign {

namespace {

constexpr double kScalingFloor = 1e-30;
constexpr double kMarginalWarnTol = 1e-4;

void check_config(const GwConfig& cfg) {
  if (cfg.outer_iters < 1 || cfg.ot_iters < 1 || cfg.sinkhorn_iters < 1) {
    throw std::invalid_argument("iteration counts must be >= 1");
  }
  if (!(cfg.tau_t > 0.0) || !(cfg.tau_beta > 0.0) || !(cfg.tau_w > 0.0)) {
    throw std::invalid_argument("step sizes must be > 0");
  }
}

double frobenius_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

// Forward pass retaining what backprop needs.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> prop_in;  // P Z^(k-1), gcn only
  std::vector<Eigen::MatrixXd> pre;      // pre-activations, gcn only
  Eigen::MatrixXd concat;                // lightweight-gcn only
  Eigen::MatrixXd z;
};

ForwardTrace forward_trace(const Graph& g, const GnnParams& params) {
  ForwardTrace tr;
  const Eigen::SparseMatrix<double> p = normalized_adjacency_sparse(g);
  if (params.kind == GnnKind::LightweightGcn) {
    const int d_in = g.feature_dim();
    tr.concat.resize(g.n, (params.layers + 1) * d_in);
    Eigen::MatrixXd power = g.features;
    tr.concat.leftCols(d_in) = power;
    for (int k = 1; k <= params.layers; ++k) {
      power = p * power;
      tr.concat.middleCols(k * d_in, d_in) = power;
    }
    tr.z = tr.concat * params.mats[0];
    return tr;
  }
  Eigen::MatrixXd layer = g.features;
  tr.z = Eigen::MatrixXd::Zero(g.n, params.output_dim());
  for (int k = 0; k < params.layers; ++k) {
    tr.prop_in.push_back(p * layer);
    tr.pre.push_back(tr.prop_in.back() * params.mats[k]);
    layer = tr.pre.back().cwiseMax(0.0);
    tr.z += layer;
  }
  return tr;
}

// Gradient through Z = sum_k ReLU(P Z^(k-1) W^(k)) (or the single linear map
// for lightweight-gcn), accumulated into dmats; P is symmetric.
void gnn_backward(const Graph& g, const GnnParams& params,
                  const ForwardTrace& tr, const Eigen::MatrixXd& dz,
                  std::vector<Eigen::MatrixXd>& dmats) {
  if (params.kind == GnnKind::LightweightGcn) {
    dmats[0].noalias() += tr.concat.transpose() * dz;
    return;
  }
  const Eigen::SparseMatrix<double> p = normalized_adjacency_sparse(g);
  Eigen::MatrixXd delta = dz;
  for (int k = params.layers - 1; k >= 0; --k) {
    const Eigen::MatrixXd mask =
        (tr.pre[k].array() > 0.0).cast<double>().matrix();
    const Eigen::MatrixXd m = delta.cwiseProduct(mask);
    dmats[k].noalias() += tr.prop_in[k].transpose() * m;
    if (k > 0) delta = dz + p * (m * params.mats[k].transpose());
  }
}

Eigen::MatrixXd row_norm_backward(const Eigen::MatrixXd& z,
                                  const Eigen::MatrixXd& zhat,
                                  const Eigen::MatrixXd& dzhat) {
  Eigen::MatrixXd dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double nrm = z.row(i).norm();
    if (nrm == 0.0) {
      dz.row(i).setZero();
    } else {
      const double inner = zhat.row(i).dot(dzhat.row(i));
      dz.row(i) = (dzhat.row(i) - inner * zhat.row(i)) / nrm;
    }
  }
  return dz;
}

Eigen::VectorXd log_sum_exp_cols(const Eigen::MatrixXd& m,
                                 const Eigen::VectorXd& u) {
  Eigen::VectorXd out(m.cols());
  for (Eigen::Index k = 0; k < m.cols(); ++k) {
    const Eigen::VectorXd col = m.col(k) + u;
    const double mx = col.maxCoeff();
    out[k] = mx + std::log((col.array() - mx).exp().sum());
  }
  return out;
}

Eigen::VectorXd log_sum_exp_rows(const Eigen::MatrixXd& m,
                                 const Eigen::VectorXd& v) {
  Eigen::VectorXd out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Eigen::VectorXd row = m.row(i).transpose() + v;
    const double mx = row.maxCoeff();
    out[i] = mx + std::log((row.array() - mx).exp().sum());
  }
  return out;
}

}  // namespace

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0;
  double lambda = 1.0 - u[0];
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    const double candidate = (1.0 - cum) / static_cast<double>(j + 1);
    if (u[j] + candidate > 0.0) lambda = candidate;
  }
  return (v.array() + lambda).max(0.0);
}

void project_columns(Eigen::MatrixXd& w) {
  w = w.cwiseMax(0.0);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    const double s = w.col(j).sum();
    if (s > 0.0) {
      w.col(j) /= s;
    } else {
      w.col(j).setConstant(1.0 / static_cast<double>(w.rows()));
    }
  }
}

Eigen::MatrixXd intra_cost(const Graph& g, const Embedding& z,
                           const Eigen::Vector3d& beta) {
  if (z.matrix.rows() != g.n) {
    throw std::invalid_argument("intra_cost: embedding row count mismatch");
  }
  const Eigen::MatrixXd xhat = row_l2_normalized(g.features);
  const Eigen::MatrixXd zhat = row_l2_normalized(z.matrix);
  Eigen::MatrixXd c = beta[0] * g.dense_adjacency();
  c.noalias() += beta[1] * (xhat * xhat.transpose());
  c.noalias() += beta[2] * (zhat * zhat.transpose());
  return c;
}

Eigen::MatrixXd inter_cost(const Eigen::MatrixXd& cs,
                           const Eigen::MatrixXd& ct, const AlignmentMatrix& t,
                           const Marginals& marg) {
  if (cs.rows() != t.rows() || ct.rows() != t.cols()) {
    throw std::invalid_argument("inter_cost: shape mismatch");
  }
  const Eigen::VectorXd r = t.rowwise().sum();
  const Eigen::VectorXd c = t.colwise().sum().transpose();
  if ((r - marg.mu).lpNorm<Eigen::Infinity>() > kMarginalWarnTol ||
      (c - marg.nu).lpNorm<Eigen::Infinity>() > kMarginalWarnTol) {
    std::cerr << "warning: transport plan marginals drift from (mu, nu)\n";
  }
  const Eigen::VectorXd cs2r = cs.cwiseProduct(cs) * r;
  const Eigen::VectorXd ct2c = ct.cwiseProduct(ct) * c;
  Eigen::MatrixXd out = -2.0 * (cs * t * ct.transpose());
  out.colwise() += cs2r;
  out.rowwise() += ct2c.transpose();
  return out;
}

Eigen::MatrixXd inter_cost_adjacency(const Graph& gs, const Graph& gt,
                                     const AlignmentMatrix& t) {
  if (gs.n != t.rows() || gt.n != t.cols()) {
    throw std::invalid_argument("inter_cost_adjacency: shape mismatch");
  }
  const Eigen::SparseMatrix<double> as = gs.sparse_adjacency();
  const Eigen::SparseMatrix<double> at = gt.sparse_adjacency();
  const Eigen::VectorXd r = t.rowwise().sum();
  const Eigen::VectorXd c = t.colwise().sum().transpose();
  // A has 0/1 entries, so the element-wise square is A itself.
  const Eigen::VectorXd asr = as * r;
  const Eigen::VectorXd atc = at * c;
  const Eigen::MatrixXd ast = as * t;
  Eigen::MatrixXd out = -2.0 * (ast * at);
  out.colwise() += asr;
  out.rowwise() += atc.transpose();
  return out;
}

double gwd_objective(const Eigen::MatrixXd& cs, const Eigen::MatrixXd& ct,
                     const AlignmentMatrix& t) {
  if (cs.rows() != t.rows() || ct.rows() != t.cols()) {
    throw std::invalid_argument("gwd_objective: shape mismatch");
  }
  const Eigen::VectorXd r = t.rowwise().sum();
  const Eigen::VectorXd c = t.colwise().sum().transpose();
  const double quad = r.dot(cs.cwiseProduct(cs) * r) +
                      c.dot(ct.cwiseProduct(ct) * c) -
                      2.0 * frobenius_inner(cs * t * ct.transpose(), t);
  return std::max(quad, 0.0);
}

double gw_objective_at(const Graph& gs, const Graph& gt,
                       const AlignmentMatrix& t, const GwParams& theta) {
  const Embedding zs = feat_prop_trans(gs, theta.gnn);
  const Embedding zt = feat_prop_trans(gt, theta.gnn);
  return gwd_objective(intra_cost(gs, zs, theta.coeffs.beta_s),
                       intra_cost(gt, zt, theta.coeffs.beta_t), t);
}

AlignmentMatrix sinkhorn_proximal_step(const Eigen::MatrixXd& c_gwd,
                                       const AlignmentMatrix& t_prev,
                                       const Marginals& marg,
                                       const GwConfig& cfg) {
  if (t_prev.rows() != c_gwd.rows() || t_prev.cols() != c_gwd.cols() ||
      marg.mu.size() != t_prev.rows() || marg.nu.size() != t_prev.cols()) {
    throw std::invalid_argument("sinkhorn_proximal_step: shape mismatch");
  }
  if (cfg.ot_iters < 1 || cfg.sinkhorn_iters < 1 || !(cfg.tau_t > 0.0)) {
    throw std::invalid_argument("sinkhorn_proximal_step: invalid config");
  }

  Eigen::MatrixXd t = t_prev.cwiseMax(kScalingFloor);

  if (cfg.log_domain) {
    const Eigen::MatrixXd log_kernel = -c_gwd / cfg.tau_t;
    const Eigen::VectorXd log_mu =
        marg.mu.cwiseMax(kScalingFloor).array().log();
    const Eigen::VectorXd log_nu =
        marg.nu.cwiseMax(kScalingFloor).array().log();
    Eigen::MatrixXd log_t = t.array().log();
    for (int round = 0; round < cfg.ot_iters; ++round) {
      const Eigen::MatrixXd log_g = log_kernel + log_t;
      Eigen::VectorXd u = log_mu;
      Eigen::VectorXd v = Eigen::VectorXd::Zero(t.cols());
      for (int j = 0; j < cfg.sinkhorn_iters; ++j) {
        const Eigen::VectorXd lse_c = log_sum_exp_cols(log_g, u);
        if (j > 0) {
          const double err = ((lse_c + v).array().exp().matrix() - marg.nu)
                                 .lpNorm<Eigen::Infinity>();
          if (err <= cfg.sinkhorn_tol) break;
        }
        v = log_nu - lse_c;
        u = log_mu - log_sum_exp_rows(log_g, v);
      }
      log_t = log_g;
      log_t.colwise() += u;
      log_t.rowwise() += v.transpose();
    }
    t = log_t.array().exp();
  } else {
    const Eigen::MatrixXd kernel = (-c_gwd / cfg.tau_t).array().exp();
    for (int round = 0; round < cfg.ot_iters; ++round) {
      const Eigen::MatrixXd g = kernel.cwiseProduct(t);
      if (!(g.maxCoeff() > 0.0)) {
        throw std::runtime_error(
            "sinkhorn kernel underflowed to zero; increase tau_t or enable "
            "the log-domain solver");
      }
      Eigen::VectorXd a = marg.mu;
      Eigen::VectorXd b = Eigen::VectorXd::Ones(t.cols());
      for (int j = 0; j < cfg.sinkhorn_iters; ++j) {
        const Eigen::VectorXd col = g.transpose() * a;
        if (j > 0) {
          const double err =
              (b.cwiseProduct(col) - marg.nu).lpNorm<Eigen::Infinity>();
          if (err <= cfg.sinkhorn_tol) break;
        }
        b = marg.nu.cwiseQuotient(col.cwiseMax(kScalingFloor));
        a = marg.mu.cwiseQuotient((g * b).cwiseMax(kScalingFloor));
      }
      if (!a.allFinite() || !b.allFinite()) {
        throw std::runtime_error(
            "sinkhorn scaling diverged; increase tau_t or enable the "
            "log-domain solver");
      }
      t = a.asDiagonal() * g * b.asDiagonal();
    }
  }
  if (!t.allFinite()) {
    throw std::runtime_error(
        "sinkhorn produced non-finite plan; increase tau_t or enable the "
        "log-domain solver");
  }
  return t;
}

ThetaGradients gw_gradients(const Graph& gs, const Graph& gt,
                            const AlignmentMatrix& t, const GwParams& theta) {
  const Eigen::Vector3d& bs = theta.coeffs.beta_s;
  const Eigen::Vector3d& bt = theta.coeffs.beta_t;

  const ForwardTrace trs = forward_trace(gs, theta.gnn);
  const ForwardTrace trt = forward_trace(gt, theta.gnn);

  const Eigen::MatrixXd as = gs.dense_adjacency();
  const Eigen::MatrixXd at = gt.dense_adjacency();
  const Eigen::MatrixXd xs_hat = row_l2_normalized(gs.features);
  const Eigen::MatrixXd xt_hat = row_l2_normalized(gt.features);
  const Eigen::MatrixXd zs_hat = row_l2_normalized(trs.z);
  const Eigen::MatrixXd zt_hat = row_l2_normalized(trt.z);
  const Eigen::MatrixXd xxs = xs_hat * xs_hat.transpose();
  const Eigen::MatrixXd xxt = xt_hat * xt_hat.transpose();
  const Eigen::MatrixXd zzs = zs_hat * zs_hat.transpose();
  const Eigen::MatrixXd zzt = zt_hat * zt_hat.transpose();

  const Eigen::MatrixXd cs = bs[0] * as + bs[1] * xxs + bs[2] * zzs;
  const Eigen::MatrixXd ct = bt[0] * at + bt[1] * xxt + bt[2] * zzt;

  const Eigen::VectorXd r = t.rowwise().sum();
  const Eigen::VectorXd c = t.colwise().sum().transpose();

  // dL/dC_p for the objective sum_{ijkl} (C_s(i,j)-C_t(k,l))^2 T(i,k) T(j,l).
  const Eigen::MatrixXd g_s =
      2.0 * (cs.cwiseProduct(r * r.transpose()) - t * ct * t.transpose());
  const Eigen::MatrixXd g_t =
      2.0 * (ct.cwiseProduct(c * c.transpose()) - t.transpose() * cs * t);

  ThetaGradients grads;
  grads.beta_s << frobenius_inner(g_s, as), frobenius_inner(g_s, xxs),
      frobenius_inner(g_s, zzs);
  grads.beta_t << frobenius_inner(g_t, at), frobenius_inner(g_t, xxt),
      frobenius_inner(g_t, zzt);

  grads.mats.reserve(theta.gnn.mats.size());
  for (const auto& w : theta.gnn.mats) {
    grads.mats.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }

  // G_p is symmetric, so dL/dZhat = 2 beta3 G_p Zhat.
  const Eigen::MatrixXd dz_s = row_norm_backward(
      trs.z, zs_hat, (2.0 * bs[2]) * (g_s * zs_hat));
  const Eigen::MatrixXd dz_t = row_norm_backward(
      trt.z, zt_hat, (2.0 * bt[2]) * (g_t * zt_hat));
  gnn_backward(gs, theta.gnn, trs, dz_s, grads.mats);
  gnn_backward(gt, theta.gnn, trt, dz_t, grads.mats);
  return grads;
}

ThetaGradients gw_gradients_fd(const Graph& gs, const Graph& gt,
                               const AlignmentMatrix& t, const GwParams& theta,
                               double step) {
  if (gs.n + gt.n > 64) {
    throw std::invalid_argument(
        "finite-difference gradients are reserved for tiny instances");
  }
  GwParams probe = theta;
  const auto eval = [&]() { return gw_objective_at(gs, gt, t, probe); };
  const auto central = [&](double& x) {
    const double saved = x;
    x = saved + step;
    const double up = eval();
    x = saved - step;
    const double down = eval();
    x = saved;
    return (up - down) / (2.0 * step);
  };

  ThetaGradients grads;
  for (int i = 0; i < 3; ++i) {
    grads.beta_s[i] = central(probe.coeffs.beta_s[i]);
    grads.beta_t[i] = central(probe.coeffs.beta_t[i]);
  }
  for (const auto& w : theta.gnn.mats) {
    grads.mats.emplace_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  }
  for (std::size_t k = 0; k < probe.gnn.mats.size(); ++k) {
    for (Eigen::Index i = 0; i < probe.gnn.mats[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < probe.gnn.mats[k].cols(); ++j) {
        grads.mats[k](i, j) = central(probe.gnn.mats[k](i, j));
      }
    }
  }
  return grads;
}

namespace {

double gradient_deviation(const ThetaGradients& a, const ThetaGradients& b) {
  // Blocks whose finite-difference scale is below 1e-6 are numerically
  // zero; comparing against raw FD noise there is meaningless.
  const auto rel = [](double diff, double scale) {
    return diff / std::max(scale, 1e-6);
  };
  double dev = rel((a.beta_s - b.beta_s).lpNorm<Eigen::Infinity>(),
                   b.beta_s.lpNorm<Eigen::Infinity>());
  dev = std::max(dev, rel((a.beta_t - b.beta_t).lpNorm<Eigen::Infinity>(),
                          b.beta_t.lpNorm<Eigen::Infinity>()));
  for (std::size_t k = 0; k < a.mats.size(); ++k) {
    dev = std::max(
        dev, rel((a.mats[k] - b.mats[k]).lpNorm<Eigen::Infinity>(),
                 b.mats[k].lpNorm<Eigen::Infinity>()));
  }
  return dev;
}

}  // namespace

void update_params(const Graph& gs, const Graph& gt, const AlignmentMatrix& t,
                   GwParams& theta, const GwConfig& cfg) {
  if (cfg.cost_mode == CostMode::AdjacencySparse) return;  // no learnables

  ThetaGradients grads = cfg.grad_mode == GradMode::Analytic
                             ? gw_gradients(gs, gt, t, theta)
                             : gw_gradients_fd(gs, gt, t, theta);
  if (cfg.grad_self_check) {
    const ThetaGradients analytic = cfg.grad_mode == GradMode::Analytic
                                        ? grads
                                        : gw_gradients(gs, gt, t, theta);
    const ThetaGradients fd = cfg.grad_mode == GradMode::Analytic
                                  ? gw_gradients_fd(gs, gt, t, theta)
                                  : grads;
    const double dev = gradient_deviation(analytic, fd);
    if (dev > 1e-3) {
      throw std::runtime_error(
          "gradient self-test failed: analytic/finite-difference deviation " +
          std::to_string(dev));
    }
  }

  theta.coeffs.beta_s =
      project_to_simplex(theta.coeffs.beta_s - cfg.tau_beta * grads.beta_s);
  theta.coeffs.beta_t =
      project_to_simplex(theta.coeffs.beta_t - cfg.tau_beta * grads.beta_t);
  for (std::size_t k = 0; k < theta.gnn.mats.size(); ++k) {
    theta.gnn.mats[k] -= cfg.tau_w * grads.mats[k];
    project_columns(theta.gnn.mats[k]);
  }
}

GnnParams init_learnable_params(GnnKind kind, int d_in, int d, int layers,
                                std::uint64_t seed) {
  if (d_in < 1 || d < 1 || layers < 1) {
    throw std::invalid_argument("init_learnable_params: bad dimensions");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  GnnParams params;
  params.kind = kind;
  params.layers = layers;
  params.learnable = true;
  const auto draw = [&](int rows, int cols) {
    Eigen::MatrixXd w(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) w(i, j) = unif(rng);
    project_columns(w);
    return w;
  };
  if (kind == GnnKind::LightweightGcn) {
    params.mats.push_back(draw((layers + 1) * d_in, d));
  } else {
    for (int k = 0; k < layers; ++k) {
      params.mats.push_back(draw(k == 0 ? d_in : d, d));
    }
  }
  return params;
}

GraftResult graft(const Graph& gs, const Graph& gt, const Marginals& marg_in,
                  const GwConfig& cfg, std::uint64_t seed, int dim,
                  GnnKind kind, int layers) {
  check_config(cfg);
  if (marg_in.mu.size() != gs.n || marg_in.nu.size() != gt.n) {
    throw std::invalid_argument("graft: marginal sizes do not match graphs");
  }
  Marginals marg = marg_in;
  floor_and_renormalize(marg);

  GwParams theta;
  if (cfg.cost_mode == CostMode::MultiView) {
    if (gs.feature_dim() != gt.feature_dim()) {
      throw std::invalid_argument("graft: feature dimensions differ");
    }
    theta.gnn = init_learnable_params(kind, gs.feature_dim(), dim, layers, seed);
  }

  AlignmentMatrix t = marg.mu * marg.nu.transpose();
  GraftResult res;
  res.objective.reserve(cfg.outer_iters);

  for (int i = 0; i < cfg.outer_iters; ++i) {
    Eigen::MatrixXd c_gwd;
    if (cfg.cost_mode == CostMode::MultiView) {
      const Embedding zs = feat_prop_trans(gs, theta.gnn);
      const Embedding zt = feat_prop_trans(gt, theta.gnn);
      const Eigen::MatrixXd cs = intra_cost(gs, zs, theta.coeffs.beta_s);
      const Eigen::MatrixXd ct = intra_cost(gt, zt, theta.coeffs.beta_t);
      c_gwd = inter_cost(cs, ct, t, marg);
      res.objective.push_back(std::max(frobenius_inner(c_gwd, t), 0.0));
      update_params(gs, gt, t, theta, cfg);
      if (cfg.adaptive_marginals) {
        if (auto m = adaptive_marginals(zs, zt)) {
          marg = *m;
          floor_and_renormalize(marg);
        } else {
          std::cerr << "warning: adaptive marginals degenerate; "
                       "keeping the previous ones\n";
        }
      }
    } else {
      c_gwd = inter_cost_adjacency(gs, gt, t);
      res.objective.push_back(std::max(frobenius_inner(c_gwd, t), 0.0));
    }
    // tau_t acts relative to the current cost scale; the kernel contrast
    // stays stable while the costs evolve and the transport path is
    // invariant to cost rescaling.
    const double scale = c_gwd.mean();
    if (scale > 1e-30) {
      t = sinkhorn_proximal_step(c_gwd / scale, t, marg, cfg);
    } else {
      t = sinkhorn_proximal_step(c_gwd, t, marg, cfg);
    }
  }

  res.t_gw = std::move(t);
  res.theta = std::move(theta);
  return res;
}

}  // namespace combalign
