#include "combalign/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "combalign/marginals.hpp"

namespace combalign {

namespace fs = std::filesystem;

std::string to_string(GnnKind k) {
  return k == GnnKind::LightweightGcn ? "lgcn" : "gcn";
}
std::string to_string(MarginalMode m) {
  switch (m) {
    case MarginalMode::Uniform: return "uniform";
    case MarginalMode::Adaptive: return "adaptive";
    default: return "wl";
  }
}
std::string to_string(EnsembleMode m) {
  return m == EnsembleMode::Average ? "average" : "product";
}
std::string to_string(CostMode m) {
  return m == CostMode::AdjacencySparse ? "adjacency-sparse" : "multi-view";
}
std::string to_string(GradMode m) {
  return m == GradMode::FiniteDifference ? "fd" : "analytic";
}

GnnKind gnn_kind_from_string(const std::string& s) {
  if (s == "lgcn") return GnnKind::LightweightGcn;
  if (s == "gcn") return GnnKind::Gcn;
  throw std::invalid_argument("unknown gnn kind: " + s);
}
MarginalMode marginal_mode_from_string(const std::string& s) {
  if (s == "uniform") return MarginalMode::Uniform;
  if (s == "wl") return MarginalMode::Wl;
  if (s == "adaptive") return MarginalMode::Adaptive;
  throw std::invalid_argument("unknown marginal mode: " + s);
}
EnsembleMode ensemble_mode_from_string(const std::string& s) {
  if (s == "product") return EnsembleMode::Product;
  if (s == "average") return EnsembleMode::Average;
  throw std::invalid_argument("unknown ensemble mode: " + s);
}
CostMode cost_mode_from_string(const std::string& s) {
  if (s == "multi-view") return CostMode::MultiView;
  if (s == "adjacency-sparse") return CostMode::AdjacencySparse;
  throw std::invalid_argument("unknown cost mode: " + s);
}
GradMode grad_mode_from_string(const std::string& s) {
  if (s == "analytic") return GradMode::Analytic;
  if (s == "fd") return GradMode::FiniteDifference;
  throw std::invalid_argument("unknown grad mode: " + s);
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

bool bool_from_string(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true/false, got: " + s);
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write: " + tmp);
    out << content;
  }
  fs::rename(tmp, path);
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string matches_to_text(const MatchSet& m) {
  std::string out;
  for (auto [u, v] : m.pairs) {
    out += std::to_string(u) + "\t" + std::to_string(v) + "\n";
  }
  return out;
}

}  // namespace

PipelineConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  PipelineConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": expected \"key = value\"");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));
    try {
      if (key == "source-edges") cfg.source_edges = val;
      else if (key == "source-feats") cfg.source_feats = val;
      else if (key == "target-edges") cfg.target_edges = val;
      else if (key == "target-feats") cfg.target_feats = val;
      else if (key == "anchors") cfg.anchors = val;
      else if (key == "gnn") cfg.gnn = gnn_kind_from_string(val);
      else if (key == "dim") cfg.dim = std::stoi(val);
      else if (key == "layers") cfg.layers = std::stoi(val);
      else if (key == "iters") cfg.gw.outer_iters = std::stoi(val);
      else if (key == "ot-iters") cfg.gw.ot_iters = std::stoi(val);
      else if (key == "sinkhorn-iters") cfg.gw.sinkhorn_iters = std::stoi(val);
      else if (key == "sinkhorn-tol") cfg.gw.sinkhorn_tol = std::stod(val);
      else if (key == "tau-t") cfg.gw.tau_t = std::stod(val);
      else if (key == "tau-beta") cfg.gw.tau_beta = std::stod(val);
      else if (key == "tau-w") cfg.gw.tau_w = std::stod(val);
      else if (key == "cost-mode") cfg.gw.cost_mode = cost_mode_from_string(val);
      else if (key == "grad-mode") cfg.gw.grad_mode = grad_mode_from_string(val);
      else if (key == "log-domain") cfg.gw.log_domain = bool_from_string(val);
      else if (key == "marginals")
        cfg.marginal_mode = marginal_mode_from_string(val);
      else if (key == "top-r") cfg.top_r = std::stoi(val);
      else if (key == "ensemble") cfg.ensemble = ensemble_mode_from_string(val);
      else if (key == "no-combine") cfg.no_combine = bool_from_string(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "out-dir") cfg.out_dir = val;
      else if (key == "dump-matrices") cfg.dump_matrices = bool_from_string(val);
      else if (key == "trajectory") cfg.trajectory = bool_from_string(val);
      else throw std::invalid_argument("unknown key: " + key);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return cfg;
}

void save_config(const PipelineConfig& cfg, const std::string& path) {
  std::ostringstream out;
  out << "source-edges = " << cfg.source_edges << "\n"
      << "source-feats = " << cfg.source_feats << "\n"
      << "target-edges = " << cfg.target_edges << "\n"
      << "target-feats = " << cfg.target_feats << "\n"
      << "anchors = " << cfg.anchors << "\n"
      << "gnn = " << to_string(cfg.gnn) << "\n"
      << "dim = " << cfg.dim << "\n"
      << "layers = " << cfg.layers << "\n"
      << "iters = " << cfg.gw.outer_iters << "\n"
      << "ot-iters = " << cfg.gw.ot_iters << "\n"
      << "sinkhorn-iters = " << cfg.gw.sinkhorn_iters << "\n"
      << "sinkhorn-tol = " << format_double(cfg.gw.sinkhorn_tol) << "\n"
      << "tau-t = " << format_double(cfg.gw.tau_t) << "\n"
      << "tau-beta = " << format_double(cfg.gw.tau_beta) << "\n"
      << "tau-w = " << format_double(cfg.gw.tau_w) << "\n"
      << "cost-mode = " << to_string(cfg.gw.cost_mode) << "\n"
      << "grad-mode = " << to_string(cfg.gw.grad_mode) << "\n"
      << "log-domain = " << (cfg.gw.log_domain ? "true" : "false") << "\n"
      << "marginals = " << to_string(cfg.marginal_mode) << "\n"
      << "top-r = " << cfg.top_r << "\n"
      << "ensemble = " << to_string(cfg.ensemble) << "\n"
      << "no-combine = " << (cfg.no_combine ? "true" : "false") << "\n"
      << "seed = " << cfg.seed << "\n"
      << "out-dir = " << cfg.out_dir << "\n"
      << "dump-matrices = " << (cfg.dump_matrices ? "true" : "false") << "\n"
      << "trajectory = " << (cfg.trajectory ? "true" : "false") << "\n";
  write_text_atomic(path, out.str());
}

PipelineResult run_align(const PipelineConfig& cfg) {
  const Graph gs = load_graph(cfg.source_edges, cfg.source_feats);
  const Graph gt = load_graph(cfg.target_edges, cfg.target_feats);
  GroundTruth gt_pairs;
  const bool have_anchors = !cfg.anchors.empty();
  if (have_anchors) gt_pairs = load_anchors(cfg.anchors);

  PipelineResult res;
  res.t_wl = wl_alignment(gs, gt, cfg.layers, cfg.seed, cfg.dim);

  Marginals marg;
  GwConfig gw_cfg = cfg.gw;
  switch (cfg.marginal_mode) {
    case MarginalMode::Uniform:
      marg = uniform_marginals(gs.n, gt.n);
      break;
    case MarginalMode::Wl:
      marg = marginals_from_alignment(res.t_wl);
      break;
    case MarginalMode::Adaptive:
      marg = marginals_from_alignment(res.t_wl);
      gw_cfg.adaptive_marginals = true;
      break;
  }

  GraftResult gr =
      graft(gs, gt, marg, gw_cfg, cfg.seed + 1, cfg.dim, cfg.gnn, cfg.layers);
  res.t_gw = std::move(gr.t_gw);
  res.objective = std::move(gr.objective);

  if (cfg.no_combine) {
    // "w/o Combine" ablation: plain row-argmax of T_GW.
    for (int i = 0; i < res.t_gw.rows(); ++i) {
      int best = 0;
      for (int k = 1; k < res.t_gw.cols(); ++k) {
        if (res.t_gw(i, k) > res.t_gw(i, best)) best = k;
      }
      res.matches.pairs.emplace_back(i, best);
    }
  } else {
    res.matches = combine(res.t_wl, res.t_gw, cfg.top_r, cfg.ensemble);
    res.unmatched_sources = gs.n - static_cast<int>(res.matches.pairs.size());
  }

  if (have_anchors) {
    res.metrics = cfg.no_combine ? evaluate_alignment(res.t_gw, gt_pairs)
                                 : evaluate_matchset(res.matches, gt_pairs);
    res.has_metrics = true;
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_text_atomic((dir / "matches.tsv").string(),
                      matches_to_text(res.matches));
    if (res.has_metrics) {
      write_text_atomic((dir / "metrics.txt").string(),
                        format_metrics_block(res.metrics));
    }
    if (cfg.dump_matrices) {
      save_dense_matrix(res.t_wl, (dir / "t_wl.txt").string());
      save_dense_matrix(res.t_gw, (dir / "t_gw.txt").string());
    }
    if (cfg.trajectory) {
      std::string traj;
      for (std::size_t i = 0; i < res.objective.size(); ++i) {
        traj += std::to_string(i + 1) + "\t" + format_double(res.objective[i]) +
                "\n";
      }
      write_text_atomic((dir / "trajectory.tsv").string(), traj);
    }
    save_config(cfg, (dir / "config.txt").string());
  }
  return res;
}

void run_gen(const std::string& edge_path, const std::string& feat_path,
             double p_edge, double p_feat, std::uint64_t seed,
             const std::string& out_dir) {
  const Graph g = load_graph(edge_path, feat_path);
  const SyntheticPair pair = gen_synthetic_pair(g, p_edge, p_feat, seed);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_graph(pair.source, (dir / "source.edges").string(),
             (dir / "source.feats").string());
  save_graph(pair.target, (dir / "target.edges").string(),
             (dir / "target.feats").string());
  save_anchors(pair.truth, (dir / "anchors.tsv").string());
}

GradcheckReport run_gradcheck(int n, int d_in, GnnKind kind, int layers,
                              int dim, std::uint64_t seed) {
  if (n > 16) {
    throw std::invalid_argument(
        "gradcheck is restricted to n <= 16 (finite differences are cubic)");
  }
  if (n < 2 || d_in < 1) {
    throw std::invalid_argument("gradcheck needs n >= 2 and d_in >= 1");
  }
  const Graph gs = random_graph(n, d_in, 0.4, seed);
  const Graph gt = random_graph(n, d_in, 0.4, seed + 17);

  std::mt19937_64 rng(seed + 41);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  AlignmentMatrix t(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) t(i, k) = unif(rng);
  t /= t.sum();

  GwParams theta;
  theta.gnn = init_learnable_params(kind, d_in, dim, layers, seed + 3);
  Eigen::Vector3d bs(unif(rng), unif(rng), unif(rng));
  Eigen::Vector3d bt(unif(rng), unif(rng), unif(rng));
  theta.coeffs.beta_s = project_to_simplex(bs);
  theta.coeffs.beta_t = project_to_simplex(bt);

  const ThetaGradients analytic = gw_gradients(gs, gt, t, theta);
  const ThetaGradients fd = gw_gradients_fd(gs, gt, t, theta);

  // Blocks whose finite-difference scale is below 1e-6 are numerically
  // zero; comparing against raw FD noise there is meaningless.
  const auto rel = [](double diff, double scale) {
    return diff / std::max(scale, 1e-6);
  };
  GradcheckReport rep;
  rep.n = n;
  rep.max_deviation =
      rel((analytic.beta_s - fd.beta_s).lpNorm<Eigen::Infinity>(),
          fd.beta_s.lpNorm<Eigen::Infinity>());
  rep.max_deviation = std::max(
      rep.max_deviation,
      rel((analytic.beta_t - fd.beta_t).lpNorm<Eigen::Infinity>(),
          fd.beta_t.lpNorm<Eigen::Infinity>()));
  for (std::size_t k = 0; k < analytic.mats.size(); ++k) {
    rep.max_deviation = std::max(
        rep.max_deviation,
        rel((analytic.mats[k] - fd.mats[k]).lpNorm<Eigen::Infinity>(),
            fd.mats[k].lpNorm<Eigen::Infinity>()));
  }
  return rep;
}

Graph random_graph(int n, int d_in, double edge_prob, std::uint64_t seed,
                   bool one_hot) {
  if (one_hot && d_in != n) {
    throw std::invalid_argument("one-hot features require d_in == n");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (unif(rng) < edge_prob) edges.emplace_back(i, j);
    }
  }
  Eigen::MatrixXd feats;
  if (one_hot) {
    feats = Eigen::MatrixXd::Identity(n, n);
  } else {
    feats.resize(n, d_in);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d_in; ++j) feats(i, j) = unif(rng);
  }
  return make_graph(n, edges, feats);
}

}  // namespace combalign
