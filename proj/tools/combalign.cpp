#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "combalign/pipeline.hpp"

namespace {

using namespace combalign;

int cmd_align(const PipelineConfig& cfg) {
  const PipelineResult res = run_align(cfg);
  if (res.has_metrics) {
    std::cout << format_metrics_line(res.metrics) << "\n";
  }
  if (!cfg.no_combine && res.unmatched_sources > 0) {
    std::cout << "unmatched_sources=" << res.unmatched_sources << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& matrix_path, const std::string& matches_path,
             const std::string& anchors_path, bool constrained) {
  const GroundTruth gt = load_anchors(anchors_path);
  MetricsReport report;
  if (!matrix_path.empty()) {
    const Eigen::MatrixXd t = load_dense_matrix(matrix_path);
    // Constrained mode drops all but the strongest of any conflicting
    // argmax predictions before scoring.
    report = constrained ? evaluate_matchset(constrained_predictions(t), gt)
                         : evaluate_alignment(t, gt);
  } else {
    MatchSet m;
    m.pairs = load_anchors(matches_path).pairs;
    report = evaluate_matchset(m, gt);
  }
  std::cout << format_metrics_block(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CombAlign: unsupervised graph alignment"};
  app.require_subcommand(1);

  // align -------------------------------------------------------------
  auto* align = app.add_subcommand("align", "run the full alignment pipeline");
  std::string config_path;
  PipelineConfig cfg;
  std::string gnn = "gcn", marginals = "wl", ensemble = "product";
  std::string cost_mode = "multi-view", grad_mode = "analytic";

  align->add_option("--config", config_path, "flat key=value config file");
  auto* o_se = align->add_option("--source-edges", cfg.source_edges);
  auto* o_sf = align->add_option("--source-feats", cfg.source_feats);
  auto* o_te = align->add_option("--target-edges", cfg.target_edges);
  auto* o_tf = align->add_option("--target-feats", cfg.target_feats);
  auto* o_an = align->add_option("--anchors", cfg.anchors);
  auto* o_gnn = align->add_option("--gnn", gnn)->check(CLI::IsMember({"lgcn", "gcn"}));
  auto* o_dim = align->add_option("--dim", cfg.dim);
  auto* o_lay = align->add_option("--layers", cfg.layers);
  auto* o_it = align->add_option("--iters", cfg.gw.outer_iters);
  auto* o_ot = align->add_option("--ot-iters", cfg.gw.ot_iters);
  auto* o_sk = align->add_option("--sinkhorn-iters", cfg.gw.sinkhorn_iters);
  auto* o_st = align->add_option("--sinkhorn-tol", cfg.gw.sinkhorn_tol);
  auto* o_tt = align->add_option("--tau-t", cfg.gw.tau_t);
  auto* o_tb = align->add_option("--tau-beta", cfg.gw.tau_beta);
  auto* o_tw = align->add_option("--tau-w", cfg.gw.tau_w);
  auto* o_cm = align->add_option("--cost-mode", cost_mode)
                   ->check(CLI::IsMember({"multi-view", "adjacency-sparse"}));
  auto* o_gm = align->add_option("--grad-mode", grad_mode)
                   ->check(CLI::IsMember({"analytic", "fd"}));
  auto* o_ld = align->add_flag("--log-domain");
  auto* o_mg = align->add_option("--marginals", marginals)
                   ->check(CLI::IsMember({"uniform", "wl", "adaptive"}));
  auto* o_r = align->add_option("--top-r", cfg.top_r);
  auto* o_en = align->add_option("--ensemble", ensemble)
                   ->check(CLI::IsMember({"product", "average"}));
  auto* o_nc = align->add_flag("--no-combine");
  auto* o_sd = align->add_option("--seed", cfg.seed);
  auto* o_od = align->add_option("--out-dir", cfg.out_dir);
  auto* o_dm = align->add_flag("--dump-matrices");
  auto* o_tr = align->add_flag("--trajectory");

  // gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a noisy permuted copy");
  std::string gen_edges, gen_feats, gen_out;
  double p_edge = 0.0, p_feat = 0.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--edges", gen_edges)->required();
  gen->add_option("--feats", gen_feats)->required();
  gen->add_option("--p-edge", p_edge);
  gen->add_option("--p-feat", p_feat);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out-dir", gen_out)->required();

  // gradcheck ----------------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck",
                                "analytic vs finite-difference gradients");
  int gc_n = 6, gc_d = 3, gc_layers = 2, gc_dim = 4;
  std::string gc_gnn = "gcn";
  std::uint64_t gc_seed = 0;
  gc->add_option("--n", gc_n);
  gc->add_option("--d", gc_d);
  gc->add_option("--gnn", gc_gnn)->check(CLI::IsMember({"lgcn", "gcn"}));
  gc->add_option("--layers", gc_layers);
  gc->add_option("--dim", gc_dim);
  gc->add_option("--seed", gc_seed);

  // eval ----------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "score a matrix or match file");
  std::string ev_matrix, ev_matches, ev_anchors;
  bool ev_constrained = false;
  auto* o_evm = ev->add_option("--matrix", ev_matrix);
  auto* o_evp = ev->add_option("--matches", ev_matches);
  ev->add_option("--anchors", ev_anchors)->required();
  ev->add_flag("--constrained", ev_constrained,
               "keep only the strongest of conflicting argmax predictions");
  o_evm->excludes(o_evp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (align->parsed()) {
      PipelineConfig eff =
          config_path.empty() ? PipelineConfig{} : parse_config_file(config_path);
      if (o_se->count()) eff.source_edges = cfg.source_edges;
      if (o_sf->count()) eff.source_feats = cfg.source_feats;
      if (o_te->count()) eff.target_edges = cfg.target_edges;
      if (o_tf->count()) eff.target_feats = cfg.target_feats;
      if (o_an->count()) eff.anchors = cfg.anchors;
      if (o_gnn->count()) eff.gnn = gnn_kind_from_string(gnn);
      if (o_dim->count()) eff.dim = cfg.dim;
      if (o_lay->count()) eff.layers = cfg.layers;
      if (o_it->count()) eff.gw.outer_iters = cfg.gw.outer_iters;
      if (o_ot->count()) eff.gw.ot_iters = cfg.gw.ot_iters;
      if (o_sk->count()) eff.gw.sinkhorn_iters = cfg.gw.sinkhorn_iters;
      if (o_st->count()) eff.gw.sinkhorn_tol = cfg.gw.sinkhorn_tol;
      if (o_tt->count()) eff.gw.tau_t = cfg.gw.tau_t;
      if (o_tb->count()) eff.gw.tau_beta = cfg.gw.tau_beta;
      if (o_tw->count()) eff.gw.tau_w = cfg.gw.tau_w;
      if (o_cm->count()) eff.gw.cost_mode = cost_mode_from_string(cost_mode);
      if (o_gm->count()) eff.gw.grad_mode = grad_mode_from_string(grad_mode);
      if (o_ld->count()) eff.gw.log_domain = true;
      if (o_mg->count()) eff.marginal_mode = marginal_mode_from_string(marginals);
      if (o_r->count()) eff.top_r = cfg.top_r;
      if (o_en->count()) eff.ensemble = ensemble_mode_from_string(ensemble);
      if (o_nc->count()) eff.no_combine = true;
      if (o_sd->count()) eff.seed = cfg.seed;
      if (o_od->count()) eff.out_dir = cfg.out_dir;
      if (o_dm->count()) eff.dump_matrices = true;
      if (o_tr->count()) eff.trajectory = true;
      return cmd_align(eff);
    }
    if (gen->parsed()) {
      run_gen(gen_edges, gen_feats, p_edge, p_feat, gen_seed, gen_out);
      return 0;
    }
    if (gc->parsed()) {
      const GradcheckReport rep = run_gradcheck(
          gc_n, gc_d, gnn_kind_from_string(gc_gnn), gc_layers, gc_dim, gc_seed);
      std::printf("max_relative_deviation=%.3e\n", rep.max_deviation);
      return rep.max_deviation > 1e-3 ? 1 : 0;
    }
    if (ev->parsed()) {
      if (ev_matrix.empty() && ev_matches.empty()) {
        std::cerr << "eval: provide --matrix or --matches\n";
        return 2;
      }
      return cmd_eval(ev_matrix, ev_matches, ev_anchors, ev_constrained);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
