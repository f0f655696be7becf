#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "combalign/pipeline.hpp"

using namespace combalign;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("combalign_pl_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes a small seeded dataset (source, permuted target, anchors) and
// returns a ready-to-run config.
PipelineConfig make_dataset(const fs::path& dir, int n, double p_edge,
                            std::uint64_t seed) {
  const Graph g = random_graph(n, 8, 0.3, seed);
  const SyntheticPair pair = gen_synthetic_pair(g, p_edge, 0.0, seed + 1);
  PipelineConfig cfg;
  cfg.source_edges = (dir / "s.edges").string();
  cfg.source_feats = (dir / "s.feats").string();
  cfg.target_edges = (dir / "t.edges").string();
  cfg.target_feats = (dir / "t.feats").string();
  cfg.anchors = (dir / "anchors.tsv").string();
  save_graph(pair.source, cfg.source_edges, cfg.source_feats);
  save_graph(pair.target, cfg.target_edges, cfg.target_feats);
  save_anchors(pair.truth, cfg.anchors);
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.gw.outer_iters = 25;
  cfg.top_r = 5;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config files round-trip") {
  const auto dir = temp_dir("config");
  PipelineConfig cfg;
  cfg.source_edges = "a.edges";
  cfg.source_feats = "a.feats";
  cfg.target_edges = "b.edges";
  cfg.target_feats = "b.feats";
  cfg.anchors = "gt.tsv";
  cfg.gnn = GnnKind::LightweightGcn;
  cfg.dim = 16;
  cfg.layers = 4;
  cfg.gw.outer_iters = 12;
  cfg.gw.ot_iters = 3;
  cfg.gw.sinkhorn_iters = 33;
  cfg.gw.sinkhorn_tol = 1e-10;
  cfg.gw.tau_t = 0.25;
  cfg.gw.tau_beta = 0.5;
  cfg.gw.tau_w = 0.002;
  cfg.gw.cost_mode = CostMode::AdjacencySparse;
  cfg.gw.grad_mode = GradMode::FiniteDifference;
  cfg.gw.log_domain = true;
  cfg.marginal_mode = MarginalMode::Adaptive;
  cfg.top_r = 7;
  cfg.ensemble = EnsembleMode::Average;
  cfg.no_combine = true;
  cfg.seed = 99;
  cfg.out_dir = "out";
  cfg.dump_matrices = true;
  cfg.trajectory = true;

  const std::string path = (dir / "cfg.txt").string();
  save_config(cfg, path);
  const PipelineConfig back = parse_config_file(path);
  CHECK(back.source_edges == cfg.source_edges);
  CHECK(back.anchors == cfg.anchors);
  CHECK(back.gnn == cfg.gnn);
  CHECK(back.dim == cfg.dim);
  CHECK(back.layers == cfg.layers);
  CHECK(back.gw.outer_iters == cfg.gw.outer_iters);
  CHECK(back.gw.ot_iters == cfg.gw.ot_iters);
  CHECK(back.gw.sinkhorn_iters == cfg.gw.sinkhorn_iters);
  CHECK(back.gw.sinkhorn_tol == cfg.gw.sinkhorn_tol);
  CHECK(back.gw.tau_t == cfg.gw.tau_t);
  CHECK(back.gw.tau_beta == cfg.gw.tau_beta);
  CHECK(back.gw.tau_w == cfg.gw.tau_w);
  CHECK(back.gw.cost_mode == cfg.gw.cost_mode);
  CHECK(back.gw.grad_mode == cfg.gw.grad_mode);
  CHECK(back.gw.log_domain == cfg.gw.log_domain);
  CHECK(back.marginal_mode == cfg.marginal_mode);
  CHECK(back.top_r == cfg.top_r);
  CHECK(back.ensemble == cfg.ensemble);
  CHECK(back.no_combine == cfg.no_combine);
  CHECK(back.seed == cfg.seed);
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(back.dump_matrices == cfg.dump_matrices);
  CHECK(back.trajectory == cfg.trajectory);
}

TEST_CASE("unknown config keys are reported with the line number") {
  const auto dir = temp_dir("badcfg");
  std::ofstream((dir / "cfg.txt")) << "dim = 8\nnonsense = 1\n";
  try {
    parse_config_file((dir / "cfg.txt").string());
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("generated datasets are byte-identical across equal seeds") {
  const auto dir = temp_dir("gen_det");
  const Graph g = random_graph(15, 4, 0.3, 5);
  save_graph(g, (dir / "g.edges").string(), (dir / "g.feats").string());
  run_gen((dir / "g.edges").string(), (dir / "g.feats").string(), 0.2, 0.1, 9,
          (dir / "a").string());
  run_gen((dir / "g.edges").string(), (dir / "g.feats").string(), 0.2, 0.1, 9,
          (dir / "b").string());
  for (const char* name :
       {"source.edges", "source.feats", "target.edges", "target.feats",
        "anchors.tsv"}) {
    CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));
  }
}

TEST_CASE("full-noise edge perturbation still produces a usable dataset") {
  const auto dir = temp_dir("gen_p1");
  const Graph g = random_graph(12, 3, 0.3, 6);
  save_graph(g, (dir / "g.edges").string(), (dir / "g.feats").string());
  run_gen((dir / "g.edges").string(), (dir / "g.feats").string(), 1.0, 0.0, 3,
          (dir / "out").string());
  const Graph t = load_graph((dir / "out" / "target.edges").string(),
                             (dir / "out" / "target.feats").string());
  CHECK(t.n == g.n);  // all original edges dropped, random ones added
}

TEST_CASE("zero-noise alignment recovers the permutation end to end") {
  const auto dir = temp_dir("align_zero");
  PipelineConfig cfg = make_dataset(dir, 25, 0.0, 17);
  cfg.out_dir = (dir / "out").string();
  cfg.trajectory = true;
  const PipelineResult res = run_align(cfg);
  REQUIRE(res.has_metrics);
  CHECK(res.metrics.hits.at(1) == doctest::Approx(1.0));
  CHECK(res.metrics.one_to_many_ratio == 0.0);
  CHECK(res.metrics.mutual_inconsistency_ratio == 0.0);
  CHECK(fs::exists(dir / "out" / "matches.tsv"));
  CHECK(fs::exists(dir / "out" / "metrics.txt"));
  CHECK(fs::exists(dir / "out" / "trajectory.tsv"));
  CHECK_FALSE(fs::exists(dir / "out" / "t_wl.txt"));  // dump not requested
}

TEST_CASE("repeated runs write identical outputs") {
  const auto dir = temp_dir("align_det");
  PipelineConfig cfg = make_dataset(dir, 18, 0.1, 23);
  cfg.out_dir = (dir / "out1").string();
  run_align(cfg);
  cfg.out_dir = (dir / "out2").string();
  run_align(cfg);
  CHECK(read_file(dir / "out1" / "matches.tsv") ==
        read_file(dir / "out2" / "matches.tsv"));
  CHECK(read_file(dir / "out1" / "metrics.txt") ==
        read_file(dir / "out2" / "metrics.txt"));
}

TEST_CASE("no-combine predictions are the row argmax of T_GW") {
  const auto dir = temp_dir("align_nc");
  PipelineConfig cfg = make_dataset(dir, 15, 0.1, 29);
  cfg.no_combine = true;
  const PipelineResult res = run_align(cfg);
  REQUIRE(res.matches.pairs.size() == 15);
  for (auto [u, v] : res.matches.pairs) {
    int best = 0;
    for (int k = 1; k < res.t_gw.cols(); ++k) {
      if (res.t_gw(u, k) > res.t_gw(u, best)) best = k;
    }
    CHECK(v == best);
  }
}

TEST_CASE("missing input files abort before any output is written") {
  const auto dir = temp_dir("align_missing");
  PipelineConfig cfg;
  cfg.source_edges = (dir / "absent.edges").string();
  cfg.source_feats = (dir / "absent.feats").string();
  cfg.target_edges = cfg.source_edges;
  cfg.target_feats = cfg.source_feats;
  cfg.out_dir = (dir / "out").string();
  CHECK_THROWS(run_align(cfg));
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("dumped matrices use the dense text format") {
  const auto dir = temp_dir("align_dump");
  PipelineConfig cfg = make_dataset(dir, 12, 0.0, 31);
  cfg.out_dir = (dir / "out").string();
  cfg.dump_matrices = true;
  const PipelineResult res = run_align(cfg);
  const Eigen::MatrixXd t_gw =
      load_dense_matrix((dir / "out" / "t_gw.txt").string());
  CHECK((t_gw - res.t_gw).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("gradcheck reports tiny deviations and enforces the size cap") {
  const GradcheckReport rep = run_gradcheck(6, 3, GnnKind::Gcn, 2, 4, 0);
  CHECK(rep.max_deviation < 1e-4);
  const GradcheckReport lgcn = run_gradcheck(6, 3, GnnKind::LightweightGcn, 2, 4, 1);
  CHECK(lgcn.max_deviation < 1e-4);
  CHECK_THROWS_AS(run_gradcheck(200, 3, GnnKind::Gcn, 2, 4, 0),
                  std::invalid_argument);
}

TEST_CASE("cli runs gen, align and eval end to end") {
  const auto dir = temp_dir("cli");
  const Graph g = random_graph(14, 4, 0.3, 77);
  save_graph(g, (dir / "g.edges").string(), (dir / "g.feats").string());
  const std::string cli = COMBALIGN_CLI_PATH;

  const std::string gen_cmd = cli + " gen --edges " + (dir / "g.edges").string() +
                              " --feats " + (dir / "g.feats").string() +
                              " --seed 4 --out-dir " + (dir / "data").string();
  REQUIRE(std::system(gen_cmd.c_str()) == 0);

  const std::string out = (dir / "run").string();
  const std::string align_cmd =
      cli + " align --source-edges " + (dir / "data" / "source.edges").string() +
      " --source-feats " + (dir / "data" / "source.feats").string() +
      " --target-edges " + (dir / "data" / "target.edges").string() +
      " --target-feats " + (dir / "data" / "target.feats").string() +
      " --anchors " + (dir / "data" / "anchors.tsv").string() +
      " --iters 25 --dim 8 --layers 2 --top-r 5 --seed 4 --dump-matrices" +
      " --out-dir " + out + " > " + (dir / "stdout.txt").string();
  REQUIRE(std::system(align_cmd.c_str()) == 0);
  CHECK(read_file(dir / "stdout.txt").find("hits@1=1.000000") !=
        std::string::npos);

  const std::string eval_cmd =
      cli + " eval --matrix " + out + "/t_gw.txt --anchors " +
      (dir / "data" / "anchors.tsv").string() + " > " +
      (dir / "eval.txt").string();
  REQUIRE(std::system(eval_cmd.c_str()) == 0);
  CHECK(read_file(dir / "eval.txt").find("hits@1=") != std::string::npos);

  const std::string bad_cmd = cli + " align --source-edges /nonexistent.e"
                              " --source-feats /nonexistent.f"
                              " --target-edges /nonexistent.e"
                              " --target-feats /nonexistent.f 2>/dev/null";
  CHECK(std::system(bad_cmd.c_str()) != 0);

  const std::string gc_cmd = cli + " gradcheck --n 6 --d 3 > " +
                             (dir / "gc.txt").string();
  CHECK(std::system(gc_cmd.c_str()) == 0);
  CHECK(read_file(dir / "gc.txt").find("max_relative_deviation=") !=
        std::string::npos);

  const std::string ceval_cmd =
      cli + " eval --matrix " + out + "/t_gw.txt --constrained --anchors " +
      (dir / "data" / "anchors.tsv").string() + " > " +
      (dir / "ceval.txt").string();
  CHECK(std::system(ceval_cmd.c_str()) == 0);
  CHECK(read_file(dir / "ceval.txt").find("one_to_many_ratio=0.000000") !=
        std::string::npos);
}

TEST_CASE("cli config files seed the run and flags override them") {
  const auto dir = temp_dir("cli_cfg");
  PipelineConfig data = make_dataset(dir, 12, 0.0, 41);
  data.out_dir = (dir / "out_direct").string();
  run_align(data);

  PipelineConfig file_cfg = data;
  file_cfg.out_dir = "";      // overridden on the command line
  file_cfg.seed = 999;        // likewise
  save_config(file_cfg, (dir / "run.cfg").string());

  const std::string cli = COMBALIGN_CLI_PATH;
  const std::string cmd = cli + " align --config " + (dir / "run.cfg").string() +
                          " --seed " + std::to_string(data.seed) +
                          " --out-dir " + (dir / "out_cli").string() +
                          " > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(read_file(dir / "out_cli" / "matches.tsv") ==
        read_file(dir / "out_direct" / "matches.tsv"));
}

}  // TEST_SUITE
