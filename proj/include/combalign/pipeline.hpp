#ifndef COMBALIGN_PIPELINE_HPP
#define COMBALIGN_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "combalign/combine.hpp"
#include "combalign/eval.hpp"
#include "combalign/graph.hpp"
#include "combalign/gw.hpp"

namespace combalign {

enum class MarginalMode { Uniform, Wl, Adaptive };

/// End-to-end configuration; serialized as flat "key = value" text with keys
/// matching the CLI flag names.
struct PipelineConfig {
  std::string source_edges, source_feats;
  std::string target_edges, target_feats;
  std::string anchors;
  GnnKind gnn = GnnKind::Gcn;
  int dim = 32;
  int layers = 3;
  GwConfig gw;
  MarginalMode marginal_mode = MarginalMode::Wl;
  int top_r = 10;
  EnsembleMode ensemble = EnsembleMode::Product;
  bool no_combine = false;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool dump_matrices = false;
  bool trajectory = false;
};

PipelineConfig parse_config_file(const std::string& path);
void save_config(const PipelineConfig& cfg, const std::string& path);

struct PipelineResult {
  MatchSet matches;  // row-argmax predictions when no_combine is set
  AlignmentMatrix t_wl;
  AlignmentMatrix t_gw;
  MetricsReport metrics;
  bool has_metrics = false;
  std::vector<double> objective;
  int unmatched_sources = 0;
};

/// WL -> marginals -> GRAFT -> Combine. Writes matches, metrics, optional
/// matrix dumps and the objective trajectory into out_dir when it is set;
/// nothing is written if any stage fails.
PipelineResult run_align(const PipelineConfig& cfg);

/// Generates a perturbed copy of the graph at (edge_path, feat_path) and
/// writes source/target/anchor files into out_dir.
void run_gen(const std::string& edge_path, const std::string& feat_path,
             double p_edge, double p_feat, std::uint64_t seed,
             const std::string& out_dir);

struct GradcheckReport {
  double max_deviation = 0.0;
  int n = 0;
};

/// Compares analytic gradients against central differences on a seeded
/// random instance; n is capped at 16.
GradcheckReport run_gradcheck(int n, int d_in, GnnKind kind, int layers,
                              int dim, std::uint64_t seed);

/// Seeded Erdos-Renyi graph with uniform or one-hot features (one-hot
/// requires d_in == n).
Graph random_graph(int n, int d_in, double edge_prob, std::uint64_t seed,
                   bool one_hot = false);

// Enum <-> string helpers shared by config files and the CLI.
std::string to_string(GnnKind k);
std::string to_string(MarginalMode m);
std::string to_string(EnsembleMode m);
std::string to_string(CostMode m);
std::string to_string(GradMode m);
GnnKind gnn_kind_from_string(const std::string& s);
MarginalMode marginal_mode_from_string(const std::string& s);
EnsembleMode ensemble_mode_from_string(const std::string& s);
CostMode cost_mode_from_string(const std::string& s);
GradMode grad_mode_from_string(const std::string& s);

}  // namespace combalign

#endif  // COMBALIGN_PIPELINE_HPP
