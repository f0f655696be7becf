#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "combalign/graph.hpp"
#include "combalign/pipeline.hpp"

using namespace combalign;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("combalign_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> degree_multiset(const Graph& g) {
  std::vector<int> deg(g.n, 0);
  for (auto [u, v] : g.edges) {
    ++deg[u];
    ++deg[v];
  }
  std::sort(deg.begin(), deg.end());
  return deg;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("load_graph parses a minimal graph") {
  const auto dir = temp_dir("load_min");
  write_file(dir / "g.edges", "0\t1\n");
  write_file(dir / "g.feats", "2 1\n1\n0\n");
  const Graph g = load_graph((dir / "g.edges").string(),
                             (dir / "g.feats").string());
  CHECK(g.n == 2);
  CHECK(g.num_edges() == 1);
  CHECK(g.features(0, 0) == 1.0);
  CHECK(g.features(1, 0) == 0.0);
}

TEST_CASE("duplicate undirected lines collapse to one edge") {
  const auto dir = temp_dir("load_dup");
  write_file(dir / "g.edges", "0\t1\n1\t0\n");
  write_file(dir / "g.feats", "2 1\n1\n0\n");
  const Graph g = load_graph((dir / "g.edges").string(),
                             (dir / "g.feats").string());
  REQUIRE(g.num_edges() == 1);
  CHECK(g.edges[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("out-of-range endpoint is rejected") {
  const auto dir = temp_dir("load_range");
  write_file(dir / "g.edges", "0\t5\n");
  write_file(dir / "g.feats", "3 1\n1\n0\n0\n");
  CHECK_THROWS_AS(load_graph((dir / "g.edges").string(),
                             (dir / "g.feats").string()),
                  std::out_of_range);
}

TEST_CASE("malformed edge line reports the line number") {
  const auto dir = temp_dir("load_malformed");
  write_file(dir / "g.edges", "0\t1\nnot an edge\n");
  write_file(dir / "g.feats", "2 1\n1\n0\n");
  try {
    load_graph((dir / "g.edges").string(), (dir / "g.feats").string());
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("comment lines and self-loops are ignored") {
  const auto dir = temp_dir("load_comment");
  write_file(dir / "g.edges", "# header\n0\t1\n1\t1\n");
  write_file(dir / "g.feats", "2 1\n1\n0\n");
  const Graph g = load_graph((dir / "g.edges").string(),
                             (dir / "g.feats").string());
  CHECK(g.num_edges() == 1);
}

TEST_CASE("feature row mismatch is a shape error") {
  Eigen::MatrixXd feats = Eigen::MatrixXd::Zero(3, 1);
  CHECK_THROWS_AS(make_graph(2, {{0, 1}}, feats), std::invalid_argument);
}

TEST_CASE("normalized adjacency of an isolated node") {
  const Graph g = make_graph(1, {}, Eigen::MatrixXd::Zero(1, 1));
  const Eigen::MatrixXd p = normalized_adjacency(g);
  CHECK(p(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("normalized adjacency of a single edge") {
  const Graph g = make_graph(2, {{0, 1}}, Eigen::MatrixXd::Zero(2, 1));
  const Eigen::MatrixXd p = normalized_adjacency(g);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(p(i, j) == doctest::Approx(0.5));
}

TEST_CASE("normalized adjacency of the 3-path") {
  const Graph g = make_graph(3, {{0, 1}, {1, 2}}, Eigen::MatrixXd::Zero(3, 1));
  const Eigen::MatrixXd p = normalized_adjacency(g);
  CHECK(p(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(p(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency is symmetric with the A+I zero pattern") {
  const Graph g = random_graph(23, 3, 0.2, 99);
  const Eigen::MatrixXd p = normalized_adjacency(g);
  const Eigen::MatrixXd a_tilde =
      g.dense_adjacency() + Eigen::MatrixXd::Identity(g.n, g.n);
  CHECK((p - p.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) CHECK((p(i, j) == 0.0) == (a_tilde(i, j) == 0.0));
}

TEST_CASE("zero-noise synthetic pair is an exact permuted copy") {
  const Graph g = random_graph(20, 4, 0.25, 7);
  const SyntheticPair pair = gen_synthetic_pair(g, 0.0, 0.0, 123);
  CHECK(pair.target.n == g.n);
  CHECK(pair.target.num_edges() == g.num_edges());
  CHECK(degree_multiset(pair.target) == degree_multiset(g));
  // Features follow the permutation exactly.
  for (auto [src, dst] : pair.truth.pairs) {
    CHECK(pair.target.features.row(dst).cwiseEqual(g.features.row(src)).all());
  }
  // Every source edge maps to a target edge.
  std::vector<int> perm(g.n);
  for (auto [src, dst] : pair.truth.pairs) perm[src] = dst;
  for (auto [u, v] : g.edges) {
    int a = perm[u], b = perm[v];
    if (a > b) std::swap(a, b);
    CHECK(std::count(pair.target.edges.begin(), pair.target.edges.end(),
                     std::pair<int, int>(a, b)) == 1);
  }
}

TEST_CASE("synthetic generation is deterministic given the seed") {
  const Graph g = random_graph(15, 3, 0.3, 11);
  const SyntheticPair a = gen_synthetic_pair(g, 0.2, 0.1, 42);
  const SyntheticPair b = gen_synthetic_pair(g, 0.2, 0.1, 42);
  CHECK(a.target.edges == b.target.edges);
  CHECK(a.target.features.cwiseEqual(b.target.features).all());
  CHECK(a.truth.pairs == b.truth.pairs);
  const SyntheticPair c = gen_synthetic_pair(g, 0.2, 0.1, 43);
  CHECK(a.truth.pairs != c.truth.pairs);
}

TEST_CASE("edge perturbation stays within the binomial bound") {
  // m=100, p=0.1: removed and added are Binomial(100, 0.1), so the edge
  // count stays in [80, 120] except with probability ~1e-5 per draw.
  Graph g = random_graph(50, 2, 0.3, 5);
  REQUIRE(g.num_edges() >= 100);
  g.edges.resize(100);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SyntheticPair pair = gen_synthetic_pair(g, 0.1, 0.0, seed);
    CHECK(pair.target.num_edges() >= 80);
    CHECK(pair.target.num_edges() <= 120);
  }
}

TEST_CASE("graph files round-trip bit-identically") {
  const auto dir = temp_dir("roundtrip");
  Graph g = random_graph(9, 3, 0.4, 3);
  g.features(0, 0) = 0.1;       // not exactly representable
  g.features(1, 1) = 1.0 / 3.0;
  g.features(2, 2) = -2.5e-17;
  save_graph(g, (dir / "a.edges").string(), (dir / "a.feats").string());
  const Graph g2 =
      load_graph((dir / "a.edges").string(), (dir / "a.feats").string());
  CHECK(g2.edges == g.edges);
  CHECK(g2.features.cwiseEqual(g.features).all());  // bitwise
  save_graph(g2, (dir / "b.edges").string(), (dir / "b.feats").string());
  CHECK(read_file(dir / "a.edges") == read_file(dir / "b.edges"));
  CHECK(read_file(dir / "a.feats") == read_file(dir / "b.feats"));
}

TEST_CASE("anchor files round-trip") {
  const auto dir = temp_dir("anchors");
  GroundTruth gt;
  gt.pairs = {{0, 2}, {1, 0}, {2, 1}};
  save_anchors(gt, (dir / "a.tsv").string());
  const GroundTruth gt2 = load_anchors((dir / "a.tsv").string());
  CHECK(gt2.pairs == gt.pairs);
}

TEST_CASE("dense matrix loader validates the header and rows") {
  const auto dir = temp_dir("matio");
  write_file(dir / "bad.txt", "2 2\n1 2\n");
  CHECK_THROWS(load_dense_matrix((dir / "bad.txt").string()));
  write_file(dir / "bad2.txt", "2 2\n1 2\n3\n");
  CHECK_THROWS(load_dense_matrix((dir / "bad2.txt").string()));
}

}  // TEST_SUITE
