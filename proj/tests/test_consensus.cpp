// Graph average-consensus: one-step closed forms, convergence on the shipped
// graphs, conservation and monotonicity invariants, and loader validation.
#include "doctest.h"

#include "mfg/consensus.hpp"
#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

using namespace mfg;

namespace {

std::string scenario_path(const char* name) {
  return std::string(MFG_SCENARIO_DIR) + "/" + name;
}

std::string write_temp_graph(const char* name, const char* body) {
  const std::string path = std::string("test_") + name + ".graph";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("complete graph with weight 1/n averages in a single step") {
  const int n = 5;
  Graph g;
  g.n_nodes = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.edges.push_back({i, j, 1.0 / n});
  const Mat init = (Mat(n, 1) << 3.0, -1.0, 4.0, 1.0, 8.0).finished();
  const ConsensusRun run = average_consensus(g, init, 10, 1e-12);
  REQUIRE(run.converged_at.has_value());
  CHECK(*run.converged_at == 1);
  CHECK(run.average[0] == doctest::Approx(3.0).epsilon(1e-15));
  for (int i = 0; i < n; ++i)
    CHECK(run.iterates[1](i, 0) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("two nodes with weight 1/2 meet at the midpoint in one step") {
  Graph g;
  g.n_nodes = 2;
  g.edges.push_back({0, 1, 0.5});
  const Mat init = (Mat(2, 1) << 1.0, 5.0).finished();
  const ConsensusRun run = average_consensus(g, init, 5, 1e-14);
  REQUIRE(run.converged_at.has_value());
  CHECK(*run.converged_at == 1);
  CHECK(run.iterates[1](0, 0) == 3.0);
  CHECK(run.iterates[1](1, 0) == 3.0);
}

TEST_CASE("shipped path graph reaches the average well inside the budget") {
  const Graph g = load_graph(scenario_path("path6.graph"));
  CHECK(g.n_nodes == 6);
  const Mat init = (Mat(6, 1) << 10.0, 2.0, -4.0, 7.0, 0.0, 3.0).finished();
  const ConsensusRun run = average_consensus(g, init, 500, 1e-10);
  REQUIRE(run.converged_at.has_value());
  CHECK(*run.converged_at <= 500);
  CHECK(run.final_error <= 1e-10);
  const double avg = (10.0 + 2.0 - 4.0 + 7.0 + 0.0 + 3.0) / 6.0;
  CHECK(run.average[0] == doctest::Approx(avg).epsilon(1e-15));
}

TEST_CASE("disconnected graph settles on per-component averages") {
  const Graph g = load_graph(scenario_path("disconnected6.graph"));
  const Mat init = (Mat(6, 1) << 3.0, 6.0, 9.0, -2.0, 0.0, 8.0).finished();
  const ConsensusRun run = average_consensus(g, init, 2000, 1e-10);
  // The global average is unreachable across components.
  CHECK_FALSE(run.converged_at.has_value());
  CHECK(run.final_error > 1e-3);

  const Mat& last = run.iterates.back();
  const double avg012 = (3.0 + 6.0 + 9.0) / 3.0;
  const double avg345 = (-2.0 + 0.0 + 8.0) / 3.0;
  for (int i = 0; i < 3; ++i)
    CHECK(last(i, 0) == doctest::Approx(avg012).epsilon(1e-8));
  for (int i = 3; i < 6; ++i)
    CHECK(last(i, 0) == doctest::Approx(avg345).epsilon(1e-8));
}

TEST_CASE("iteration conserves the sum and contracts the max deviation") {
  const Graph g = load_graph(scenario_path("path6.graph"));
  const Mat init = (Mat(6, 1) << 1.0, -3.0, 2.5, 0.25, -1.75, 4.0).finished();
  const ConsensusRun run = average_consensus(g, init, 200, 1e-12);
  const double sum0 = init.col(0).sum();
  double prev_dev = std::numeric_limits<double>::infinity();
  for (const Mat& Y : run.iterates) {
    CHECK(std::abs(Y.col(0).sum() - sum0) <= 1e-12 * (1.0 + std::abs(sum0)));
    double dev = 0.0;
    for (int i = 0; i < 6; ++i)
      dev = std::max(dev, std::abs(Y(i, 0) - run.average[0]));
    CHECK(dev <= prev_dev + 1e-15);
    prev_dev = dev;
  }
}

TEST_CASE("vector-valued node states average componentwise") {
  Graph g;
  g.n_nodes = 2;
  g.edges.push_back({0, 1, 0.5});
  const Mat init = (Mat(2, 2) << 1.0, -2.0, 3.0, 6.0).finished();
  const ConsensusRun run = average_consensus(g, init, 5, 1e-14);
  REQUIRE(run.converged_at.has_value());
  CHECK(run.iterates[1](0, 0) == 2.0);
  CHECK(run.iterates[1](0, 1) == 2.0);
  CHECK(run.iterates[1](1, 1) == 2.0);
}

TEST_CASE("loader rejects malformed or unstable graphs") {
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)load_graph("/nonexistent/g.graph"), InputError);
  }
  SUBCASE("self-loop") {
    const std::string p = write_temp_graph("selfloop", "nodes 2\n0 0 0.3\n");
    CHECK_THROWS_AS((void)load_graph(p), InputError);
    std::remove(p.c_str());
  }
  SUBCASE("non-positive weight") {
    const std::string p = write_temp_graph("negw", "0 1 -0.2\n");
    CHECK_THROWS_AS((void)load_graph(p), InputError);
    std::remove(p.c_str());
  }
  SUBCASE("unstable incident weight") {
    const std::string p =
        write_temp_graph("heavy", "0 1 0.6\n1 2 0.6\n");
    CHECK_THROWS_AS((void)load_graph(p), InputError);
    std::remove(p.c_str());
  }
  SUBCASE("malformed edge line") {
    const std::string p = write_temp_graph("bad", "0 1\n");
    CHECK_THROWS_AS((void)load_graph(p), InputError);
    std::remove(p.c_str());
  }
}

TEST_CASE("node count comes from the directive or the largest index") {
  const std::string p1 = write_temp_graph(
      "directive", "# isolated node included via the directive\nnodes 4\n0 1 0.4\n");
  const Graph g1 = load_graph(p1);
  CHECK(g1.n_nodes == 4);
  std::remove(p1.c_str());

  const std::string p2 = write_temp_graph("implicit", "0 3 0.4\n");
  const Graph g2 = load_graph(p2);
  CHECK(g2.n_nodes == 4);
  CHECK(g2.edges.size() == 1);
  std::remove(p2.c_str());
}

TEST_CASE("initial value shape must match the node count") {
  Graph g;
  g.n_nodes = 3;
  g.edges.push_back({0, 1, 0.3});
  g.edges.push_back({1, 2, 0.3});
  CHECK_THROWS_AS((void)average_consensus(g, Mat::Zero(2, 1), 10, 1e-8),
                  InputError);
}
