// Synchronous graph average-consensus iteration used to supply the
// population's initial average to the decentralized strategies.
#pragma once

#include "mfg/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfg {

struct Graph {
  struct Edge {
    int i = 0, j = 0;
    double w = 0.0;
  };
  int n_nodes = 0;
  std::vector<Edge> edges;  // undirected, no self-loops, positive weights

  [[nodiscard]] std::vector<std::string> validate() const;
};

// Edge-list text format: one "i j weight" triple per line, 0-based nodes;
// lines starting with '#' are comments.
[[nodiscard]] Graph load_graph(const std::string& path);

struct ConsensusRun {
  std::vector<Mat> iterates;  // node x n value matrix per iteration (incl. 0)
  std::optional<int> converged_at;
  double final_error = 0.0;
  Vec average;  // true average of the initial values
};

// y_i(k+1) = y_i(k) + sum_{j in N_i} l_ij (y_j(k) - y_i(k)). Converged when
// every node is within tol of the true initial average (which the iteration
// conserves). Hitting max_steps is reported, not fatal.
[[nodiscard]] ConsensusRun average_consensus(const Graph& graph,
                                             const Mat& initial, int max_steps,
                                             double tol);

}  // namespace mfg
