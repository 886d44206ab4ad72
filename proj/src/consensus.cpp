// Synchronous average-consensus iteration on an undirected weighted graph,
// plus the edge-list loader. The update conserves the node sum exactly, so
// convergence is always toward the true initial average.
#include "mfg/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mfg {

std::vector<std::string> Graph::validate() const {
  std::vector<std::string> v;
  if (n_nodes < 1) v.push_back("graph needs at least one node");
  std::vector<double> row_sum(static_cast<size_t>(std::max(n_nodes, 0)), 0.0);
  for (const auto& e : edges) {
    if (e.i < 0 || e.i >= n_nodes || e.j < 0 || e.j >= n_nodes) {
      v.push_back("edge endpoint out of range");
      continue;
    }
    if (e.i == e.j) v.push_back("self-loop on node " + std::to_string(e.i));
    if (!(e.w > 0.0)) v.push_back("non-positive edge weight");
    row_sum[static_cast<size_t>(e.i)] += e.w;
    row_sum[static_cast<size_t>(e.j)] += e.w;
  }
  for (int i = 0; i < n_nodes; ++i)
    if (row_sum[static_cast<size_t>(i)] > 1.0 + 1e-12)
      v.push_back("incident weight above 1 at node " + std::to_string(i) +
                  "; the iteration would not be a stable averaging step");
  return v;
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open graph file: " + path);
  Graph g;
  int max_node = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;
    if (first[0] == '#') continue;
    if (first == "nodes") {
      if (!(ss >> g.n_nodes))
        throw InputError(path + ":" + std::to_string(lineno) +
                         ": bad node count");
      continue;
    }
    Graph::Edge e;
    try {
      e.i = std::stoi(first);
    } catch (const std::exception&) {
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected an edge line 'i j weight'");
    }
    if (!(ss >> e.j >> e.w))
      throw InputError(path + ":" + std::to_string(lineno) +
                       ": expected an edge line 'i j weight'");
    max_node = std::max(max_node, std::max(e.i, e.j));
    g.edges.push_back(e);
  }
  g.n_nodes = std::max(g.n_nodes, max_node + 1);
  const auto violations = g.validate();
  if (!violations.empty())
    throw InputError("invalid graph " + path + ": " + violations.front());
  return g;
}

ConsensusRun average_consensus(const Graph& graph, const Mat& initial,
                               int max_steps, double tol) {
  if (static_cast<int>(initial.rows()) != graph.n_nodes)
    throw InputError("average_consensus: initial values must have one row "
                     "per node");
  if (max_steps < 0) throw InputError("average_consensus: negative max_steps");

  ConsensusRun run;
  run.average = initial.colwise().mean().transpose();

  auto max_dev = [&](const Mat& Y) {
    double m = 0.0;
    for (int i = 0; i < graph.n_nodes; ++i)
      m = std::max(
          m, (Y.row(i).transpose() - run.average).cwiseAbs().maxCoeff());
    return m;
  };

  Mat Y = initial;
  run.iterates.push_back(Y);
  if (max_dev(Y) <= tol) run.converged_at = 0;
  for (int k = 1; k <= max_steps && !run.converged_at; ++k) {
    Mat delta = Mat::Zero(Y.rows(), Y.cols());
    for (const auto& e : graph.edges) {
      const Vec diff = (Y.row(e.j) - Y.row(e.i)).transpose();
      delta.row(e.i) += e.w * diff.transpose();
      delta.row(e.j) -= e.w * diff.transpose();
    }
    Y += delta;
    run.iterates.push_back(Y);
    if (max_dev(Y) <= tol) run.converged_at = k;
  }
  run.final_error = max_dev(Y);
  return run;
}

}  // namespace mfg
