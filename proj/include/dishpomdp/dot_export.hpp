#pragma once

#include <cstdio>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dishpomdp/planner.hpp"

namespace dishpomdp {

/// Per-node and per-edge statistics estimated by forward simulation, used to
/// annotate the exported graph.
struct GraphAnnotations {
  std::vector<std::vector<double>> visit_prob;                 // [t][node]
  std::vector<std::vector<double>> expected_reward;            // [t][node], visit-weighted value
  std::vector<std::vector<std::vector<double>>> edge_prob;     // [t][node][obs]
  std::vector<std::vector<std::vector<std::string>>> extra;    // [t][node] label lines
};

namespace detail {

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

/// Computes visiting probabilities, node values, and observation-edge
/// frequencies by projecting b0 through the graph. `extra_lines`, when
/// provided, receives the weighted particles reaching each node and returns
/// additional label lines (e.g. per-object marginals).
template <GenerativeModel M>
GraphAnnotations annotate_graph(
    const PolicyGraph& graph, const ParticleBelief<typename M::State>& b0, int start_node,
    const M& model, RngStream& rng,
    const std::function<std::vector<std::string>(int, int, std::span<const NodeParticle<typename M::State>>)>&
        extra_lines = {}) {
  const int T = graph.horizon();
  const int W = graph.width();
  const int O = model.observation_count();

  GraphAnnotations ann;
  ann.visit_prob.assign(T, std::vector<double>(W, 0.0));
  ann.expected_reward.assign(T, std::vector<double>(W, 0.0));
  ann.edge_prob.assign(T, std::vector<std::vector<double>>(W, std::vector<double>(O, 0.0)));
  ann.extra.assign(T, std::vector<std::vector<std::string>>(W));

  RngStream fwd = rng.substream(1);
  auto beliefs = forward_beliefs(graph, b0, start_node, model, fwd);

  for (int t = 0; t < T; ++t) {
    std::vector<std::vector<NodeParticle<typename M::State>>> grouped(W);
    for (const auto& np : beliefs[t].particles) grouped[np.node].push_back(np);
    for (int q = 0; q < W; ++q) {
      double wq = 0.0;
      for (const auto& np : grouped[q]) wq += np.weight;
      ann.visit_prob[t][q] = wq;
      if (wq > 0.0) {
        double value = 0.0;
        std::uint64_t k = 0;
        for (const auto& np : grouped[q]) {
          RngStream roll = rng.substream(2, static_cast<std::uint64_t>(t), ++k);
          value += np.weight * rollout_value(graph, t, np.state, q, model, roll);
        }
        ann.expected_reward[t][q] = value;  // visit-weighted; value-at-node = er / visit_prob
        if (t + 1 < T) {
          RngStream obs_rng = rng.substream(3, static_cast<std::uint64_t>(t));
          const ActionId action = graph.layers[t][q].action;
          for (const auto& np : grouped[q]) {
            Step<typename M::State> step = model.sample_transition(np.state, action, obs_rng);
            ann.edge_prob[t][q][step.observation.value] += np.weight / wq;
          }
        }
      }
      if (extra_lines) ann.extra[t][q] = extra_lines(t, q, std::span<const NodeParticle<typename M::State>>(grouped[q]));
    }
  }
  return ann;
}

/// Renders the annotated graph as a Graphviz digraph. Node labels carry the
/// action, visiting probability in parentheses, expected reward, and the
/// reward/probability ratio; zero-probability nodes are dashed. Edge labels
/// carry the observation symbols and the observation probability.
inline std::string export_dot(const PolicyGraph& graph, const GraphAnnotations& ann,
                              const std::function<std::string(ActionId)>& action_label,
                              const std::function<std::string(ObservationId)>& obs_label) {
  using detail::fmt2;
  std::ostringstream out;
  out << "digraph policy {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=box];\n";
  const int T = graph.horizon();
  for (int t = 0; t < T; ++t) {
    for (int q = 0; q < static_cast<int>(graph.layers[t].size()); ++q) {
      const auto& node = graph.layers[t][q];
      const double visit = ann.visit_prob[t][q];
      const double er = ann.expected_reward[t][q];
      out << "  n" << t << "_" << q << " [label=\"" << action_label(node.action) << " ("
          << fmt2(visit) << ")\\n" << fmt2(er) << " / " << fmt2(visit > 0.0 ? er / visit : 0.0);
      for (const auto& line : ann.extra[t][q]) out << "\\n" << line;
      out << "\"";
      if (visit <= 0.0) out << " style=dashed";
      out << "];\n";
    }
  }
  for (int t = 0; t + 1 < T; ++t) {
    for (int q = 0; q < static_cast<int>(graph.layers[t].size()); ++q) {
      const auto& node = graph.layers[t][q];
      for (int o = 0; o < static_cast<int>(node.edges.size()); ++o) {
        const double p = ann.edge_prob[t][q][o];
        out << "  n" << t << "_" << q << " -> n" << (t + 1) << "_" << node.edges[o]
            << " [label=\"" << obs_label(ObservationId{o}) << " (" << fmt2(p) << ")\"";
        if (p <= 0.0) out << " style=dashed";
        out << "];\n";
      }
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace dishpomdp
