#pragma once

#include <stdexcept>
#include <vector>

#include "dishpomdp/rng.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

/// One policy graph node: an action plus one outgoing edge per observation
/// symbol into the next layer. Last-layer nodes carry no edges.
struct PolicyGraphNode {
  ActionId action;
  std::vector<int> edges;

  bool operator==(const PolicyGraphNode&) const = default;
};

/// Layered conditional plan with fixed depth (horizon) and width.
struct PolicyGraph {
  std::vector<std::vector<PolicyGraphNode>> layers;

  int horizon() const { return static_cast<int>(layers.size()); }
  int width() const { return layers.empty() ? 0 : static_cast<int>(layers.front().size()); }
};

struct PlannerConfig {
  int horizon = 3;
  int width = 3;
  int particles = 2000;
  int rollouts_per_candidate = 1;
  int offline_rounds = 10;
  int online_rounds = 4;
  int eval_rollouts = 500;
  double ess_threshold = 0.1;
  bool dedup_every_round = true;
  int rollout_depth_cap = 0;  // 0 = full horizon
  std::uint64_t seed = 0;

  void validate() const {
    if (horizon < 1) throw std::invalid_argument("planner config: horizon must be >= 1");
    if (width < 1) throw std::invalid_argument("planner config: width must be >= 1");
    if (particles < 1) throw std::invalid_argument("planner config: particles must be >= 1");
    if (rollouts_per_candidate < 1)
      throw std::invalid_argument("planner config: rollouts_per_candidate must be >= 1");
    if (eval_rollouts < 1) throw std::invalid_argument("planner config: eval_rollouts must be >= 1");
    if (ess_threshold < 0.0 || ess_threshold > 1.0)
      throw std::invalid_argument("planner config: ess_threshold must be in [0,1]");
  }
};

struct ValueEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
};

inline void validate_graph(const PolicyGraph& g, int action_count, int observation_count) {
  const int T = g.horizon();
  for (int t = 0; t < T; ++t) {
    for (const auto& node : g.layers[t]) {
      if (node.action.value < 0 || node.action.value >= action_count)
        throw std::runtime_error("policy graph: action index out of range");
      if (t + 1 < T) {
        if (static_cast<int>(node.edges.size()) != observation_count)
          throw std::runtime_error("policy graph: node must have one edge per observation");
        for (int target : node.edges) {
          if (target < 0 || target >= static_cast<int>(g.layers[t + 1].size()))
            throw std::runtime_error("policy graph: edge target out of range");
        }
      } else if (!node.edges.empty()) {
        throw std::runtime_error("policy graph: last layer must have no edges");
      }
    }
  }
}

/// T x W graph with uniformly random actions and edges.
inline PolicyGraph init_random_graph(const PlannerConfig& config, int action_count,
                                     int observation_count, RngStream& rng) {
  config.validate();
  PolicyGraph g;
  g.layers.resize(config.horizon);
  for (int t = 0; t < config.horizon; ++t) {
    g.layers[t].resize(config.width);
    for (auto& node : g.layers[t]) {
      node.action.value = rng.uniform_int(action_count);
      if (t + 1 < config.horizon) {
        node.edges.resize(observation_count);
        for (auto& e : node.edges) e = rng.uniform_int(config.width);
      }
    }
  }
  return g;
}

}  // namespace dishpomdp
