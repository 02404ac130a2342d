#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "dishpomdp/belief.hpp"
#include "dishpomdp/model.hpp"
#include "dishpomdp/policy_graph.hpp"
#include "dishpomdp/rng.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

template <typename State>
struct NodeParticle {
  double weight = 0.0;
  State state;
  int node = 0;
};

/// Belief over (state, node) pairs for one policy graph layer. Holds exactly
/// the N particles of the initial belief; weights sum to 1.
template <typename State>
struct NodeBelief {
  std::vector<NodeParticle<State>> particles;
};

/// Projects b0 through the graph: layer 0 places every particle at
/// start_node; each later layer follows the node's action and the sampled
/// observation's edge. Particle weights never change.
template <GenerativeModel M>
std::vector<NodeBelief<typename M::State>> forward_beliefs(const PolicyGraph& graph,
                                                           const ParticleBelief<typename M::State>& b0,
                                                           int start_node, const M& model,
                                                           RngStream& rng) {
  const int T = graph.horizon();
  std::vector<NodeBelief<typename M::State>> beliefs(T);
  beliefs[0].particles.reserve(b0.size());
  for (const auto& p : b0.particles) beliefs[0].particles.push_back({p.weight, p.state, start_node});
  for (int t = 0; t + 1 < T; ++t) {
    beliefs[t + 1].particles.reserve(b0.size());
    for (const auto& np : beliefs[t].particles) {
      const PolicyGraphNode& node = graph.layers[t][np.node];
      Step<typename M::State> step = model.sample_transition(np.state, node.action, rng);
      const int next = node.edges[step.observation.value];
      beliefs[t + 1].particles.push_back({np.weight, std::move(step.next), next});
    }
  }
  return beliefs;
}

/// Single Monte-Carlo sample of the value of following the graph from
/// (state, node) at layer t until the last layer. When the model exposes
/// exact expected rewards they replace the sampled reward at every step
/// (the state still evolves by sampling), which cuts estimator variance
/// without changing the expectation.
template <GenerativeModel M>
double rollout_value(const PolicyGraph& graph, int t, typename M::State state, int node,
                     const M& model, RngStream& rng, int depth_cap = 0) {
  const int T = graph.horizon();
  int end = T;
  if (depth_cap > 0) end = std::min(T, t + depth_cap);
  double total = 0.0;
  for (int layer = t; layer < end; ++layer) {
    if (model.is_terminal(state)) break;
    const PolicyGraphNode& gn = graph.layers[layer][node];
    if constexpr (HasExpectedReward<M>) {
      total += model.expected_reward(state, gn.action);
      if (layer + 1 == end) break;
    }
    Step<typename M::State> step = model.sample_transition(state, gn.action, rng);
    if constexpr (!HasExpectedReward<M>) total += step.reward;
    state = std::move(step.next);
    if (layer + 1 < T) node = gn.edges[step.observation.value];
  }
  return total;
}

/// Executes `depth` uniformly random actions from b0, updating with
/// belief_update_exec against observations drawn from the belief-weighted
/// predictive distribution. On belief collapse retries with a fresh seed up
/// to 10 times, then returns b0.
template <GenerativeModel M>
ParticleBelief<typename M::State> sample_reachable_belief(const ParticleBelief<typename M::State>& b0,
                                                          const M& model, int depth, RngStream& rng,
                                                          double ess_threshold = 0.1) {
  for (int attempt = 0; attempt < 10; ++attempt) {
    RngStream local = rng.substream(0x5e11ebULL, static_cast<std::uint64_t>(attempt));
    ParticleBelief<typename M::State> belief = b0;
    bool failed = false;
    for (int d = 0; d < depth; ++d) {
      const ActionId action{static_cast<std::int32_t>(local.uniform_int(model.action_count()))};
      // predictive observation: weighted particle, then one sampled transition
      double u = local.uniform() * belief.total_weight();
      std::size_t pick = 0;
      for (; pick + 1 < belief.size(); ++pick) {
        u -= belief.particles[pick].weight;
        if (u <= 0.0) break;
      }
      Step<typename M::State> probe =
          model.sample_transition(belief.particles[pick].state, action, local);
      try {
        belief = belief_update_exec(belief, action, probe.observation, model, local, ess_threshold);
      } catch (const BeliefCollapseError&) {
        failed = true;
        break;
      }
    }
    if (!failed) return belief;
  }
  return b0;
}

namespace detail {

template <typename State>
struct WeightedState {
  double weight;
  const State* state;
};

/// Candidate scan for one node: picks the action and per-observation edges
/// maximizing expected immediate reward plus simulated continuation value for
/// the given weighted state set. Edges are selected with one set of rollouts
/// and the chosen plan is re-valued with independent rollouts (a double-Q
/// style split): taking the per-observation max of the same noisy estimates
/// that score the action would systematically inflate actions that scatter
/// their samples across many observation cells.
template <GenerativeModel M>
std::pair<PolicyGraphNode, double> optimize_node(const PolicyGraph& graph, int t,
                                                 std::span<const WeightedState<typename M::State>> states,
                                                 const PolicyGraphNode& current, const M& model,
                                                 const PlannerConfig& config, RngStream& rng) {
  const int T = graph.horizon();
  const int A = model.action_count();
  const int O = model.observation_count();
  const int Wnext = (t + 1 < T) ? static_cast<int>(graph.layers[t + 1].size()) : 0;
  const int R = config.rollouts_per_candidate;

  double total_weight = 0.0;
  for (const auto& ws : states) total_weight += ws.weight;

  PolicyGraphNode best = current;
  double best_value = -std::numeric_limits<double>::infinity();
  std::uint64_t sample_counter = 0;

  std::vector<double> q;       // [o * Wnext + n] weighted value sums
  std::vector<double> obs_w;   // weight mass per observed symbol
  struct Sample {
    double weight;
    int obs;
    typename M::State next;
  };
  std::vector<Sample> samples;

  for (int a = 0; a < A; ++a) {
    const ActionId action{a};
    double immediate = 0.0;
    if constexpr (HasExpectedReward<M>) {
      for (const auto& ws : states) immediate += ws.weight * model.expected_reward(*ws.state, action);
      immediate /= total_weight;
    }

    double value;
    PolicyGraphNode candidate;
    candidate.action = action;
    if (t + 1 == T) {
      if constexpr (HasExpectedReward<M>) {
        value = immediate;
      } else {
        double acc = 0.0;
        for (const auto& ws : states) {
          for (int r = 0; r < R; ++r) {
            acc += ws.weight * model.sample_transition(*ws.state, action, rng).reward;
          }
        }
        value = acc / (total_weight * R);
      }
    } else {
      q.assign(static_cast<std::size_t>(O) * Wnext, 0.0);
      obs_w.assign(O, 0.0);
      samples.clear();
      double sampled_immediate = 0.0;
      for (const auto& ws : states) {
        for (int r = 0; r < R; ++r) {
          Step<typename M::State> step = model.sample_transition(*ws.state, action, rng);
          sampled_immediate += ws.weight * step.reward;
          const int o = step.observation.value;
          obs_w[o] += ws.weight;
          ++sample_counter;
          for (int n = 0; n < Wnext; ++n) {
            RngStream roll = rng.substream(sample_counter, static_cast<std::uint64_t>(n));
            q[static_cast<std::size_t>(o) * Wnext + n] +=
                ws.weight * rollout_value(graph, t + 1, step.next, n, model, roll,
                                          config.rollout_depth_cap);
          }
          samples.push_back({ws.weight, o, std::move(step.next)});
        }
      }
      if constexpr (!HasExpectedReward<M>) {
        immediate = sampled_immediate / (total_weight * R);
      }
      candidate.edges.assign(O, 0);
      for (int o = 0; o < O; ++o) {
        if (obs_w[o] <= 0.0) {
          // never sampled for this action: keep the existing edge
          candidate.edges[o] = current.edges.empty() ? 0 : current.edges[o];
          continue;
        }
        int best_n = 0;
        double best_q = q[static_cast<std::size_t>(o) * Wnext];
        for (int n = 1; n < Wnext; ++n) {
          const double v = q[static_cast<std::size_t>(o) * Wnext + n];
          if (v > best_q) {
            best_q = v;
            best_n = n;
          }
        }
        candidate.edges[o] = best_n;
      }
      // independent re-valuation of the selected edges
      double continuation = 0.0;
      std::uint64_t k = 0;
      for (const auto& sample : samples) {
        RngStream roll = rng.substream(0x2eedULL, ++k);
        continuation += sample.weight * rollout_value(graph, t + 1, sample.next,
                                                      candidate.edges[sample.obs], model, roll,
                                                      config.rollout_depth_cap);
      }
      value = immediate + continuation / (total_weight * R);

      // the incumbent's exact edge set competes on equal footing, so a noisy
      // scan cannot silently replace a good node with a worse rebuild
      if (action == current.action && static_cast<int>(current.edges.size()) == O) {
        double cur_cont = 0.0;
        k = 0;
        for (const auto& sample : samples) {
          RngStream roll = rng.substream(0x51deULL, ++k);
          cur_cont += sample.weight * rollout_value(graph, t + 1, sample.next,
                                                    current.edges[sample.obs], model, roll,
                                                    config.rollout_depth_cap);
        }
        const double cur_value = immediate + cur_cont / (total_weight * R);
        if (cur_value >= value) {
          candidate = current;
          value = cur_value;
        }
      }
    }

    if (value > best_value) {
      best_value = value;
      best = std::move(candidate);
    }
  }
  return {best, best_value};
}

template <GenerativeModel M>
std::vector<WeightedState<typename M::State>> surrogate_states(
    const ParticleBelief<typename M::State>& b0, const M& model, const PlannerConfig& config,
    RngStream& rng, ParticleBelief<typename M::State>& storage) {
  const int depth = rng.uniform_int(std::max(1, config.horizon));
  RngStream sub = rng.substream(0xabcdULL, static_cast<std::uint64_t>(depth));
  storage = sample_reachable_belief(b0, model, depth, sub, config.ess_threshold);
  std::vector<WeightedState<typename M::State>> out;
  out.reserve(storage.size());
  for (const auto& p : storage.particles) out.push_back({p.weight, &p.state});
  return out;
}

}  // namespace detail

/// Re-optimizes every node of layer t for its forward belief. Nodes carrying
/// no probability mass are optimized against a freshly sampled reachable
/// belief instead of being skipped.
template <GenerativeModel M>
void backup_layer(PolicyGraph& graph, int t, const NodeBelief<typename M::State>& layer_belief,
                  const ParticleBelief<typename M::State>& b0, const M& model,
                  const PlannerConfig& config, RngStream& rng) {
  using WS = detail::WeightedState<typename M::State>;
  const int W = static_cast<int>(graph.layers[t].size());
  std::vector<std::vector<WS>> by_node(W);
  for (const auto& np : layer_belief.particles) {
    if (np.weight > 0.0) by_node[np.node].push_back({np.weight, &np.state});
  }
  for (int qi = 0; qi < W; ++qi) {
    ParticleBelief<typename M::State> storage;
    std::span<const WS> states(by_node[qi]);
    std::vector<WS> surrogate;
    if (states.empty()) {
      surrogate = detail::surrogate_states(b0, model, config, rng, storage);
      states = std::span<const WS>(surrogate);
    }
    auto [node, value] = detail::optimize_node(graph, t, states, graph.layers[t][qi], model, config, rng);
    graph.layers[t][qi] = std::move(node);
  }
}

/// Re-optimizes any node whose (action, edges) duplicates an earlier node of
/// the same layer against a sampled reachable belief. Incoming edges are
/// redirected to the canonical copy first, so the graph value for b0 is
/// unchanged: after the redirect no mass routes through the duplicate. The
/// start node of layer 0 has no redirectable incoming edge and is left alone.
template <GenerativeModel M>
void deduplicate_nodes(PolicyGraph& graph, int t, int start_node,
                       const ParticleBelief<typename M::State>& b0, const M& model,
                       const PlannerConfig& config, RngStream& rng) {
  using WS = detail::WeightedState<typename M::State>;
  auto& layer = graph.layers[t];
  for (std::size_t i = 1; i < layer.size(); ++i) {
    int canonical = -1;
    for (std::size_t j = 0; j < i; ++j) {
      if (layer[j] == layer[i]) {
        canonical = static_cast<int>(j);
        break;
      }
    }
    if (canonical < 0) continue;
    if (t == 0) {
      if (static_cast<int>(i) == start_node) continue;
    } else {
      for (auto& prev : graph.layers[t - 1]) {
        for (auto& e : prev.edges) {
          if (e == static_cast<int>(i)) e = canonical;
        }
      }
    }
    ParticleBelief<typename M::State> storage;
    std::vector<WS> states = detail::surrogate_states(b0, model, config, rng, storage);
    auto [node, value] =
        detail::optimize_node(graph, t, std::span<const WS>(states), layer[i], model, config, rng);
    layer[i] = std::move(node);
  }
}

/// Monte-Carlo value of the graph for b0, rooted at start_node. Particles are
/// drawn from b0 by a systematic sweep over the weight CDF.
template <GenerativeModel M>
ValueEstimate evaluate_policy(const PolicyGraph& graph, const ParticleBelief<typename M::State>& b0,
                              int start_node, const M& model, const PlannerConfig& config,
                              RngStream& rng) {
  const int K = config.eval_rollouts;
  const double step = 1.0 / static_cast<double>(K);
  const double u = rng.uniform() * step;
  double mean = 0.0, m2 = 0.0;
  double cum = b0.particles[0].weight;
  std::size_t idx = 0;
  for (int k = 0; k < K; ++k) {
    const double target = u + k * step;
    while (cum < target && idx + 1 < b0.size()) {
      ++idx;
      cum += b0.particles[idx].weight;
    }
    RngStream roll = rng.substream(0xe7a1ULL, static_cast<std::uint64_t>(k));
    const double v = rollout_value(graph, 0, b0.particles[idx].state, start_node, model, roll,
                                   config.rollout_depth_cap);
    const double delta = v - mean;
    mean += delta / (k + 1);
    m2 += delta * (v - mean);
  }
  const double var = (K > 1) ? m2 / (K - 1) : 0.0;
  return {mean, std::sqrt(var / K), K};
}

/// Monotonic improvement: per round, recompute layer beliefs, back up layers
/// last-to-first, then deduplicate. Returns the improved graph and a value
/// estimate for b0 computed with evaluation streams derived from config.seed,
/// so estimates from successive calls share random numbers.
template <GenerativeModel M>
ValueEstimate improve(PolicyGraph& graph, const ParticleBelief<typename M::State>& b0, int start_node,
                      const M& model, const PlannerConfig& config, int rounds, RngStream& rng) {
  const int T = graph.horizon();
  for (int round = 0; round < rounds; ++round) {
    RngStream round_rng = rng.substream(0xf0f0ULL, static_cast<std::uint64_t>(round));
    RngStream fwd = round_rng.substream(1);
    auto beliefs = forward_beliefs(graph, b0, start_node, model, fwd);
    for (int t = T - 1; t >= 0; --t) {
      RngStream bk = round_rng.substream(2, static_cast<std::uint64_t>(t));
      backup_layer(graph, t, beliefs[t], b0, model, config, bk);
    }
    if (config.dedup_every_round) {
      for (int t = 0; t < T; ++t) {
        RngStream dd = round_rng.substream(3, static_cast<std::uint64_t>(t));
        deduplicate_nodes(graph, t, start_node, b0, model, config, dd);
      }
    }
  }
  RngStream eval = RngStream(config.seed).substream(0xeea1ULL);
  return evaluate_policy(graph, b0, start_node, model, config, eval);
}

/// Action prescribed by the current start node.
inline ActionId select_action(const PolicyGraph& graph, int start_node) {
  return graph.layers.at(0).at(start_node).action;
}

template <typename State>
struct OnlineStep {
  PolicyGraph graph;
  ParticleBelief<State> belief;
  int start_node = 0;
};

/// Receding-horizon shift: update the belief with the executed action and
/// observation, drop the first graph layer, append a random last layer (with
/// fresh random edges on the layer before it), root the plan at the node the
/// executed observation edge pointed to, then re-improve. Propagates
/// BeliefCollapseError; recovery is the caller's choice.
template <GenerativeModel M>
OnlineStep<typename M::State> advance_online(const PolicyGraph& graph, ActionId executed_action,
                                             ObservationId observation,
                                             const ParticleBelief<typename M::State>& prev_belief,
                                             int prev_start_node, const M& model,
                                             const PlannerConfig& config, RngStream& rng) {
  if (observation.value < 0 || observation.value >= model.observation_count())
    throw std::invalid_argument("advance_online: invalid observation");
  const int T = graph.horizon();

  OnlineStep<typename M::State> out;
  RngStream update_rng = rng.substream(1);
  out.belief = belief_update_exec(prev_belief, executed_action, observation, model, update_rng,
                                  config.ess_threshold);
  out.start_node = graph.layers[0][prev_start_node].edges.empty()
                       ? 0
                       : graph.layers[0][prev_start_node].edges[observation.value];

  RngStream init_rng = rng.substream(2);
  out.graph.layers.assign(graph.layers.begin() + 1, graph.layers.end());
  const int O = model.observation_count();
  std::vector<PolicyGraphNode> last(config.width);
  for (auto& node : last) node.action.value = init_rng.uniform_int(model.action_count());
  if (!out.graph.layers.empty()) {
    for (auto& node : out.graph.layers.back()) {
      node.edges.assign(O, 0);
      for (auto& e : node.edges) e = init_rng.uniform_int(config.width);
    }
  }
  out.graph.layers.push_back(std::move(last));

  RngStream improve_rng = rng.substream(3);
  improve(out.graph, out.belief, out.start_node, model, config, config.online_rounds, improve_rng);
  return out;
}

}  // namespace dishpomdp
