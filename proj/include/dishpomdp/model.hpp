#pragma once

#include <concepts>

#include "dishpomdp/rng.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

template <typename State>
struct Step {
  State next;
  ObservationId observation;
  double reward = 0.0;
};

/// Capabilities a domain must provide to the belief machinery and the
/// planner. Transitions are sampled; observation_probability must be a proper
/// distribution over observations for fixed (next state, action).
template <typename M>
concept GenerativeModel = requires(const M& m, const typename M::State& s, ActionId a,
                                   ObservationId o, RngStream& rng) {
  typename M::State;
  { m.action_count() } -> std::convertible_to<int>;
  { m.observation_count() } -> std::convertible_to<int>;
  { m.sample_transition(s, a, rng) } -> std::same_as<Step<typename M::State>>;
  { m.is_terminal(s) } -> std::convertible_to<bool>;
  { m.observation_probability(o, s, a) } -> std::convertible_to<double>;
};

/// Optional capability: exact expected immediate reward. When present the
/// planner uses it for last-layer backups instead of sampled rewards.
template <typename M>
concept HasExpectedReward = requires(const M& m, const typename M::State& s, ActionId a) {
  { m.expected_reward(s, a) } -> std::convertible_to<double>;
};

}  // namespace dishpomdp
