#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>

#include "dishpomdp/model.hpp"
#include "dishpomdp/rng.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

/// ESS = 1 / sum(w^2). Expects normalized weights.
template <typename State>
double effective_sample_size(const ParticleBelief<State>& belief) {
  if (belief.empty()) throw std::runtime_error("effective_sample_size: empty belief");
  double s = 0.0;
  for (const auto& p : belief.particles) s += p.weight * p.weight;
  return 1.0 / s;
}

/// Systematic (low-variance) resampling to uniform weights.
template <typename State>
ParticleBelief<State> resample(const ParticleBelief<State>& belief, RngStream& rng) {
  if (belief.empty()) throw std::runtime_error("resample: empty belief");
  const std::size_t n = belief.size();
  ParticleBelief<State> out;
  out.particles.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  double u = rng.uniform() * step;
  double cum = belief.particles[0].weight;
  std::size_t i = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double target = u + static_cast<double>(j) * step;
    while (cum < target && i + 1 < n) {
      ++i;
      cum += belief.particles[i].weight;
    }
    out.particles.push_back({step, belief.particles[i].state});
  }
  return out;
}

/// Particle filter step: advance every particle under `action`, weight by
/// P(o | s', a), renormalize, and resample when ESS/N drops below
/// `ess_threshold`. Throws BeliefCollapseError when the observation is
/// impossible under every particle.
template <GenerativeModel M>
ParticleBelief<typename M::State> belief_update_exec(
    const ParticleBelief<typename M::State>& belief, ActionId action, ObservationId observation,
    const M& model, RngStream& rng, double ess_threshold = 0.1) {
  if (belief.empty()) throw std::runtime_error("belief_update_exec: empty belief");
  ParticleBelief<typename M::State> out;
  out.particles.reserve(belief.size());
  double total = 0.0;
  for (const auto& p : belief.particles) {
    Step<typename M::State> step = model.sample_transition(p.state, action, rng);
    const double w = p.weight * model.observation_probability(observation, step.next, action);
    total += w;
    out.particles.push_back({w, std::move(step.next)});
  }
  if (total <= 0.0) throw BeliefCollapseError();
  for (auto& p : out.particles) p.weight /= total;
  const double ess = effective_sample_size(out);
  if (ess / static_cast<double>(out.size()) < ess_threshold) {
    out = resample(out, rng);
  }
  return out;
}

/// Runs one episode against the environment model. The policy is called with
/// the step index and the realized history so far; stateful policies carry
/// their belief between calls. Stops on a terminal state or after `horizon`
/// steps.
template <GenerativeModel M, typename Policy>
EpisodeResult run_episode(const M& env, typename M::State state, Policy&& policy, int horizon,
                          RngStream& rng) {
  if (horizon < 1) throw std::invalid_argument("run_episode: horizon must be >= 1");
  EpisodeResult result;
  for (int step = 0; step < horizon; ++step) {
    const ActionId action = policy(step, std::span<const StepRecord>(result.steps));
    if (action.value < 0 || action.value >= env.action_count()) {
      throw std::runtime_error("run_episode: policy returned invalid action");
    }
    Step<typename M::State> tr = env.sample_transition(state, action, rng);
    result.steps.push_back({action, tr.observation, tr.reward});
    result.total_reward += tr.reward;
    state = std::move(tr.next);
    if (env.is_terminal(state)) {
      result.terminated_early = step + 1 < horizon;
      break;
    }
  }
  return result;
}

}  // namespace dishpomdp
