#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dishpomdp {

struct ActionId {
  std::int32_t value = 0;
  auto operator<=>(const ActionId&) const = default;
};

struct ObservationId {
  std::int32_t value = 0;
  auto operator<=>(const ObservationId&) const = default;
};

template <typename State>
struct Particle {
  double weight = 0.0;
  State state;
};

/// Weighted particle set representing a belief over states.
template <typename State>
struct ParticleBelief {
  std::vector<Particle<State>> particles;

  std::size_t size() const { return particles.size(); }
  bool empty() const { return particles.empty(); }

  double total_weight() const {
    double s = 0.0;
    for (const auto& p : particles) s += p.weight;
    return s;
  }

  // Throws if all weights are zero.
  void normalize() {
    const double s = total_weight();
    if (s <= 0.0) throw std::runtime_error("belief normalize: total weight is zero");
    for (auto& p : particles) p.weight /= s;
  }
};

struct StepRecord {
  ActionId action;
  ObservationId observation;
  double reward = 0.0;
};

struct EpisodeResult {
  double total_reward = 0.0;
  std::vector<StepRecord> steps;
  bool terminated_early = false;
};

/// Raised when a belief update leaves every particle with zero weight.
class BeliefCollapseError : public std::runtime_error {
 public:
  BeliefCollapseError() : std::runtime_error("belief collapse: observation impossible under every particle") {}
};

}  // namespace dishpomdp
