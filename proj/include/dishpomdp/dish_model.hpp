#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "dishpomdp/model.hpp"
#include "dishpomdp/rng.hpp"
#include "dishpomdp/scene.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

struct DomainRewards {
  double wash_dirty = 5.0;
  double wash_clean = -10.0;
  double grasp_fail = -0.5;
  double lift = -0.5;
  double finish_per_dirty = -5.0;
};

struct DomainParams {
  double theta_g1 = -0.904, theta_g2 = -0.087;  // grasp prior
  double theta_d1 = -0.895, theta_d2 = -0.087;  // dirty-observation
  double theta_c1 = -0.193, theta_c2 = 0.0;     // clean-observation
  double n_prior = 0.5;
  int k = 2;  // observed neighbors per action
  DomainRewards rewards;
  int max_steps = 10;

  void validate() const;
};

/// Occlusion-dependent grasp success prior, min(1, exp(theta_g1*occl + theta_g2)).
double grasp_prior(double occl, const DomainParams& params);

/// Beta-posterior mean combining the occlusion prior with observed counts.
/// Counts are real-valued; the harness samples fractional hidden counts.
double grasp_success_prob(double n_succ, double n_fail, double occl, const DomainParams& params);

/// Probability of observing DIRTY given the true attribute and occlusion.
/// The clean-cup exponential models the probability of the correct (clean)
/// observation; the dirty misread is its complement.
double obs_prob_dirty(bool true_dirty, double occl, const DomainParams& params);

struct AttrObservation {
  bool observed_dirty = false;
  double occl = 0.0;
};

struct AttrPosterior {
  double p_dirty = 0.5;
  bool degenerate = false;  // both likelihood products were zero
};

/// P(dirty | history) under a uniform prior and conditionally independent
/// observations.
AttrPosterior attribute_posterior(std::span<const AttrObservation> history,
                                  const DomainParams& params);

struct DishAction {
  enum class Kind { Finish, Lift, Wash };
  Kind kind = Kind::Finish;
  int object = 0;  // object index (not scene id); unused for Finish
};

DishAction decode_action(ActionId id, int num_objects);
ActionId encode_action(const DishAction& action);

struct DishObservation {
  bool grasp_success = false;
  std::uint8_t attr_bits = 0;  // bit j = j-th nearest observed object dirty
};

ObservationId encode_observation(const DishObservation& obs, int k);
DishObservation decode_observation(ObservationId id, int k);
std::string observation_label(ObservationId id, int k);  // e.g. "S,D,C"

struct ObjectState {
  bool in_dishwasher = false;
  bool dirty = false;
  std::uint16_t n_succ = 0, n_fail = 0;
  // observation cache keyed by the absent-occluder subset mask (bit b set =
  // b-th static occluder of this object absent); entries never change.
  std::uint64_t cache_known = 0, cache_value = 0;

  bool operator==(const ObjectState&) const = default;
};

struct WorldState {
  boost::container::small_vector<ObjectState, 8> objects;
  std::uint8_t step = 0;
  bool finished = false;
  std::uint8_t last_obs = 0;  // observation emitted by the transition into this state

  bool operator==(const WorldState&) const = default;
};

/// The multi-object manipulation POMDP. One model instance serves two roles
/// with the same transition code: in planning mode a particle's own dirty
/// bits and counts drive outcomes; in environment mode hidden per-object
/// grasp counts (and the true dirty labels stored in the environment state)
/// drive them.
class DishModel {
 public:
  using State = WorldState;

  DishModel(SceneSpec merged_scene, DomainParams params);

  /// Environment-mode model with fixed hidden grasp counts per object.
  static DishModel environment(SceneSpec merged_scene, DomainParams params,
                               std::vector<double> hidden_n_succ,
                               std::vector<double> hidden_n_fail);

  int action_count() const { return 1 + 2 * num_objects(); }
  int observation_count() const { return 1 << (params_.k + 1); }
  int num_objects() const { return static_cast<int>(scene_.objects.size()); }
  int object_id(int idx) const { return scene_.objects[idx].id; }
  int object_index(int id) const;
  const SceneSpec& scene() const { return scene_; }
  const DomainParams& params() const { return params_; }
  bool has_hidden_counts() const { return !hidden_succ_.empty(); }

  bool is_terminal(const State& s) const { return s.finished; }
  Step<State> sample_transition(const State& s, ActionId action, RngStream& rng) const;
  double observation_probability(ObservationId o, const State& next, ActionId action) const;
  double expected_reward(const State& s, ActionId action) const;

  /// Occlusion ratio of object idx in the given state; extra_absent (an
  /// object index, or -1) is treated as temporarily lifted away.
  double occlusion_ratio(const State& s, int idx, int extra_absent = -1) const;

  /// Occlusion ratio of object idx with every static occluder present.
  double base_occlusion(int idx) const { return occl_for_mask(idx, 0); }

  /// Absent-occluder subset mask of object idx (dishwasher plus extra_absent).
  std::uint64_t absent_mask(const State& s, int idx, int extra_absent = -1) const;

  /// The k nearest on-table objects directly occluded by idx, nearest first,
  /// ties by smaller id. May return fewer than k.
  std::vector<int> nearest_occluded(const State& s, int idx, int k) const;

  /// Latest cached dirty observation for object idx: the current occlusion
  /// setting when cached, else the base-setting initial observation, else
  /// clean.
  bool latest_observed_dirty(const State& s, int idx) const;

  /// Expected immediate reward of WASH(idx), excluding any truncation
  /// penalty: p*(wash reward by dirty bit) + (1-p)*grasp_fail.
  double expected_wash_reward(const State& s, int idx) const;

  /// Grasp success probability for object idx in state s: hidden counts in
  /// environment mode, the state's own counts in planning mode.
  double grasp_probability(const State& s, int idx) const;

  State initial_state(const std::vector<bool>& dirty_labels,
                      const std::vector<bool>& initial_observed_dirty) const;

  /// N particles with dirty bits sampled from the attribute posterior of the
  /// per-object initial observation under the base occlusion setting.
  ParticleBelief<State> initial_belief(const std::vector<bool>& initial_observed_dirty, int n,
                                       RngStream& rng) const;

  /// Rebuilds a belief from an observed shadow state: dirty bits are sampled
  /// per object from the posterior over all cached observations. Used to
  /// recover from belief collapse.
  ParticleBelief<State> reinitialize_belief(const State& observed, int n, RngStream& rng) const;

  /// Deterministic bookkeeping of an executed (action, observation) pair on a
  /// fully observable shadow state: locations, counts, caches, step counter.
  /// Dirty bits are left untouched.
  State apply_observed(const State& s, ActionId action, ObservationId obs) const;

  std::string action_label(ActionId action) const;

 private:
  struct Occluder {
    int index;  // object index
    long tou;
  };

  double occl_for_mask(int idx, std::uint64_t absent) const;
  int observe_attribute(State& state, int obj, int extra_absent, RngStream& rng) const;
  int reported_attribute(const State& state, int obj) const;
  double dirty_on_table(const State& s) const;

  SceneSpec scene_;
  DomainParams params_;
  std::vector<std::vector<Occluder>> occluders_;  // per object, <= 6 entries
  std::vector<std::vector<int>> neighbors_;       // per object, occluded-by-me, by distance then id
  std::vector<double> hidden_succ_, hidden_fail_;  // environment mode only
};

}  // namespace dishpomdp
