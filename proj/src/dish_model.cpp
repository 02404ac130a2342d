#include "dishpomdp/dish_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dishpomdp {

void DomainParams::validate() const {
  if (n_prior <= 0.0) throw std::invalid_argument("domain params: n_prior must be positive");
  if (k < 1 || k > 7) throw std::invalid_argument("domain params: k must be in [1, 7]");
  if (max_steps < 1) throw std::invalid_argument("domain params: max_steps must be >= 1");
}

double grasp_prior(double occl, const DomainParams& params) {
  return std::min(1.0, std::exp(params.theta_g1 * occl + params.theta_g2));
}

double grasp_success_prob(double n_succ, double n_fail, double occl, const DomainParams& params) {
  const double prior = grasp_prior(occl, params);
  return (prior * params.n_prior + n_succ) / (params.n_prior + n_succ + n_fail);
}

double obs_prob_dirty(bool true_dirty, double occl, const DomainParams& params) {
  if (true_dirty) {
    return std::min(1.0, std::exp(params.theta_d1 * occl + params.theta_d2));
  }
  return 1.0 - std::min(1.0, std::exp(params.theta_c1 * occl + params.theta_c2));
}

AttrPosterior attribute_posterior(std::span<const AttrObservation> history,
                                  const DomainParams& params) {
  double like_dirty = 0.5, like_clean = 0.5;  // uniform prior folded in
  for (const auto& obs : history) {
    const double pd = obs_prob_dirty(true, obs.occl, params);
    const double pc = obs_prob_dirty(false, obs.occl, params);
    like_dirty *= obs.observed_dirty ? pd : 1.0 - pd;
    like_clean *= obs.observed_dirty ? pc : 1.0 - pc;
  }
  const double total = like_dirty + like_clean;
  if (total <= 0.0) return {0.5, true};
  return {like_dirty / total, false};
}

DishAction decode_action(ActionId id, int num_objects) {
  if (id.value < 0 || id.value >= 1 + 2 * num_objects)
    throw std::invalid_argument("action id out of range");
  if (id.value == 0) return {DishAction::Kind::Finish, 0};
  if (id.value % 2 == 1) return {DishAction::Kind::Lift, (id.value - 1) / 2};
  return {DishAction::Kind::Wash, (id.value - 2) / 2};
}

ActionId encode_action(const DishAction& action) {
  switch (action.kind) {
    case DishAction::Kind::Finish:
      return ActionId{0};
    case DishAction::Kind::Lift:
      return ActionId{1 + 2 * action.object};
    case DishAction::Kind::Wash:
      return ActionId{2 + 2 * action.object};
  }
  throw std::logic_error("unreachable");
}

ObservationId encode_observation(const DishObservation& obs, int k) {
  const std::uint8_t bits = obs.attr_bits & static_cast<std::uint8_t>((1u << k) - 1u);
  return ObservationId{static_cast<std::int32_t>((obs.grasp_success ? 1 : 0) | (bits << 1))};
}

DishObservation decode_observation(ObservationId id, int k) {
  if (id.value < 0 || id.value >= (1 << (k + 1)))
    throw std::invalid_argument("observation id out of range");
  DishObservation obs;
  obs.grasp_success = (id.value & 1) != 0;
  obs.attr_bits = static_cast<std::uint8_t>(id.value >> 1);
  return obs;
}

std::string observation_label(ObservationId id, int k) {
  const DishObservation obs = decode_observation(id, k);
  std::string label = obs.grasp_success ? "S" : "F";
  for (int j = 0; j < k; ++j) {
    label += ',';
    label += (obs.attr_bits >> j) & 1 ? 'D' : 'C';
  }
  return label;
}

DishModel::DishModel(SceneSpec merged_scene, DomainParams params)
    : scene_(std::move(merged_scene)), params_(params) {
  params_.validate();
  validate_scene(scene_);
  std::sort(scene_.objects.begin(), scene_.objects.end(),
            [](const SceneObject& a, const SceneObject& b) { return a.id < b.id; });
  const int n = num_objects();
  occluders_.resize(n);
  neighbors_.resize(n);
  for (const auto& c : scene_.contacts) {
    const int occ = object_index(c.occluder);
    const int hid = object_index(c.occluded);
    occluders_[hid].push_back({occ, c.tou});
  }
  for (int i = 0; i < n; ++i) {
    if (occluders_[i].size() > 6)
      throw SceneError("object " + std::to_string(object_id(i)) + " has more than 6 occluders");
    std::sort(occluders_[i].begin(), occluders_[i].end(),
              [](const Occluder& a, const Occluder& b) { return a.index < b.index; });
  }
  for (int i = 0; i < n; ++i) {
    for (const auto& occ : occluders_[i]) neighbors_[occ.index].push_back(i);
  }
  for (int i = 0; i < n; ++i) {
    const auto& self = scene_.objects[i];
    std::sort(neighbors_[i].begin(), neighbors_[i].end(), [&](int a, int b) {
      const auto& oa = scene_.objects[a];
      const auto& ob = scene_.objects[b];
      const double da = std::hypot(oa.cx - self.cx, oa.cy - self.cy);
      const double db = std::hypot(ob.cx - self.cx, ob.cy - self.cy);
      if (da != db) return da < db;
      return oa.id < ob.id;
    });
  }
}

DishModel DishModel::environment(SceneSpec merged_scene, DomainParams params,
                                 std::vector<double> hidden_n_succ,
                                 std::vector<double> hidden_n_fail) {
  DishModel model(std::move(merged_scene), params);
  if (hidden_n_succ.size() != static_cast<std::size_t>(model.num_objects()) ||
      hidden_n_fail.size() != hidden_n_succ.size())
    throw std::invalid_argument("environment model: one hidden count pair per object required");
  model.hidden_succ_ = std::move(hidden_n_succ);
  model.hidden_fail_ = std::move(hidden_n_fail);
  return model;
}

int DishModel::object_index(int id) const {
  for (int i = 0; i < num_objects(); ++i)
    if (scene_.objects[i].id == id) return i;
  throw std::invalid_argument("unknown object id " + std::to_string(id));
}

double DishModel::occl_for_mask(int idx, std::uint64_t absent) const {
  long tou = 0;
  const auto& occ = occluders_[idx];
  for (std::size_t b = 0; b < occ.size(); ++b) {
    if (!((absent >> b) & 1)) tou += occ[b].tou;
  }
  return occlusion_ratio_raw(scene_.objects[idx].perimeter, tou);
}

std::uint64_t DishModel::absent_mask(const State& s, int idx, int extra_absent) const {
  std::uint64_t mask = 0;
  const auto& occ = occluders_[idx];
  for (std::size_t b = 0; b < occ.size(); ++b) {
    if (s.objects[occ[b].index].in_dishwasher || occ[b].index == extra_absent) mask |= 1ULL << b;
  }
  return mask;
}

double DishModel::occlusion_ratio(const State& s, int idx, int extra_absent) const {
  return occl_for_mask(idx, absent_mask(s, idx, extra_absent));
}

std::vector<int> DishModel::nearest_occluded(const State& s, int idx, int k) const {
  std::vector<int> out;
  for (int j : neighbors_[idx]) {
    if (s.objects[j].in_dishwasher) continue;
    out.push_back(j);
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

double DishModel::grasp_probability(const State& s, int idx) const {
  const double occl = occlusion_ratio(s, idx);
  if (has_hidden_counts()) return grasp_success_prob(hidden_succ_[idx], hidden_fail_[idx], occl, params_);
  return grasp_success_prob(s.objects[idx].n_succ, s.objects[idx].n_fail, occl, params_);
}

bool DishModel::latest_observed_dirty(const State& s, int idx) const {
  return reported_attribute(s, idx) != 0;
}

double DishModel::expected_wash_reward(const State& s, int idx) const {
  const double p = grasp_probability(s, idx);
  const double wash = s.objects[idx].dirty ? params_.rewards.wash_dirty : params_.rewards.wash_clean;
  return p * wash + (1.0 - p) * params_.rewards.grasp_fail;
}

double DishModel::dirty_on_table(const State& s) const {
  double count = 0.0;
  for (const auto& o : s.objects)
    if (o.dirty && !o.in_dishwasher) count += 1.0;
  return count;
}

int DishModel::observe_attribute(State& state, int obj, int extra_absent, RngStream& rng) const {
  const std::uint64_t mask = absent_mask(state, obj, extra_absent);
  auto& os = state.objects[obj];
  if ((os.cache_known >> mask) & 1) return static_cast<int>((os.cache_value >> mask) & 1);
  const double p = obs_prob_dirty(os.dirty, occl_for_mask(obj, mask), params_);
  const int bit = rng.bernoulli(p) ? 1 : 0;
  os.cache_known |= 1ULL << mask;
  if (bit) os.cache_value |= 1ULL << mask;
  return bit;
}

int DishModel::reported_attribute(const State& state, int obj) const {
  const std::uint64_t mask = absent_mask(state, obj);
  const auto& os = state.objects[obj];
  if ((os.cache_known >> mask) & 1) return static_cast<int>((os.cache_value >> mask) & 1);
  if (os.cache_known & 1) return static_cast<int>(os.cache_value & 1);  // base setting
  return 0;
}

Step<DishModel::State> DishModel::sample_transition(const State& s, ActionId action,
                                                    RngStream& rng) const {
  Step<State> step;
  step.next = s;
  State& next = step.next;
  if (s.finished) {  // absorbing
    next.last_obs = static_cast<std::uint8_t>(encode_observation({true, 0}, params_.k).value);
    step.observation = ObservationId{next.last_obs};
    step.reward = 0.0;
    return step;
  }

  const DishAction act = decode_action(action, num_objects());
  DishObservation obs;

  if (act.kind == DishAction::Kind::Finish) {
    next.finished = true;
    step.reward = params_.rewards.finish_per_dirty * dirty_on_table(next);
    obs.grasp_success = true;
  } else {
    const int i = act.object;
    if (next.objects[i].in_dishwasher) {
      // target already gone: failed no-op, no new information
      step.reward = params_.rewards.grasp_fail;
    } else {
      const double p = grasp_probability(next, i);
      const bool success = rng.bernoulli(p);
      const int extra_absent = (act.kind == DishAction::Kind::Lift && success) ? i : -1;
      if (act.kind == DishAction::Kind::Lift) {
        step.reward = params_.rewards.lift;
        success ? ++next.objects[i].n_succ : ++next.objects[i].n_fail;
      } else {  // Wash
        if (success) {
          next.objects[i].in_dishwasher = true;
          ++next.objects[i].n_succ;
          step.reward = next.objects[i].dirty ? params_.rewards.wash_dirty : params_.rewards.wash_clean;
        } else {
          ++next.objects[i].n_fail;
          step.reward = params_.rewards.grasp_fail;
        }
      }
      obs.grasp_success = success;
      const std::vector<int> near = nearest_occluded(next, i, params_.k);
      for (std::size_t j = 0; j < near.size(); ++j) {
        const int bit = success ? observe_attribute(next, near[j], extra_absent, rng)
                                : reported_attribute(next, near[j]);
        if (bit) obs.attr_bits |= static_cast<std::uint8_t>(1u << j);
      }
    }
  }

  ++next.step;
  if (!next.finished && next.step >= params_.max_steps) {
    next.finished = true;
    step.reward += params_.rewards.finish_per_dirty * dirty_on_table(next);
  }
  step.observation = encode_observation(obs, params_.k);
  next.last_obs = static_cast<std::uint8_t>(step.observation.value);
  return step;
}

double DishModel::observation_probability(ObservationId o, const State& next, ActionId) const {
  return o.value == next.last_obs ? 1.0 : 0.0;
}

double DishModel::expected_reward(const State& s, ActionId action) const {
  if (s.finished) return 0.0;
  const DishAction act = decode_action(action, num_objects());
  const double d = dirty_on_table(s);
  const bool truncates = s.step + 1 >= params_.max_steps;
  const double trunc_all = truncates ? params_.rewards.finish_per_dirty * d : 0.0;

  if (act.kind == DishAction::Kind::Finish) return params_.rewards.finish_per_dirty * d;
  const int i = act.object;
  if (s.objects[i].in_dishwasher) return params_.rewards.grasp_fail + trunc_all;
  if (act.kind == DishAction::Kind::Lift) return params_.rewards.lift + trunc_all;

  const double p = grasp_probability(s, i);
  const double wash = s.objects[i].dirty ? params_.rewards.wash_dirty : params_.rewards.wash_clean;
  double value = p * wash + (1.0 - p) * params_.rewards.grasp_fail;
  if (truncates) {
    const double d_after_success = d - (s.objects[i].dirty ? 1.0 : 0.0);
    value += params_.rewards.finish_per_dirty * (p * d_after_success + (1.0 - p) * d);
  }
  return value;
}

DishModel::State DishModel::initial_state(const std::vector<bool>& dirty_labels,
                                          const std::vector<bool>& initial_observed_dirty) const {
  const int n = num_objects();
  if (static_cast<int>(dirty_labels.size()) != n ||
      static_cast<int>(initial_observed_dirty.size()) != n)
    throw std::invalid_argument("initial_state: one label and one observation per object required");
  State s;
  s.objects.resize(n);
  for (int i = 0; i < n; ++i) {
    s.objects[i].dirty = dirty_labels[i];
    s.objects[i].cache_known = 1;  // base occlusion setting
    s.objects[i].cache_value = initial_observed_dirty[i] ? 1 : 0;
  }
  return s;
}

ParticleBelief<DishModel::State> DishModel::initial_belief(const std::vector<bool>& initial_observed_dirty,
                                                           int n, RngStream& rng) const {
  const int num = num_objects();
  if (static_cast<int>(initial_observed_dirty.size()) != num)
    throw std::invalid_argument("initial_belief: one initial observation per object required");
  std::vector<double> p_dirty(num);
  for (int i = 0; i < num; ++i) {
    const AttrObservation obs{initial_observed_dirty[i], occl_for_mask(i, 0)};
    p_dirty[i] = attribute_posterior(std::span<const AttrObservation>(&obs, 1), params_).p_dirty;
  }
  State proto;
  proto.objects.resize(num);
  for (int i = 0; i < num; ++i) {
    proto.objects[i].cache_known = 1;
    proto.objects[i].cache_value = initial_observed_dirty[i] ? 1 : 0;
  }
  ParticleBelief<State> belief;
  belief.particles.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (int j = 0; j < n; ++j) {
    State s = proto;
    for (int i = 0; i < num; ++i) s.objects[i].dirty = rng.bernoulli(p_dirty[i]);
    belief.particles.push_back({w, std::move(s)});
  }
  return belief;
}

ParticleBelief<DishModel::State> DishModel::reinitialize_belief(const State& observed, int n,
                                                                RngStream& rng) const {
  const int num = num_objects();
  std::vector<double> p_dirty(num);
  for (int i = 0; i < num; ++i) {
    std::vector<AttrObservation> history;
    const auto& os = observed.objects[i];
    const std::uint64_t settings = 1ULL << occluders_[i].size();
    for (std::uint64_t mask = 0; mask < settings; ++mask) {
      if ((os.cache_known >> mask) & 1)
        history.push_back({((os.cache_value >> mask) & 1) != 0, occl_for_mask(i, mask)});
    }
    p_dirty[i] = attribute_posterior(history, params_).p_dirty;
  }
  ParticleBelief<State> belief;
  belief.particles.reserve(n);
  const double w = 1.0 / static_cast<double>(n);
  for (int j = 0; j < n; ++j) {
    State s = observed;
    for (int i = 0; i < num; ++i) s.objects[i].dirty = rng.bernoulli(p_dirty[i]);
    belief.particles.push_back({w, std::move(s)});
  }
  return belief;
}

DishModel::State DishModel::apply_observed(const State& s, ActionId action, ObservationId obs_id) const {
  State next = s;
  if (s.finished) return next;
  const DishAction act = decode_action(action, num_objects());
  const DishObservation obs = decode_observation(obs_id, params_.k);

  if (act.kind == DishAction::Kind::Finish) {
    next.finished = true;
  } else {
    const int i = act.object;
    if (!next.objects[i].in_dishwasher) {
      const bool success = obs.grasp_success;
      int extra_absent = -1;
      if (success) {
        ++next.objects[i].n_succ;
        if (act.kind == DishAction::Kind::Wash) {
          next.objects[i].in_dishwasher = true;
        } else {
          extra_absent = i;
        }
      } else {
        ++next.objects[i].n_fail;
      }
      if (success) {
        const std::vector<int> near = nearest_occluded(next, i, params_.k);
        for (std::size_t j = 0; j < near.size(); ++j) {
          auto& os = next.objects[near[j]];
          const std::uint64_t mask = absent_mask(next, near[j], extra_absent);
          if (!((os.cache_known >> mask) & 1)) {
            os.cache_known |= 1ULL << mask;
            if ((obs.attr_bits >> j) & 1) os.cache_value |= 1ULL << mask;
          }
        }
      }
    }
  }
  ++next.step;
  if (next.step >= params_.max_steps) next.finished = true;
  next.last_obs = static_cast<std::uint8_t>(obs_id.value);
  return next;
}

std::string DishModel::action_label(ActionId action) const {
  const DishAction act = decode_action(action, num_objects());
  switch (act.kind) {
    case DishAction::Kind::Finish:
      return "FINISH";
    case DishAction::Kind::Lift:
      return "LIFT(" + std::to_string(object_id(act.object)) + ")";
    case DishAction::Kind::Wash:
      return "WASH(" + std::to_string(object_id(act.object)) + ")";
  }
  return "?";
}

}  // namespace dishpomdp
