#pragma once

#include "dishpomdp/dish_model.hpp"

namespace dishpomdp {

struct HeuristicConfig {
  bool use_grasp_history = true;
};

/// Greedy baseline: WASH the observed-dirty on-table object with the highest
/// grasp success probability, FINISH when nothing is observed dirty. Never
/// lifts. Treats the latest cached observation (current occlusion setting,
/// falling back to the base-setting initial observation) as the truth.
ActionId greedy_action(const DishModel& model, const WorldState& observed,
                       const HeuristicConfig& config);

}  // namespace dishpomdp
