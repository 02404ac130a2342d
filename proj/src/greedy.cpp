#include "dishpomdp/greedy.hpp"

namespace dishpomdp {

ActionId greedy_action(const DishModel& model, const WorldState& observed,
                       const HeuristicConfig& config) {
  int best = -1;
  double best_p = -1.0;
  for (int i = 0; i < model.num_objects(); ++i) {
    const auto& os = observed.objects[i];
    if (os.in_dishwasher) continue;
    if (!model.latest_observed_dirty(observed, i)) continue;
    const double occl = model.occlusion_ratio(observed, i);
    const double p = config.use_grasp_history
                         ? grasp_success_prob(os.n_succ, os.n_fail, occl, model.params())
                         : grasp_success_prob(0.0, 0.0, occl, model.params());
    if (p > best_p) {  // ties resolve to the smaller index
      best_p = p;
      best = i;
    }
  }
  if (best < 0) return encode_action({DishAction::Kind::Finish, 0});
  return encode_action({DishAction::Kind::Wash, best});
}

}  // namespace dishpomdp
