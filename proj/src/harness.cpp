#include "dishpomdp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dishpomdp/belief.hpp"
#include "dishpomdp/greedy.hpp"
#include "dishpomdp/planner.hpp"

namespace dishpomdp {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw std::runtime_error("unknown field '" + it.key() + "' in " + where);
    }
  }
}

int worker_count() {
  if (const char* env = std::getenv("POMDP_MANIP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace

std::string MethodSpec::name() const {
  if (kind == Kind::Greedy) return use_grasp_history ? "greedy" : "greedy-nohist";
  return "pomdp-t" + std::to_string(horizon) + "-w" + std::to_string(width);
}

MethodSpec MethodSpec::parse(const std::string& text) {
  MethodSpec m;
  if (text == "pomdp") {
    m.kind = Kind::Pomdp;
  } else if (text == "greedy") {
    m.kind = Kind::Greedy;
    m.use_grasp_history = true;
  } else if (text == "greedy-nohist") {
    m.kind = Kind::Greedy;
    m.use_grasp_history = false;
  } else {
    throw std::invalid_argument("unknown method '" + text + "' (expected pomdp|greedy|greedy-nohist)");
  }
  return m;
}

ExperimentConfig load_experiment_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("experiment config parse error: ") + e.what());
  }
  reject_unknown(doc,
                 {"scenes", "methods", "episodes_per_cell", "horizon", "gamma_shape", "gamma_scale",
                  "rewards", "seed"},
                 "experiment config");
  ExperimentConfig cfg;
  for (const auto& s : doc.at("scenes")) cfg.scene_files.push_back(s.get<std::string>());
  for (const auto& jm : doc.at("methods")) {
    reject_unknown(jm,
                   {"type", "horizon", "width", "particles", "offline_rounds", "online_rounds",
                    "rollouts_per_candidate", "use_grasp_history"},
                   "method");
    MethodSpec m = MethodSpec::parse(jm.at("type").get<std::string>());
    if (jm.contains("horizon")) m.horizon = jm["horizon"].get<int>();
    if (jm.contains("width")) m.width = jm["width"].get<int>();
    if (jm.contains("particles")) m.particles = jm["particles"].get<int>();
    if (jm.contains("offline_rounds")) m.offline_rounds = jm["offline_rounds"].get<int>();
    if (jm.contains("online_rounds")) m.online_rounds = jm["online_rounds"].get<int>();
    if (jm.contains("rollouts_per_candidate"))
      m.rollouts_per_candidate = jm["rollouts_per_candidate"].get<int>();
    if (jm.contains("use_grasp_history")) m.use_grasp_history = jm["use_grasp_history"].get<bool>();
    cfg.methods.push_back(m);
  }
  cfg.episodes_per_cell = doc.value("episodes_per_cell", 100);
  cfg.horizon = doc.value("horizon", 10);
  cfg.gamma_shape = doc.value("gamma_shape", 0.2);
  cfg.gamma_scale = doc.value("gamma_scale", 5.0);
  cfg.seed = doc.value("seed", 0);
  if (doc.contains("rewards")) {
    const auto& jr = doc["rewards"];
    reject_unknown(jr, {"wash_dirty", "wash_clean", "grasp_fail", "lift", "finish_per_dirty"},
                   "rewards");
    auto& r = cfg.domain.rewards;
    r.wash_dirty = jr.value("wash_dirty", r.wash_dirty);
    r.wash_clean = jr.value("wash_clean", r.wash_clean);
    r.grasp_fail = jr.value("grasp_fail", r.grasp_fail);
    r.lift = jr.value("lift", r.lift);
    r.finish_per_dirty = jr.value("finish_per_dirty", r.finish_per_dirty);
  }
  if (cfg.scene_files.empty()) throw std::runtime_error("experiment config: no scenes");
  if (cfg.methods.empty()) throw std::runtime_error("experiment config: no methods");
  return cfg;
}

ExperimentConfig load_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_experiment_config(ss.str());
}

GroundTruth sample_ground_truth(const SceneSpec& scene, double gamma_shape, double gamma_scale,
                                RngStream& rng) {
  GroundTruth gt;
  for (const auto& obj : scene.objects) {
    gt.dirty.push_back(obj.true_dirty);
    const double n = gamma_scale > 0.0 ? rng.gamma(gamma_shape, gamma_scale) : 0.0;
    const double succ = rng.uniform() * n;
    gt.hidden_n_succ.push_back(succ);
    gt.hidden_n_fail.push_back(n - succ);
  }
  return gt;
}

namespace {

EpisodeResult run_one_episode(const SceneSpec& scene, const MethodSpec& method,
                              const ExperimentConfig& config, RngStream ep_rng) {
  DomainParams params = config.domain;
  params.max_steps = config.horizon;

  RngStream gt_rng = ep_rng.substream(1);
  const GroundTruth gt = sample_ground_truth(scene, config.gamma_shape, config.gamma_scale, gt_rng);
  const DishModel env = DishModel::environment(scene, params, gt.hidden_n_succ, gt.hidden_n_fail);
  const DishModel plan_model(scene, params);
  const int n = plan_model.num_objects();

  RngStream obs_rng = ep_rng.substream(2);
  std::vector<bool> initial_obs(n);
  for (int i = 0; i < n; ++i) {
    const double p = obs_prob_dirty(gt.dirty[i], plan_model.base_occlusion(i), params);
    initial_obs[i] = obs_rng.bernoulli(p);
  }
  const WorldState env_state0 = env.initial_state(gt.dirty, initial_obs);

  RngStream env_rng = ep_rng.substream(3);
  if (method.kind == MethodSpec::Kind::Greedy) {
    WorldState shadow =
        plan_model.initial_state(std::vector<bool>(n, false), initial_obs);
    std::size_t applied = 0;
    auto policy = [&](int, std::span<const StepRecord> history) {
      for (; applied < history.size(); ++applied) {
        shadow = plan_model.apply_observed(shadow, history[applied].action, history[applied].observation);
      }
      return greedy_action(plan_model, shadow, {method.use_grasp_history});
    };
    return run_episode(env, env_state0, policy, config.horizon, env_rng);
  }

  PlannerConfig pc;
  pc.horizon = method.horizon;
  pc.width = method.width;
  pc.particles = method.particles;
  pc.rollouts_per_candidate = method.rollouts_per_candidate;
  pc.offline_rounds = method.offline_rounds;
  pc.online_rounds = method.online_rounds;
  pc.eval_rollouts = 200;
  pc.seed = ep_rng.seed();
  pc.validate();

  RngStream belief_rng = ep_rng.substream(4);
  ParticleBelief<WorldState> belief = plan_model.initial_belief(initial_obs, pc.particles, belief_rng);
  RngStream graph_rng = ep_rng.substream(5);
  PolicyGraph graph =
      init_random_graph(pc, plan_model.action_count(), plan_model.observation_count(), graph_rng);
  RngStream improve_rng = ep_rng.substream(6);
  improve(graph, belief, 0, plan_model, pc, pc.offline_rounds, improve_rng);
  int start = 0;
  WorldState shadow = plan_model.initial_state(std::vector<bool>(n, false), initial_obs);

  EpisodeResult result;
  WorldState env_state = env_state0;
  for (int step = 0; step < config.horizon; ++step) {
    const ActionId action = select_action(graph, start);
    Step<WorldState> tr = env.sample_transition(env_state, action, env_rng);
    result.steps.push_back({action, tr.observation, tr.reward});
    result.total_reward += tr.reward;
    env_state = std::move(tr.next);
    shadow = plan_model.apply_observed(shadow, action, result.steps.back().observation);
    if (env.is_terminal(env_state)) {
      result.terminated_early = step + 1 < config.horizon;
      break;
    }
    if (step + 1 >= config.horizon) break;
    RngStream step_rng = ep_rng.substream(7, static_cast<std::uint64_t>(step));
    try {
      auto online = advance_online(graph, action, result.steps.back().observation, belief, start,
                                   plan_model, pc, step_rng);
      graph = std::move(online.graph);
      belief = std::move(online.belief);
      start = online.start_node;
    } catch (const BeliefCollapseError&) {
      // recover from the observable shadow state: fresh belief, fresh plan
      RngStream recover_rng = step_rng.substream(99);
      belief = plan_model.reinitialize_belief(shadow, pc.particles, recover_rng);
      graph = init_random_graph(pc, plan_model.action_count(), plan_model.observation_count(),
                                recover_rng);
      improve(graph, belief, 0, plan_model, pc, pc.online_rounds, recover_rng);
      start = 0;
    }
  }
  return result;
}

}  // namespace

std::vector<EpisodeResult> run_cell(const SceneSpec& merged_scene, const MethodSpec& method,
                                    const ExperimentConfig& config, RngStream& rng) {
  const int episodes = config.episodes_per_cell;
  std::vector<EpisodeResult> results(episodes);
  const int workers = std::min(worker_count(), episodes);
  if (workers <= 1) {
    for (int e = 0; e < episodes; ++e) {
      results[e] = run_one_episode(merged_scene, method, config, rng.substream(e));
    }
    return results;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int e = w; e < episodes; e += workers) {
        results[e] = run_one_episode(merged_scene, method, config, rng.substream(e));
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, int resamples, double level,
                                       RngStream& rng) {
  if (samples.empty()) throw std::invalid_argument("bootstrap_ci: empty sample set");
  if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("bootstrap_ci: level must be in (0,1)");
  const int n = static_cast<int>(samples.size());
  std::vector<double> means(resamples);
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += samples[rng.uniform_int(n)];
    means[r] = acc / n;
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const int idx = static_cast<int>(std::floor(q * (resamples - 1)));
    return means[std::clamp(idx, 0, resamples - 1)];
  };
  return {quantile(alpha), quantile(1.0 - alpha)};
}

double mann_whitney_u(std::span<const double> samples_a, std::span<const double> samples_b) {
  if (samples_a.empty() || samples_b.empty())
    throw std::invalid_argument("mann_whitney_u: empty sample set");
  const std::size_t n1 = samples_a.size(), n2 = samples_b.size();
  std::vector<double> all;
  all.reserve(n1 + n2);
  all.insert(all.end(), samples_a.begin(), samples_a.end());
  all.insert(all.end(), samples_b.begin(), samples_b.end());
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return all[i] < all[j]; });

  std::vector<double> ranks(all.size());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && all[order[j + 1]] == all[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg_rank;
    i = j + 1;
  }
  double r1 = 0.0;
  for (std::size_t k = 0; k < n1; ++k) r1 += ranks[k];
  const double u1 = r1 - static_cast<double>(n1) * (n1 + 1) / 2.0;
  const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  const double nn = static_cast<double>(n1 + n2);
  const double sigma2 = (static_cast<double>(n1) * static_cast<double>(n2) / 12.0) *
                        ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (sigma2 <= 0.0) return 1.0;
  const double z = (std::abs(u1 - mu) - 0.5) / std::sqrt(sigma2);
  if (z <= 0.0) return 1.0;
  const double p = std::erfc(z / std::sqrt(2.0));
  return std::min(1.0, p);
}

std::vector<double> episode_rewards(const std::vector<EpisodeResult>& episodes) {
  std::vector<double> rewards;
  rewards.reserve(episodes.size());
  for (const auto& e : episodes) rewards.push_back(e.total_reward);
  return rewards;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  ExperimentResult result;
  RngStream root(config.seed);
  for (std::size_t si = 0; si < config.scene_files.size(); ++si) {
    const SceneSpec scene = merge_objects(load_scene_file(config.scene_files[si]));
    const std::string scene_name = std::filesystem::path(config.scene_files[si]).stem().string();
    result.rewards.emplace_back();
    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
      const MethodSpec& method = config.methods[mi];
      RngStream cell_rng = root.substream(si, mi);
      const auto t0 = std::chrono::steady_clock::now();
      const auto episodes = run_cell(scene, method, config, cell_rng);
      const auto t1 = std::chrono::steady_clock::now();
      const std::vector<double> rewards = episode_rewards(episodes);
      const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / rewards.size();
      RngStream boot_rng = root.substream(si, mi).substream(0xb007ULL);
      const auto [lo, hi] = bootstrap_ci(rewards, 10000, 0.95, boot_rng);
      ExperimentRow row;
      row.scene = scene_name;
      row.method = method.name();
      row.horizon = config.horizon;
      row.episodes = static_cast<int>(rewards.size());
      row.mean_reward = mean;
      row.ci_low = lo;
      row.ci_high = hi;
      row.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
      result.rows.push_back(std::move(row));
      result.rewards.back().push_back(rewards);
    }
  }
  return result;
}

void write_results_csv(const std::vector<ExperimentRow>& rows, std::ostream& out) {
  out << "scene,method,horizon,episodes,mean_reward,ci_low,ci_high,wall_time_s\n";
  for (const auto& row : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.3f", row.mean_reward, row.ci_low, row.ci_high,
                  row.wall_time_s);
    out << row.scene << ',' << row.method << ',' << row.horizon << ',' << row.episodes << ',' << buf
        << '\n';
  }
}

}  // namespace dishpomdp
