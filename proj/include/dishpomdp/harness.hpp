#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dishpomdp/dish_model.hpp"
#include "dishpomdp/rng.hpp"
#include "dishpomdp/scene.hpp"
#include "dishpomdp/types.hpp"

namespace dishpomdp {

/// Hidden per-episode truth: dirty labels from the scene plus hidden grasp
/// counts defining the environment's true grasp probabilities. Constant
/// within an episode and invisible to the agent.
struct GroundTruth {
  std::vector<bool> dirty;
  std::vector<double> hidden_n_succ;
  std::vector<double> hidden_n_fail;
};

struct MethodSpec {
  enum class Kind { Pomdp, Greedy };
  Kind kind = Kind::Pomdp;
  int horizon = 3;
  int width = 3;
  int particles = 500;
  int offline_rounds = 10;
  int online_rounds = 4;
  int rollouts_per_candidate = 1;
  bool use_grasp_history = true;

  std::string name() const;
  static MethodSpec parse(const std::string& text);  // "pomdp", "greedy", "greedy-nohist"
};

struct ExperimentConfig {
  std::vector<std::string> scene_files;
  std::vector<MethodSpec> methods;
  int episodes_per_cell = 100;
  int horizon = 10;
  double gamma_shape = 0.2;
  double gamma_scale = 5.0;
  DomainParams domain;
  std::uint64_t seed = 0;
};

ExperimentConfig load_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config_file(const std::string& path);

/// Samples hidden grasp counts: n_i ~ Gamma(shape, scale), hidden successes
/// uniform in [0, n_i]; dirty labels copied from the scene.
GroundTruth sample_ground_truth(const SceneSpec& scene, double gamma_shape, double gamma_scale,
                                RngStream& rng);

/// Runs one (scene, method) cell of episodes. Deterministic per (seed,
/// episode index); episodes may run on worker threads (POMDP_MANIP_THREADS).
std::vector<EpisodeResult> run_cell(const SceneSpec& merged_scene, const MethodSpec& method,
                                    const ExperimentConfig& config, RngStream& rng);

/// Percentile bootstrap confidence interval of the mean.
std::pair<double, double> bootstrap_ci(std::span<const double> samples, int resamples, double level,
                                       RngStream& rng);

/// Two-sided Mann-Whitney U p-value (normal approximation, tie-corrected).
double mann_whitney_u(std::span<const double> samples_a, std::span<const double> samples_b);

struct ExperimentRow {
  std::string scene;
  std::string method;
  int horizon = 0;
  int episodes = 0;
  double mean_reward = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double wall_time_s = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  // realized per-episode rewards, [scene][method]
  std::vector<std::vector<std::vector<double>>> rewards;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

void write_results_csv(const std::vector<ExperimentRow>& rows, std::ostream& out);

std::vector<double> episode_rewards(const std::vector<EpisodeResult>& episodes);

}  // namespace dishpomdp
