#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dishpomdp/dish_model.hpp"
#include "dishpomdp/dot_export.hpp"
#include "dishpomdp/greedy.hpp"
#include "dishpomdp/harness.hpp"
#include "dishpomdp/planner.hpp"
#include "dishpomdp/scene.hpp"

namespace {

using namespace dishpomdp;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Output files are written in one shot after all computation succeeds, so a
// failing run never leaves a partial file behind.
void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

long total_tou(const SceneSpec& scene, int id) {
  long tou = 0;
  for (const auto& c : scene.contacts)
    if (c.occluded == id) tou += c.tou;
  return tou;
}

void print_occlusions(const SceneSpec& scene, std::ostream& out) {
  for (const auto& o : scene.objects) {
    const long tou = total_tou(scene, o.id);
    out << "  object " << o.id << ": perimeter " << o.perimeter << ", tou " << tou << ", occlusion "
        << fmt("%.4f", occlusion_ratio_raw(o.perimeter, tou)) << "\n";
  }
}

int cmd_validate_scene(const std::string& scene_path) {
  const SceneSpec scene = load_scene_file(scene_path);
  std::cout << "scene " << scene_path << ": " << scene.objects.size() << " objects, "
            << scene.contacts.size() << " contacts\n";
  std::cout << "pre-merge occlusion ratios:\n";
  print_occlusions(scene, std::cout);
  std::vector<std::string> log;
  const SceneSpec merged = merge_objects(scene, &log);
  for (const auto& line : log) std::cout << line << "\n";
  if (log.empty()) std::cout << "merge: no objects merged\n";
  std::cout << "post-merge occlusion ratios:\n";
  print_occlusions(merged, std::cout);
  std::cout << "scene valid\n";
  return 0;
}

std::vector<bool> sample_initial_obs(const DishModel& model, const std::vector<bool>& dirty,
                                     RngStream& rng) {
  std::vector<bool> obs(model.num_objects());
  for (int i = 0; i < model.num_objects(); ++i) {
    obs[i] = rng.bernoulli(obs_prob_dirty(dirty[i], model.base_occlusion(i), model.params()));
  }
  return obs;
}

int cmd_simulate(const std::string& scene_path, const std::string& method_text, int horizon,
                 int width, int particles, int episodes, std::uint64_t seed,
                 const std::string& out_path) {
  MethodSpec method = MethodSpec::parse(method_text);
  method.horizon = horizon;
  method.width = width;
  method.particles = particles;

  ExperimentConfig config;
  config.scene_files = {scene_path};
  config.methods = {method};
  config.episodes_per_cell = episodes;
  config.seed = seed;

  const ExperimentResult result = run_experiment(config);
  std::ostringstream csv;
  write_results_csv(result.rows, csv);
  if (!out_path.empty()) write_file(out_path, csv.str());

  const ExperimentRow& row = result.rows.front();
  std::cout << row.method << " on " << row.scene << ": mean reward " << fmt("%.4f", row.mean_reward)
            << " (95% CI [" << fmt("%.4f", row.ci_low) << ", " << fmt("%.4f", row.ci_high) << "], "
            << row.episodes << " episodes)\n";
  if (out_path.empty()) std::cout << csv.str();
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_path) {
  const ExperimentConfig config = load_experiment_config_file(config_path);
  const ExperimentResult result = run_experiment(config);

  std::ostringstream csv;
  write_results_csv(result.rows, csv);
  csv << "\nscene,method_a,method_b,p_value\n";
  for (std::size_t si = 0; si < config.scene_files.size(); ++si) {
    const std::string& scene = result.rows[si * config.methods.size()].scene;
    for (std::size_t a = 0; a < config.methods.size(); ++a) {
      for (std::size_t b = a + 1; b < config.methods.size(); ++b) {
        const double p = mann_whitney_u(result.rewards[si][a], result.rewards[si][b]);
        csv << scene << ',' << config.methods[a].name() << ',' << config.methods[b].name() << ','
            << fmt("%.6g", p) << "\n";
      }
    }
  }
  if (!out_path.empty()) write_file(out_path, csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_export_policy(const std::string& scene_path, int horizon, int width, int rounds,
                      int particles, std::uint64_t seed, const std::string& out_path) {
  const SceneSpec scene = merge_objects(load_scene_file(scene_path));
  DomainParams params;
  const DishModel model(scene, params);
  const int n = model.num_objects();

  RngStream root(seed);
  std::vector<bool> dirty(n);
  for (int i = 0; i < n; ++i) dirty[i] = scene.objects[i].true_dirty;
  RngStream obs_rng = root.substream(2);
  const std::vector<bool> initial_obs = sample_initial_obs(model, dirty, obs_rng);

  PlannerConfig pc;
  pc.horizon = horizon;
  pc.width = width;
  pc.particles = particles;
  pc.offline_rounds = rounds;
  pc.seed = root.seed();
  pc.validate();

  RngStream belief_rng = root.substream(4);
  ParticleBelief<WorldState> belief = model.initial_belief(initial_obs, pc.particles, belief_rng);
  RngStream graph_rng = root.substream(5);
  PolicyGraph graph =
      init_random_graph(pc, model.action_count(), model.observation_count(), graph_rng);
  RngStream improve_rng = root.substream(6);
  const ValueEstimate value = improve(graph, belief, 0, model, pc, rounds, improve_rng);

  // per-object marginals across the weighted particles reaching each node
  auto extra_lines = [&](int, int, std::span<const NodeParticle<WorldState>> particles) {
    std::vector<std::string> lines;
    double wq = 0.0;
    for (const auto& np : particles) wq += np.weight;
    if (wq <= 0.0) return lines;
    for (int i = 0; i < n; ++i) {
      double p_dirty = 0.0, p_grasp = 0.0, p_table = 0.0;
      for (const auto& np : particles) {
        const auto& os = np.state.objects[i];
        if (os.dirty) p_dirty += np.weight;
        if (!os.in_dishwasher) p_table += np.weight;
        p_grasp += np.weight * model.grasp_probability(np.state, i);
      }
      lines.push_back("obj " + std::to_string(model.object_id(i)) + ": D " + fmt("%.2f", p_dirty / wq) +
                      " G " + fmt("%.2f", p_grasp / wq) + " T " + fmt("%.2f", p_table / wq));
    }
    return lines;
  };

  RngStream ann_rng = root.substream(7);
  const GraphAnnotations ann = annotate_graph(graph, belief, 0, model, ann_rng, extra_lines);
  const std::string dot = export_dot(
      graph, ann, [&](ActionId a) { return model.action_label(a); },
      [&](ObservationId o) { return observation_label(o, model.params().k); });

  if (!out_path.empty()) {
    write_file(out_path, dot);
    std::cout << "wrote " << out_path << " (value estimate " << fmt("%.4f", value.mean) << " +/- "
              << fmt("%.4f", value.std_error) << ")\n";
  } else {
    std::cout << dot;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occlusion-aware multi-object manipulation planner"};
  app.require_subcommand(1);

  std::string scene_path, method_text = "pomdp", out_path, config_path;
  int horizon = 3, width = 3, particles = 2000, episodes = 100, rounds = 10;
  std::uint64_t seed = 0;

  auto* validate = app.add_subcommand("validate-scene", "Check a scene file and report occlusions");
  validate->add_option("--scene", scene_path, "Scene JSON file")->required();

  auto* simulate = app.add_subcommand("simulate", "Run one scene/method batch of episodes");
  simulate->add_option("--scene", scene_path, "Scene JSON file")->required();
  simulate->add_option("--method", method_text, "pomdp|greedy|greedy-nohist")
      ->default_val("pomdp");
  simulate->add_option("--horizon", horizon, "Planning horizon")->default_val(3);
  simulate->add_option("--width", width, "Policy graph width")->default_val(3);
  simulate->add_option("--particles", particles, "Belief particle count")->default_val(2000);
  simulate->add_option("--episodes", episodes, "Episode count")->default_val(100);
  simulate->add_option("--seed", seed, "Root random seed")->default_val(0);
  simulate->add_option("--out", out_path, "Results CSV path (stdout when omitted)");

  auto* compare = app.add_subcommand("compare", "Run an experiment sweep with pairwise tests");
  compare->add_option("--config", config_path, "Experiment config JSON")->required();
  compare->add_option("--out", out_path, "Results CSV path (stdout only when omitted)");

  auto* export_policy = app.add_subcommand("export-policy", "Optimize and export a policy graph");
  export_policy->add_option("--scene", scene_path, "Scene JSON file")->required();
  export_policy->add_option("--horizon", horizon, "Planning horizon")->default_val(3);
  export_policy->add_option("--width", width, "Policy graph width")->default_val(3);
  export_policy->add_option("--rounds", rounds, "Improvement rounds")->default_val(10);
  export_policy->add_option("--particles", particles, "Belief particle count")->default_val(2000);
  export_policy->add_option("--seed", seed, "Root random seed")->default_val(0);
  export_policy->add_option("--out", out_path, "DOT output path (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (validate->parsed()) return cmd_validate_scene(scene_path);
    if (simulate->parsed())
      return cmd_simulate(scene_path, method_text, horizon, width, particles, episodes, seed,
                          out_path);
    if (compare->parsed()) return cmd_compare(config_path, out_path);
    if (export_policy->parsed())
      return cmd_export_policy(scene_path, horizon, width, rounds, particles, seed, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
