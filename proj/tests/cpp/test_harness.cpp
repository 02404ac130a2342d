#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dishpomdp/harness.hpp"
#include "dishpomdp/scene.hpp"

using namespace dishpomdp;

namespace {

SceneSpec tiny_scene() {
  return load_scene(R"({
    "objects": [
      {"id": 1, "centroid": [0.1, 0.1], "perimeter": 100, "dirty": true},
      {"id": 2, "centroid": [0.4, 0.1], "perimeter": 100, "dirty": false}
    ],
    "contacts": []
  })");
}

}  // namespace

TEST_CASE("method names and parsing") {
  CHECK(MethodSpec::parse("greedy").name() == "greedy");
  CHECK(MethodSpec::parse("greedy-nohist").name() == "greedy-nohist");
  MethodSpec m = MethodSpec::parse("pomdp");
  m.horizon = 2;
  m.width = 4;
  CHECK(m.name() == "pomdp-t2-w4");
  CHECK_THROWS_AS(MethodSpec::parse("qmdp"), std::invalid_argument);
}

TEST_CASE("experiment config parsing applies defaults and overrides") {
  const ExperimentConfig cfg = load_experiment_config(R"({
    "scenes": ["a.json", "b.json"],
    "methods": [
      {"type": "pomdp", "horizon": 2, "particles": 50},
      {"type": "greedy"}
    ],
    "episodes_per_cell": 7,
    "seed": 42,
    "rewards": {"wash_clean": -5.0, "lift": -0.25}
  })");
  CHECK(cfg.scene_files.size() == 2);
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.methods[0].horizon == 2);
  CHECK(cfg.methods[0].particles == 50);
  CHECK(cfg.episodes_per_cell == 7);
  CHECK(cfg.horizon == 10);
  CHECK(cfg.gamma_shape == doctest::Approx(0.2));
  CHECK(cfg.gamma_scale == doctest::Approx(5.0));
  CHECK(cfg.seed == 42);
  CHECK(cfg.domain.rewards.wash_clean == doctest::Approx(-5.0));
  CHECK(cfg.domain.rewards.lift == doctest::Approx(-0.25));
  CHECK(cfg.domain.rewards.wash_dirty == doctest::Approx(5.0));

  CHECK_THROWS(load_experiment_config(R"({"scenes": [], "methods": [{"type": "greedy"}]})"));
  CHECK_THROWS(load_experiment_config(R"({"scenes": ["a"], "methods": []})"));
  CHECK_THROWS(load_experiment_config(R"({"scenes": ["a"], "methods": [{"type": "greedy"}],
                                          "mystery": 1})"));
}

TEST_CASE("sample_ground_truth copies labels and bounds hidden counts") {
  const SceneSpec scene = tiny_scene();
  RngStream rng(1);
  for (int t = 0; t < 100; ++t) {
    const GroundTruth gt = sample_ground_truth(scene, 0.2, 5.0, rng);
    REQUIRE(gt.dirty.size() == 2);
    CHECK(gt.dirty[0]);
    CHECK_FALSE(gt.dirty[1]);
    for (int i = 0; i < 2; ++i) {
      CHECK(gt.hidden_n_succ[i] >= 0.0);
      CHECK(gt.hidden_n_fail[i] >= 0.0);
    }
  }
  // degenerate scale: no hidden evidence at all
  const GroundTruth flat = sample_ground_truth(scene, 0.2, 0.0, rng);
  CHECK(flat.hidden_n_succ[0] == 0.0);
  CHECK(flat.hidden_n_fail[0] == 0.0);
}

TEST_CASE("run_cell is deterministic per seed regardless of worker count") {
  const SceneSpec scene = tiny_scene();
  ExperimentConfig config;
  config.scene_files = {"unused"};
  config.methods = {MethodSpec::parse("greedy")};
  config.episodes_per_cell = 20;

  setenv("POMDP_MANIP_THREADS", "1", 1);
  RngStream r1(99);
  const auto serial = run_cell(scene, config.methods[0], config, r1);
  setenv("POMDP_MANIP_THREADS", "4", 1);
  RngStream r2(99);
  const auto threaded = run_cell(scene, config.methods[0], config, r2);
  unsetenv("POMDP_MANIP_THREADS");

  REQUIRE(serial.size() == threaded.size());
  for (std::size_t e = 0; e < serial.size(); ++e) {
    CHECK(serial[e].total_reward == threaded[e].total_reward);
    CHECK(serial[e].steps.size() == threaded[e].steps.size());
  }
  // different seeds give different data
  RngStream r3(100);
  const auto other = run_cell(scene, config.methods[0], config, r3);
  bool any_diff = false;
  for (std::size_t e = 0; e < serial.size(); ++e)
    any_diff |= serial[e].total_reward != other[e].total_reward;
  CHECK(any_diff);
}

TEST_CASE("bootstrap_ci brackets the mean and collapses for constant data") {
  RngStream rng(7);
  std::vector<double> samples;
  for (int i = 0; i < 200; ++i) samples.push_back(rng.normal(3.0, 1.0));
  RngStream brng(8);
  const auto [lo, hi] = bootstrap_ci(samples, 4000, 0.95, brng);
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= samples.size();
  CHECK(lo < mean);
  CHECK(hi > mean);
  CHECK(hi - lo < 0.5);  // ~4 standard errors at n=200, sd=1

  const std::vector<double> constant(50, 2.5);
  RngStream crng(9);
  const auto [clo, chi] = bootstrap_ci(constant, 100, 0.95, crng);
  CHECK(clo == doctest::Approx(2.5));
  CHECK(chi == doctest::Approx(2.5));

  RngStream erng(10);
  CHECK_THROWS(bootstrap_ci({}, 10, 0.95, erng));
  CHECK_THROWS(bootstrap_ci(constant, 10, 1.5, erng));
}

TEST_CASE("mann_whitney_u separates shifted samples and accepts identical ones") {
  RngStream rng(11);
  std::vector<double> a, b, c;
  for (int i = 0; i < 100; ++i) {
    a.push_back(rng.normal(0.0, 1.0));
    b.push_back(rng.normal(2.0, 1.0));
    c.push_back(a.back());
  }
  CHECK(mann_whitney_u(a, b) < 1e-6);
  CHECK(mann_whitney_u(a, c) > 0.9);  // identical distributions, heavy ties
  CHECK(mann_whitney_u(a, b) == mann_whitney_u(b, a));

  const std::vector<double> constant(20, 1.0);
  CHECK(mann_whitney_u(constant, constant) == 1.0);
  CHECK_THROWS(mann_whitney_u({}, constant));
}

TEST_CASE("results CSV uses the pinned column layout") {
  std::vector<ExperimentRow> rows;
  rows.push_back({"scene01", "greedy", 10, 100, 1.25, 0.5, 2.0, 0.0123});
  std::ostringstream out;
  write_results_csv(rows, out);
  std::istringstream in(out.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "scene,method,horizon,episodes,mean_reward,ci_low,ci_high,wall_time_s");
  std::getline(in, line);
  CHECK(line == "scene01,greedy,10,100,1.250000,0.500000,2.000000,0.012");
}

TEST_CASE("run_experiment produces one row per scene-method cell") {
  const std::string path = "/tmp/dishpomdp_test_scene.json";
  {
    std::ofstream f(path);
    f << serialize_scene(tiny_scene());
  }
  ExperimentConfig config;
  config.scene_files = {path};
  config.methods = {MethodSpec::parse("greedy"), MethodSpec::parse("greedy-nohist")};
  config.episodes_per_cell = 10;
  config.seed = 5;
  const ExperimentResult result = run_experiment(config);
  REQUIRE(result.rows.size() == 2);
  CHECK(result.rows[0].scene == "dishpomdp_test_scene");
  CHECK(result.rows[0].method == "greedy");
  CHECK(result.rows[1].method == "greedy-nohist");
  CHECK(result.rows[0].episodes == 10);
  CHECK(result.rows[0].ci_low <= result.rows[0].mean_reward);
  CHECK(result.rows[0].ci_high >= result.rows[0].mean_reward);
  REQUIRE(result.rewards.size() == 1);
  REQUIRE(result.rewards[0].size() == 2);
  CHECK(result.rewards[0][0].size() == 10);

  // deterministic given the seed
  const ExperimentResult again = run_experiment(config);
  for (std::size_t i = 0; i < result.rows.size(); ++i)
    CHECK(result.rows[i].mean_reward == again.rows[i].mean_reward);
}
