#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <utility>

#include "dishpomdp/dish_model.hpp"
#include "dishpomdp/harness.hpp"
#include "dishpomdp/scene.hpp"

namespace py = pybind11;
using namespace dishpomdp;

namespace {

py::dict row_to_dict(const ExperimentRow& row) {
  py::dict d;
  d["scene"] = row.scene;
  d["method"] = row.method;
  d["horizon"] = row.horizon;
  d["episodes"] = row.episodes;
  d["mean_reward"] = row.mean_reward;
  d["ci_low"] = row.ci_low;
  d["ci_high"] = row.ci_high;
  d["wall_time_s"] = row.wall_time_s;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-object manipulation planner: scenes, domain model, and experiments";

  py::register_exception<SceneError>(m, "SceneError");

  py::class_<DomainRewards>(m, "DomainRewards")
      .def(py::init<>())
      .def_readwrite("wash_dirty", &DomainRewards::wash_dirty)
      .def_readwrite("wash_clean", &DomainRewards::wash_clean)
      .def_readwrite("grasp_fail", &DomainRewards::grasp_fail)
      .def_readwrite("lift", &DomainRewards::lift)
      .def_readwrite("finish_per_dirty", &DomainRewards::finish_per_dirty);

  py::class_<DomainParams>(m, "DomainParams")
      .def(py::init<>())
      .def_readwrite("theta_g1", &DomainParams::theta_g1)
      .def_readwrite("theta_g2", &DomainParams::theta_g2)
      .def_readwrite("theta_d1", &DomainParams::theta_d1)
      .def_readwrite("theta_d2", &DomainParams::theta_d2)
      .def_readwrite("theta_c1", &DomainParams::theta_c1)
      .def_readwrite("theta_c2", &DomainParams::theta_c2)
      .def_readwrite("n_prior", &DomainParams::n_prior)
      .def_readwrite("k", &DomainParams::k)
      .def_readwrite("rewards", &DomainParams::rewards)
      .def_readwrite("max_steps", &DomainParams::max_steps);

  py::class_<SceneObject>(m, "SceneObject")
      .def_readonly("id", &SceneObject::id)
      .def_readonly("cx", &SceneObject::cx)
      .def_readonly("cy", &SceneObject::cy)
      .def_readonly("perimeter", &SceneObject::perimeter)
      .def_readonly("true_dirty", &SceneObject::true_dirty);

  py::class_<SceneContact>(m, "SceneContact")
      .def_readonly("occluder", &SceneContact::occluder)
      .def_readonly("occluded", &SceneContact::occluded)
      .def_readonly("tou", &SceneContact::tou);

  py::class_<SceneSpec>(m, "Scene")
      .def_readonly("objects", &SceneSpec::objects)
      .def_readonly("contacts", &SceneSpec::contacts)
      .def("to_json", [](const SceneSpec& s) { return serialize_scene(s); });

  m.def("load_scene", &load_scene, py::arg("text"),
        "Parse and validate a scene from a JSON string.");
  m.def("load_scene_file", &load_scene_file, py::arg("path"));
  m.def(
      "merge_objects",
      [](const SceneSpec& scene) {
        std::vector<std::string> log;
        SceneSpec merged = merge_objects(scene, &log);
        return py::make_tuple(std::move(merged), std::move(log));
      },
      py::arg("scene"),
      "Merge strongly-overlapping contact pairs; returns (scene, log lines).");
  m.def("occlusion_ratio", &occlusion_ratio_raw, py::arg("tot"), py::arg("tou"));

  m.def("grasp_prior", &grasp_prior, py::arg("occl"), py::arg("params") = DomainParams{});
  m.def("grasp_success_prob", &grasp_success_prob, py::arg("n_succ"), py::arg("n_fail"),
        py::arg("occl"), py::arg("params") = DomainParams{});
  m.def("obs_prob_dirty", &obs_prob_dirty, py::arg("true_dirty"), py::arg("occl"),
        py::arg("params") = DomainParams{});
  m.def(
      "attribute_posterior",
      [](const std::vector<std::pair<bool, double>>& history, const DomainParams& params) {
        std::vector<AttrObservation> obs;
        obs.reserve(history.size());
        for (const auto& [dirty, occl] : history) obs.push_back({dirty, occl});
        const AttrPosterior post = attribute_posterior(obs, params);
        return py::make_tuple(post.p_dirty, post.degenerate);
      },
      py::arg("history"), py::arg("params") = DomainParams{},
      "P(dirty | list of (observed_dirty, occlusion)); returns (p_dirty, degenerate).");

  py::class_<DishModel>(m, "DishModel")
      .def(py::init<SceneSpec, DomainParams>(), py::arg("merged_scene"),
           py::arg("params") = DomainParams{})
      .def_property_readonly("action_count", &DishModel::action_count)
      .def_property_readonly("observation_count", &DishModel::observation_count)
      .def(
          "action_label",
          [](const DishModel& model, int action) {
            return model.action_label(ActionId{action});
          },
          py::arg("action_id"))
      .def("base_occlusion", &DishModel::base_occlusion, py::arg("object_index"))
      .def("object_index", &DishModel::object_index, py::arg("object_id"));

  m.def(
      "simulate",
      [](const std::string& scene_path, const std::string& method, int horizon, int width,
         int particles, int episodes, std::uint64_t seed) {
        ExperimentConfig config;
        config.scene_files = {scene_path};
        MethodSpec spec = MethodSpec::parse(method);
        spec.horizon = horizon;
        spec.width = width;
        spec.particles = particles;
        config.methods = {spec};
        config.episodes_per_cell = episodes;
        config.seed = seed;
        const ExperimentResult result = run_experiment(config);
        py::dict d = row_to_dict(result.rows.at(0));
        d["rewards"] = result.rewards.at(0).at(0);
        return d;
      },
      py::arg("scene_path"), py::arg("method") = "pomdp", py::arg("horizon") = 3,
      py::arg("width") = 3, py::arg("particles") = 2000, py::arg("episodes") = 100,
      py::arg("seed") = 0,
      "Run one scene/method cell and return summary statistics plus per-episode rewards.");

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ExperimentConfig config = load_experiment_config(config_json);
        const ExperimentResult result = run_experiment(config);
        py::list rows;
        for (const auto& row : result.rows) rows.append(row_to_dict(row));
        std::ostringstream csv;
        write_results_csv(result.rows, csv);
        return py::make_tuple(std::move(rows), csv.str());
      },
      py::arg("config_json"),
      "Run a full experiment grid from a JSON config; returns (rows, csv_text).");

  m.def(
      "bootstrap_ci",
      [](const std::vector<double>& samples, int resamples, double level, std::uint64_t seed) {
        RngStream rng(seed);
        return bootstrap_ci(samples, resamples, level, rng);
      },
      py::arg("samples"), py::arg("resamples") = 10000, py::arg("level") = 0.95,
      py::arg("seed") = 0);
  m.def(
      "mann_whitney_u",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        return mann_whitney_u(a, b);
      },
      py::arg("samples_a"), py::arg("samples_b"),
      "Two-sided tie-corrected Mann-Whitney U p-value (normal approximation).");
}
