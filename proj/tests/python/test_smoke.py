"""End-to-end smoke tests for the Python bindings."""

import json
import math
import os

import pytest

import dishpomdp as dp

SCENES = os.environ.get("DISHPOMDP_SCENES", os.path.join(os.path.dirname(__file__), "..", "..", "scenes"))

TWO_OBJECTS = json.dumps(
    {
        "objects": [
            {"id": 1, "centroid": [0.1, 0.1], "perimeter": 100, "dirty": False},
            {"id": 2, "centroid": [0.1, 0.2], "perimeter": 100, "dirty": True},
        ],
        "contacts": [{"occluder": 1, "occluded": 2, "tou": 40}],
    }
)


def test_formulas():
    assert dp.grasp_prior(0.0) == pytest.approx(math.exp(-0.087), abs=1e-9)
    assert dp.grasp_prior(1.0) == pytest.approx(math.exp(-0.991), abs=1e-9)
    assert dp.occlusion_ratio(100, 40) == pytest.approx(40 / 60)
    assert dp.occlusion_ratio(100, 60) == 1.0
    assert dp.occlusion_ratio(100, 0) == 0.0
    assert dp.obs_prob_dirty(False, 0.0) == pytest.approx(0.0)
    p, degenerate = dp.attribute_posterior([(True, 0.5)])
    assert not degenerate
    assert p == pytest.approx(0.864, abs=1e-3)


def test_grasp_posterior_updates_with_history():
    prior = dp.grasp_success_prob(0.0, 0.0, 0.3)
    assert prior == pytest.approx(dp.grasp_prior(0.3))
    assert dp.grasp_success_prob(5.0, 0.0, 0.3) > prior
    assert dp.grasp_success_prob(0.0, 5.0, 0.3) < prior


def test_scene_round_trip_and_merge():
    scene = dp.load_scene(TWO_OBJECTS)
    assert [o.id for o in scene.objects] == [1, 2]
    assert scene.contacts[0].tou == 40
    again = dp.load_scene(scene.to_json())
    assert [o.perimeter for o in again.objects] == [100, 100]

    merged, log = dp.merge_objects(scene)
    assert len(merged.objects) == 2  # ratio 40/60 < 0.5: no merge
    assert log == []

    with pytest.raises(dp.SceneError):
        dp.load_scene(
            json.dumps(
                {
                    "objects": [{"id": 1, "centroid": [0, 0], "perimeter": 10, "dirty": False}],
                    "contacts": [{"occluder": 1, "occluded": 9, "tou": 1}],
                }
            )
        )


def test_model_exposes_occlusion_geometry():
    model = dp.DishModel(dp.load_scene(TWO_OBJECTS))
    assert model.action_count == 2 * 2 + 1
    assert model.observation_count == 8
    assert model.base_occlusion(model.object_index(2)) == pytest.approx(40 / 60)
    assert model.base_occlusion(model.object_index(1)) == 0.0
    assert model.action_label(0) == "FINISH"
    assert model.action_label(1) == "LIFT(1)"


def test_bundled_scenes_load():
    for name in sorted(os.listdir(SCENES)):
        scene = dp.load_scene_file(os.path.join(SCENES, name))
        assert scene.objects


def test_simulate_greedy_cell():
    path = os.path.join(SCENES, "scene01.json")
    result = dp.simulate(path, method="greedy", episodes=20, seed=3)
    assert result["method"] == "greedy"
    assert result["episodes"] == 20
    assert len(result["rewards"]) == 20
    assert result["ci_low"] <= result["mean_reward"] <= result["ci_high"]
    # deterministic given the seed
    again = dp.simulate(path, method="greedy", episodes=20, seed=3)
    assert again["rewards"] == result["rewards"]


def test_simulate_pomdp_cell_small():
    path = os.path.join(SCENES, "occluded_cup.json")
    result = dp.simulate(path, method="pomdp", horizon=2, width=2, particles=100, episodes=2, seed=1)
    assert result["episodes"] == 2
    assert result["horizon"] == 10


def test_run_experiment_grid(tmp_path):
    scene_file = tmp_path / "scene.json"
    scene_file.write_text(TWO_OBJECTS)
    config = json.dumps(
        {
            "scenes": [str(scene_file)],
            "methods": [{"type": "greedy"}, {"type": "greedy-nohist"}],
            "episodes_per_cell": 10,
            "seed": 7,
        }
    )
    rows, csv_text = dp.run_experiment(config)
    assert len(rows) == 2
    header = csv_text.splitlines()[0]
    assert header == "scene,method,horizon,episodes,mean_reward,ci_low,ci_high,wall_time_s"
    assert len(csv_text.splitlines()) == 3


def test_statistics_helpers():
    lo, hi = dp.bootstrap_ci([1.0, 2.0, 3.0, 4.0], resamples=2000, seed=5)
    assert lo <= 2.5 <= hi
    p_same = dp.mann_whitney_u([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert p_same > 0.9
    p_far = dp.mann_whitney_u([0.0] * 50, [10.0] * 50)
    assert p_far < 1e-6
