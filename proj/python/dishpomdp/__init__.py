"""Python interface to the multi-object manipulation planner."""

try:
    from . import _core
except ImportError:  # in-tree builds keep the extension next to the build dir
    import _core

    import sys as _sys

    _sys.modules[__name__ + "._core"] = _core

from ._core import (
    DishModel,
    DomainParams,
    DomainRewards,
    Scene,
    SceneError,
    attribute_posterior,
    bootstrap_ci,
    grasp_prior,
    grasp_success_prob,
    load_scene,
    load_scene_file,
    mann_whitney_u,
    merge_objects,
    obs_prob_dirty,
    occlusion_ratio,
    run_experiment,
    simulate,
)

__all__ = [
    "DishModel",
    "DomainParams",
    "DomainRewards",
    "Scene",
    "SceneError",
    "attribute_posterior",
    "bootstrap_ci",
    "grasp_prior",
    "grasp_success_prob",
    "load_scene",
    "load_scene_file",
    "mann_whitney_u",
    "merge_objects",
    "obs_prob_dirty",
    "occlusion_ratio",
    "run_experiment",
    "simulate",
]
