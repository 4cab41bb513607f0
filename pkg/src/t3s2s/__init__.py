"""Training-free cross-attention tuning for sketch-conditioned multi-instance scenes.

Prompt balance, characteristics prominence and dense tuning over a
deterministic desk-scale cross-attention stack.
"""
from importlib import resources
from pathlib import Path

from .kernels import BACKEND
from .pipeline import ablation_matrix, run, topk_probe
from .scene import SceneSpec, load_scene

__version__ = "0.1.0"


def scenes_dir() -> Path:
    """Directory of the bundled scenes (``default`` plus ``scene_01`` .. ``scene_20``)."""
    return Path(str(resources.files("t3s2s").joinpath("data/scenes")))


def default_scene_path() -> Path:
    return scenes_dir() / "default.json"


__all__ = [
    "BACKEND", "SceneSpec", "ablation_matrix", "default_scene_path", "load_scene",
    "run", "scenes_dir", "topk_probe",
]
