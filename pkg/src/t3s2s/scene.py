"""Scene configuration: JSON schema, validation and input loading."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator

from . import pnm
from .attention import LayerConfig, default_layer_stack
from .errors import ConfigError, IOFailure
from .prompt import EmbeddingProvider, KeywordIndices
from .sketch import instance_mask, load_color_sketch, load_label_map


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class InstanceSpec(_Strict):
    word: str
    id: int = Field(ge=1, le=255)
    sketch: str | None = None
    color: tuple[int, int, int] | None = None


class EmbeddingSpec(_Strict):
    mode: Literal["synthetic", "file"] = "synthetic"
    seed: int = 0
    dim: int = Field(64, ge=1)
    path: str | None = None


class DenseSpec(_Strict):
    strength: float = Field(2.5, ge=0)
    gamma: float = Field(2.0, gt=0)


class LayerSpec(_Strict):
    placement: str
    h: int = Field(ge=1)
    w: int = Field(ge=1)
    d_m: int = Field(ge=1)
    heads: int = Field(2, ge=1)
    dense_tuning: bool | None = None


class SceneSpec(_Strict):
    """Everything needed for one run. Paths are relative to the scene file."""

    name: str = "scene"
    prompt: str
    instances: list[InstanceSpec] = Field(default_factory=list)
    lexicon: list[str] | None = None
    sketch: str | None = None
    context_length: int = Field(77, ge=2)
    embedding: EmbeddingSpec = EmbeddingSpec()
    k: int = Field(2, ge=0)
    beta: float = Field(1.0, ge=0)
    dense: DenseSpec = DenseSpec()
    timesteps: int = Field(8, ge=1)
    seed: int = 0
    heads: int = Field(2, ge=1)
    layers: Literal["default"] | list[LayerSpec] = "default"
    allow_empty: bool = False

    _base: Path = PrivateAttr(default_factory=Path.cwd)

    @field_validator("instances")
    @classmethod
    def _unique_ids(cls, v):
        ids = [i.id for i in v]
        if len(set(ids)) != len(ids):
            raise ValueError("instance ids must be unique")
        return v

    @property
    def base_dir(self) -> Path:
        return self._base

    def with_base(self, base: Path) -> SceneSpec:
        self._base = Path(base)
        return self

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self._base / p

    def overrides(self) -> list[tuple[str, int]] | None:
        return [(i.word, i.id) for i in self.instances] or None

    def provider(self) -> EmbeddingProvider:
        e = self.embedding
        if e.mode == "file":
            if not e.path:
                raise ConfigError("embedding.path: required in file mode")
            return EmbeddingProvider.from_file(self.resolve(e.path), e.dim)
        return EmbeddingProvider.synthetic(e.seed, e.dim)

    def layer_stack(self, seed: int | None = None) -> list[LayerConfig]:
        seed = self.seed if seed is None else seed
        if self.layers == "default":
            return default_layer_stack(seed, self.heads)
        return [
            LayerConfig(
                index=m, placement=l.placement, h=l.h, w=l.w, d_m=l.d_m, heads=l.heads,
                dense_tuning=l.dense_tuning, weight_seed=seed * 1000 + m,
            )
            for m, l in enumerate(self.layers)
        ]

    def instance_masks(self, q: KeywordIndices) -> dict[int, np.ndarray]:
        """Full-resolution mask per bound instance id."""
        by_id = {i.id: i for i in self.instances}
        masks: dict[int, np.ndarray] = {}
        label_map = None
        n_inst = max(list(q.ids) + [i.id for i in self.instances] + [0])
        for inst in q.ids:
            spec = by_id.get(inst)
            if spec is not None and spec.sketch:
                img = pnm.read(self.resolve(spec.sketch))
                if img.ndim != 2:
                    raise ConfigError(f"instances[{inst}].sketch: expected a PGM")
                masks[inst] = (img != 0).astype(np.uint8)
                continue
            if label_map is None:
                if not self.sketch:
                    raise ConfigError(f"sketch: required (instance {inst} has no own sketch)")
                path = self.resolve(self.sketch)
                if path.suffix.lower() == ".ppm":
                    colors = {i.id: i.color for i in self.instances if i.color is not None}
                    if not colors:
                        raise ConfigError("instances[].color: required for a PPM sketch")
                    label_map = load_color_sketch(path, colors, n_inst)
                else:
                    label_map = load_label_map(path, n_inst)
            masks[inst] = instance_mask(label_map, inst)
        shapes = {m.shape for m in masks.values()}
        if len(shapes) > 1:
            raise ConfigError(f"instance sketches differ in size: {sorted(shapes)}")
        return masks

    def echo(self) -> dict:
        return self.model_dump(mode="json")


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_scene(text: str, base: Path | None = None, source: str = "<scene>") -> SceneSpec:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{source}: malformed JSON at byte offset {len(text[:exc.pos].encode('utf-8'))} "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from None
    try:
        scene = SceneSpec.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from None
    return scene.with_base(base if base is not None else Path.cwd())


def load_scene(path: str | Path) -> SceneSpec:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IOFailure(f"cannot read scene {path}: {exc}") from exc
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 (byte offset {exc.start})") from None
    return parse_scene(text, path.parent, str(path))
