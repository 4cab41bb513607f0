"""Instance label maps and the per-resolution mask pyramid."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import pnm
from .errors import BadTarget, ConfigError, LabelOutOfRange, ParseError, UnknownInstance


@dataclass(frozen=True)
class SketchLabelMap:
    """``h x w`` grid of instance ids, 0 for background."""

    cells: np.ndarray
    n_instances: int

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2 or 0 in cells.shape:
            raise ConfigError(f"label map must be a non-empty 2-D grid, got {cells.shape}")
        top = int(cells.max())
        if top > self.n_instances:
            raise LabelOutOfRange(f"label {top} exceeds instance count {self.n_instances}")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape


def load_label_map(path: str | Path, expected_instances: int) -> SketchLabelMap:
    """Parse a P2/P5 PGM whose pixel values are instance ids."""
    img = pnm.read(path)
    if img.ndim != 2:
        raise ParseError(f"{path}: expected a PGM (P2/P5), got a color image")
    return SketchLabelMap(img, expected_instances)


def label_map_from_colors(
    img: np.ndarray, colors: Mapping[int, Sequence[int]], n_instances: int
) -> SketchLabelMap:
    """Convert an RGB sketch to a label map; unmatched colors become background."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ConfigError("color sketch must be h x w x 3")
    cells = np.zeros(img.shape[:2], dtype=np.uint8)
    for inst, rgb in colors.items():
        hit = np.all(img == np.asarray(rgb, dtype=np.uint8), axis=2)
        cells[hit] = inst
    return SketchLabelMap(cells, n_instances)


def load_color_sketch(
    path: str | Path, colors: Mapping[int, Sequence[int]], n_instances: int
) -> SketchLabelMap:
    img = pnm.read(path)
    if img.ndim != 3:
        raise ParseError(f"{path}: expected a PPM color image")
    return label_map_from_colors(img, colors, n_instances)


def instance_mask(label_map: SketchLabelMap, inst: int) -> np.ndarray:
    """Binary uint8 mask of one instance."""
    if not 1 <= inst <= label_map.n_instances:
        raise UnknownInstance(f"instance {inst} not in 1..{label_map.n_instances}")
    return (label_map.cells == inst).astype(np.uint8)


def downsample_any(mask: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Max-pool a binary mask onto a coarser grid.

    Target row ``r`` pools source rows ``[r*h//th, (r+1)*h//th)`` (same for
    columns), so the windows partition the source even when the sizes do not
    divide. A cell is 1 iff any pixel of its window is 1.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    th, tw = target
    if th < 1 or tw < 1:
        raise BadTarget(f"target {target} has a zero dimension")
    if th > h or tw > w:
        raise BadTarget(f"target {target} larger than source {(h, w)}")
    rows = np.arange(th) * h // th
    cols = np.arange(tw) * w // tw
    out = np.maximum.reduceat(mask, rows, axis=0)
    out = np.maximum.reduceat(out, cols, axis=1)
    return (out != 0).astype(np.uint8)


@dataclass(frozen=True)
class PyramidLevel:
    h: int
    w: int
    masks: Mapping[int, np.ndarray]  # instance id -> flat uint8 vector, row-major

    @property
    def b(self) -> int:
        return self.h * self.w

    def stack(self, ids: Iterable[int]) -> np.ndarray:
        """``(len(ids), b)`` uint8 matrix of the given instances' masks."""
        ids = list(ids)
        if not ids:
            return np.zeros((0, self.b), dtype=np.uint8)
        return np.stack([self.masks[i] for i in ids])


@dataclass(frozen=True)
class MaskPyramid:
    levels: tuple[PyramidLevel, ...]
    ids: tuple[int, ...]

    def level(self, h: int, w: int) -> PyramidLevel:
        for lv in self.levels:
            if (lv.h, lv.w) == (h, w):
                return lv
        raise KeyError(f"no pyramid level at {h}x{w}")


def pyramid_from_masks(
    masks: Mapping[int, np.ndarray],
    resolutions: Sequence[tuple[int, int]],
    allow_empty: bool = False,
) -> MaskPyramid:
    """Build a pyramid from full-resolution per-instance masks (may overlap)."""
    if not resolutions:
        raise ConfigError("at least one resolution is required")
    for inst, m in masks.items():
        if not np.any(m):
            if not allow_empty:
                raise ConfigError(f"instance {inst} is empty in the sketch")
            warnings.warn(f"instance {inst} is empty in the sketch", stacklevel=2)
    levels = []
    for h, w in dict.fromkeys(tuple(r) for r in resolutions):
        flat = {}
        for inst, m in masks.items():
            v = downsample_any(m, (h, w)).reshape(-1)
            v.setflags(write=False)
            flat[inst] = v
        levels.append(PyramidLevel(h, w, flat))
    return MaskPyramid(tuple(levels), tuple(masks))


def build_pyramid(
    label_map: SketchLabelMap,
    ids: Iterable[int],
    resolutions: Sequence[tuple[int, int]],
    allow_empty: bool = False,
) -> MaskPyramid:
    """Per-instance flattened masks at every requested resolution.

    ``ids`` is typically ``KeywordIndices.ids``.
    """
    masks = {inst: instance_mask(label_map, inst) for inst in ids}
    return pyramid_from_masks(masks, resolutions, allow_empty=allow_empty)
