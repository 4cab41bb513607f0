"""Drive a cross-attention layer stack over a timestep schedule and report on it."""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .attention import DenseTuneParams, LayerConfig, layer_forward
from .errors import ConfigError, NumericError
from .prompt import (
    EmbeddingMatrix,
    KeywordIndices,
    TokenSequence,
    embed,
    extract_keywords,
    prompt_balance,
    tokenize,
)
from .scene import SceneSpec
from .sketch import MaskPyramid, pyramid_from_masks

# Table-1 style variant grid: name -> (pb, cp, dt)
VARIANTS: dict[str, tuple[bool, bool, bool]] = {
    "controlnet": (False, False, False),
    "pb": (True, False, False),
    "dt": (False, False, True),
    "cp": (False, True, False),
    "pb+cp": (True, True, False),
    "full": (True, True, True),
}


def synth_query_features(seed: int, layer: int, t: int, b: int, d_m: int) -> np.ndarray:
    """Standard-normal stand-in for UNet features, keyed by (seed, layer, timestep)."""
    if b < 1 or d_m < 1:
        raise ConfigError("feature dimensions must be positive")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, layer, t, 0x51])
    return np.random.default_rng(ss).standard_normal((b, d_m))


def schedule(T: int) -> list[float]:
    """Normalized times from 1 (noisiest) down to 0 at the final step."""
    if T < 1:
        raise ConfigError("timestep count must be >= 1")
    if T == 1:
        return [1.0]
    return [(T - 1 - t) / (T - 1) for t in range(T)]


@dataclass
class Prepared:
    tokens: TokenSequence
    q: KeywordIndices
    S_g: EmbeddingMatrix
    S_b: EmbeddingMatrix
    pyramid: MaskPyramid
    stack: list[LayerConfig]
    areas: dict[int, float]


def prepare(scene: SceneSpec, pb: bool = True, seed: int | None = None) -> Prepared:
    tokens = tokenize(scene.prompt, scene.context_length)
    q = extract_keywords(tokens, scene.lexicon, scene.overrides())
    provider = scene.provider()
    S_g = embed(tokens, provider)
    S_b = prompt_balance(S_g, q, provider) if pb else S_g
    stack = scene.layer_stack(seed)
    masks = scene.instance_masks(q)
    resolutions = [(c.h, c.w) for c in stack]
    pyramid = pyramid_from_masks(masks, resolutions, allow_empty=scene.allow_empty)
    areas = {i: float(m.sum()) / m.size for i, m in masks.items()}
    return Prepared(tokens, q, S_g, S_b, pyramid, stack, areas)


@dataclass
class RunReport:
    scene: dict
    variant: dict
    seed: int
    tokens: list[str]
    i_end: int
    keywords: list[dict]
    responses: list[dict]
    histogram: np.ndarray  # (K, n) counts of TopK ranks per token index
    final_attention: dict[int, np.ndarray] = field(repr=False)  # layer -> b x n, head mean
    final_enhancement: dict[int, np.ndarray] = field(repr=False)  # layer -> b x d_m
    layers: list[dict] = field(default_factory=list)
    digest: str = ""

    def instance_summary(self) -> dict[int, dict]:
        """Mean in-mask / out-of-mask response per instance over all steps and layers."""
        out: dict[int, dict] = {}
        for kw in self.keywords:
            rows = [r for r in self.responses if r["instance"] == kw["instance"]]
            ins = [r["in_mask"] for r in rows if r["in_mask"] is not None]
            outs = [r["out_mask"] for r in rows if r["out_mask"] is not None]
            out[kw["instance"]] = {
                "word": kw["word"],
                "area": kw["area"],
                "in_mask": math.fsum(ins) / len(ins) if ins else None,
                "out_mask": math.fsum(outs) / len(outs) if outs else None,
            }
        return out

    def heatmap_names(self) -> list[str]:
        step = self.scene["timesteps"] - 1
        return [
            f"attn_L{lay['index']}_t{step}_tok{i}.pgm"
            for lay in self.layers
            for i in range(self.i_end + 1)
        ]

    def to_json(self) -> dict:
        return {
            "scene": self.scene,
            "variant": self.variant,
            "seed": self.seed,
            "tokens": self.tokens[: self.i_end + 1],
            "i_end": self.i_end,
            "keywords": self.keywords,
            "layers": self.layers,
            "responses": self.responses,
            "summary": {str(k): v for k, v in self.instance_summary().items()},
            "topk_histogram": self.histogram.tolist(),
            "attention_maps": self.heatmap_names(),
            "digest": self.digest,
        }


def run(
    scene: SceneSpec,
    pb: bool = True,
    cp: bool = True,
    dt: bool = True,
    seed: int | None = None,
    embeddings: EmbeddingMatrix | None = None,
    amplify: tuple[int, float] | None = None,
) -> RunReport:
    """Execute the layer stack over all timesteps.

    ``embeddings`` injects a fixed matrix in place of the (balanced) prompt
    embeddings. ``amplify = (K, factor)`` runs the value-amplification probe.
    Pure and in-memory; nothing is written.
    """
    seed = scene.seed if seed is None else seed
    prep = prepare(scene, pb=pb, seed=seed)
    S = (embeddings if embeddings is not None else prep.S_b).rows
    if S.shape[0] != prep.tokens.n:
        raise ConfigError("injected embeddings do not match the context length")
    q, i_end, n = prep.q, prep.tokens.i_end, prep.tokens.n
    if scene.k > i_end - 1 and cp:
        raise ConfigError(f"k: {scene.k} exceeds the {i_end - 1} word tokens")
    cp_params = (scene.k, scene.beta) if cp else None
    dt_params = DenseTuneParams(scene.dense.strength, scene.dense.gamma) if dt else None

    hist = np.zeros((scene.k if cp else 0, n), dtype=np.int64)
    responses: list[dict] = []
    final_attn: dict[int, np.ndarray] = {}
    final_enh: dict[int, np.ndarray] = {}
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(S).tobytes())
    taus = schedule(scene.timesteps)

    for t, tau in enumerate(taus):
        for cfg in prep.stack:
            level = prep.pyramid.level(cfg.h, cfg.w)
            X = synth_query_features(seed, cfg.index, t, cfg.b, cfg.d_m)
            res = layer_forward(
                cfg, X, S, level, q, i_end, tau=tau, cp=cp_params, dt=dt_params, amplify=amplify
            )
            if not np.all(np.isfinite(res.output)):
                raise NumericError(f"non-finite output at step {t}, layer {cfg.placement}")
            digest.update(res.enhanced.tobytes())
            for Y in res.topk:
                for rank in range(Y.shape[1]):
                    hist[rank] += np.bincount(Y[:, rank], minlength=n)
            mag = np.abs(res.enhanced)
            for inst in q.ids:
                m = level.masks[inst].astype(bool)
                responses.append({
                    "t": t,
                    "tau": tau,
                    "layer": cfg.index,
                    "placement": cfg.placement,
                    "instance": inst,
                    "in_mask": float(mag[m].mean()) if m.any() else None,
                    "out_mask": float(mag[~m].mean()) if (~m).any() else None,
                })
            if t == len(taus) - 1:
                final_attn[cfg.index] = np.mean(res.attention, axis=0)
                final_enh[cfg.index] = np.concatenate(res.enhancement, axis=1)
    digest.update(hist.tobytes())
    for k in sorted(final_attn):
        digest.update(final_attn[k].tobytes())

    return RunReport(
        scene=scene.echo(),
        variant={"pb": pb, "cp": cp, "dt": dt, "amplify": list(amplify) if amplify else None},
        seed=seed,
        tokens=prep.tokens.tokens(),
        i_end=i_end,
        keywords=[
            {"index": i, "instance": inst, "word": w, "area": prep.areas[inst]}
            for i, inst, w in zip(q.q, q.ids, q.words)
        ],
        responses=responses,
        histogram=hist,
        final_attention=final_attn,
        final_enhancement=final_enh,
        layers=[
            {"index": c.index, "placement": c.placement, "h": c.h, "w": c.w,
             "d_m": c.d_m, "heads": c.heads, "dense_tuning": bool(c.dense_tuning)}
            for c in prep.stack
        ],
        digest=digest.hexdigest(),
    )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("T3S2S_THREADS", "1")))
    except ValueError:
        return 1


def ablation_matrix(
    scene: SceneSpec,
    variants: dict[str, tuple[bool, bool, bool]] | None = None,
    seed: int | None = None,
) -> list[tuple[str, RunReport]]:
    """One report per variant; identical inputs, only the enabled tunings differ."""
    variants = VARIANTS if variants is None else variants
    names = list(variants)

    def one(name):
        pb, cp, dt = variants[name]
        return run(scene, pb=pb, cp=cp, dt=dt, seed=seed)

    workers = min(_threads(), len(names))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            reports = list(ex.map(one, names))
    else:
        reports = [one(n) for n in names]
    return list(zip(names, reports))


def topk_probe(
    scene: SceneSpec,
    k_values: list[int],
    factor: float = 2.0,
    seed: int | None = None,
) -> dict[int, dict[int, float | None]]:
    """In-mask response per instance when each channel's TopK values are scaled.

    All three tunings are off; K = 0 is the untouched baseline.
    """
    if not factor > 0:
        raise ConfigError("factor must be positive")
    table: dict[int, dict[int, float | None]] = {}
    for K in k_values:
        if K < 0:
            raise ConfigError("K values must be non-negative")
        amp = (K, factor) if K > 0 else None
        rep = run(scene, pb=False, cp=False, dt=False, seed=seed, amplify=amp)
        table[K] = {i: s["in_mask"] for i, s in rep.instance_summary().items()}
    return table
