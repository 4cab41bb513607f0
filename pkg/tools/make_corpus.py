"""Regenerate the bundled scenes under src/t3s2s/data/scenes/.

    python tools/make_corpus.py

Sketches are 64x64 PGM label maps drawn from simple primitives with a fixed
seed, so the output is reproducible byte for byte.
"""
import json
from pathlib import Path

import numpy as np

from t3s2s import pnm

OUT = Path(__file__).resolve().parents[1] / "src" / "t3s2s" / "data" / "scenes"
SIZE = 64

TERRAINS = ["plain", "mountain", "desert", "tundra", "city"]
BIG = ["river", "lake", "forest", "canyon", "road", "field", "glacier", "valley"]
SMALL = ["bridge", "stones", "castle", "houses", "tower", "tree", "temple", "well",
         "windmill", "tent", "statue", "barn", "lighthouse", "cabin", "boat", "shrine"]
MODIFIERS = {"river": "a winding", "lake": "a calm", "forest": "a dense", "canyon": "a deep",
             "road": "a dusty", "field": "a green", "glacier": "a blue", "valley": "a narrow"}

yy, xx = np.mgrid[0:SIZE, 0:SIZE]


def band(rng, width):
    """Wavy band crossing the canvas."""
    amp, phase, freq = rng.uniform(4, 10), rng.uniform(0, 6.3), rng.uniform(0.05, 0.15)
    center = rng.uniform(16, 48) + amp * np.sin(freq * xx + phase)
    if rng.random() < 0.5:
        return np.abs(yy - center) < width
    return np.abs(xx - center.T) < width


def blob(rng, r_lo, r_hi):
    cy, cx = rng.uniform(6, SIZE - 6, size=2)
    ry, rx = rng.uniform(r_lo, r_hi, size=2)
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def box(rng, lo, hi):
    h, w = rng.integers(lo, hi + 1, size=2)
    y, x = rng.integers(0, SIZE - h), rng.integers(0, SIZE - w)
    m = np.zeros((SIZE, SIZE), bool)
    m[y:y + h, x:x + w] = True
    return m


def triangle(rng):
    base_y = rng.uniform(24, 44)
    cx, half = rng.uniform(16, 48), rng.uniform(8, 16)
    height = rng.uniform(12, 20)
    return (yy <= base_y) & (yy >= base_y - height * (1 - np.abs(xx - cx) / half))


def paint(cells, mask, inst, keep_small=True):
    cells[mask] = inst
    if keep_small and not mask.any():
        raise RuntimeError("empty primitive")


def scene(name, prompt, instances, cells, k=2, beta=1.0):
    pnm.write(OUT / f"{name}.pgm", pnm.encode_pgm(cells))
    doc = {
        "name": name,
        "prompt": prompt,
        "instances": [{"word": w, "id": i} for w, i in instances],
        "sketch": f"{name}.pgm",
        "context_length": 77,
        "embedding": {"mode": "synthetic", "seed": 0, "dim": 64},
        "k": k,
        "beta": beta,
        "dense": {"strength": 2.5, "gamma": 2.0},
        "timesteps": 8,
        "seed": 0,
    }
    (OUT / f"{name}.json").write_text(json.dumps(doc, indent=2) + "\n", "utf-8")


def default_scene():
    cells = np.full((SIZE, SIZE), 1, np.uint8)  # plain everywhere
    cells[triangle(np.random.default_rng(3))] = 4  # mountain
    cells[np.abs(yy - (44 + 5 * np.sin(xx / 7.0))) < 3.5] = 3  # river
    cells[(np.abs(xx - yy * 0.5 - 30) < 1.0) & (yy > 8)] = 2  # walk path
    cells[50:53, 10:14] = 5  # houses
    cells[12:14, 52:55] = 5
    cells[:4, :] = 0
    scene(
        "default",
        "Isometric view of game scene, a plain, walk path, a river, a high mountain, houses.",
        [("plain", 1), ("path", 2), ("river", 3), ("mountain", 4), ("houses", 5)],
        cells,
    )


def corpus():
    rng = np.random.default_rng(20241016)
    for s in range(1, 21):
        terrain = TERRAINS[(s - 1) % len(TERRAINS)]
        big = list(rng.choice(BIG, size=2, replace=False))
        small = list(rng.choice(SMALL, size=int(rng.integers(2, 4)), replace=False))
        words = [terrain] + big + small
        cells = np.full((SIZE, SIZE), 1, np.uint8)
        inst = 2
        for w in big:
            m = band(rng, rng.uniform(2.5, 5)) if w in ("river", "road", "canyon", "valley") \
                else blob(rng, 8, 16)
            paint(cells, m, inst)
            inst += 1
        for w in small:
            m = box(rng, 1, 4) if rng.random() < 0.5 else blob(rng, 1.2, 3.5)
            paint(cells, m, inst)
            inst += 1
        if rng.random() < 0.5:
            cells[: int(rng.integers(2, 8)), :] = 0  # sky strip
        # a later primitive can cover an earlier one completely; skip such layouts
        present = [i for i in range(1, len(words) + 1) if (cells == i).any()]
        if len(present) != len(words):
            raise RuntimeError(f"scene {s}: instance fully covered")
        parts = [f"a {terrain}" if terrain != "city" else "a city"]
        for w in big:
            parts.append(f"{MODIFIERS[w]} {w}")
        parts += [w if w.endswith("s") else f"a {w}" for w in small]
        prompt = "Isometric view of a game scene, " + ", ".join(parts) + "."
        scene(f"scene_{s:02d}", prompt, [(w, i + 1) for i, w in enumerate(words)], cells)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    default_scene()
    corpus()
