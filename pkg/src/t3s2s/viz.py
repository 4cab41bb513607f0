"""Heatmap PGMs, CSV tables and output bundles."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import pnm
from .errors import IOFailure, NumericError
from .pipeline import RunReport


def heatmap_bytes(values: np.ndarray, shape: tuple[int, int]) -> bytes:
    """Min-max normalize to 0..255 as a P5 PGM; a constant map renders as 128."""
    v = np.asarray(values, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(v)):
        raise NumericError("heatmap values must be finite")
    lo, hi = v.min(), v.max()
    if hi == lo:
        img = np.full(shape, 128, dtype=np.uint8)
    else:
        img = np.floor((v - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)
    return pnm.encode_pgm(img)


def render_heatmap(values: np.ndarray, shape: tuple[int, int], path: str | Path) -> None:
    pnm.write(path, heatmap_bytes(values, shape))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip form
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IOFailure(f"cannot create {path}: {exc}") from exc
    return path


def histogram_rows(report: RunReport) -> list[tuple]:
    rows = []
    for rank in range(report.histogram.shape[0]):
        for i in range(1, report.i_end):
            rows.append((rank + 1, i, report.tokens[i], int(report.histogram[rank, i])))
    return rows


def write_bundle(report: RunReport, out: Path, previews: int = 5) -> list[Path]:
    """Write report.json, topk_hist.csv, final-step attention heatmaps and mask previews."""
    ensure_dir(out)
    written = []
    p = out / "report.json"
    write_text(p, json.dumps(report.to_json(), indent=2) + "\n")
    written.append(p)
    p = out / "topk_hist.csv"
    write_text(p, csv_text(("rank", "index", "token", "count"), histogram_rows(report)))
    written.append(p)

    step = report.scene["timesteps"] - 1
    for lay in report.layers:
        m, shape = lay["index"], (lay["h"], lay["w"])
        A = report.final_attention[m]
        for tok in range(report.i_end + 1):
            p = out / f"attn_L{m}_t{step}_tok{tok}.pgm"
            render_heatmap(A[:, tok], shape, p)
            written.append(p)
        H = report.final_enhancement[m]
        activity = H.sum(axis=0)
        # strongest channels first, ties by channel index
        order = np.lexsort((np.arange(H.shape[1]), -activity))
        for j in order[:previews]:
            if activity[j] == 0:
                break
            p = out / f"hmask_L{m}_t{step}_ch{int(j)}.pgm"
            render_heatmap(H[:, j], shape, p)
            written.append(p)
    return written
