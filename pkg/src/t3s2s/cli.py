"""Command-line front end.

    t3s2s analyze-prompt --scene S --out DIR
    t3s2s run            --scene S --out DIR [--seed N] [--disable pb,cp,dt]
    t3s2s ablate         --scene S --out DIR [--seed N]
    t3s2s probe-topk     --scene S --out DIR [--seed N] [--k-list 0,1,2] [--factor 2]

Exit codes: 0 ok, 1 configuration, 2 I/O, 3 non-finite numerics.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from .errors import ConfigError, IOFailure, NumericError, T3S2SError
from .pipeline import VARIANTS, ablation_matrix, prepare, run, topk_probe
from .prompt import cosine_profile, embed_word, energy_profile
from .scene import load_scene
from .viz import csv_text, ensure_dir, write_bundle, write_text

log = logging.getLogger("t3s2s")

EXIT_CODES = ((NumericError, 3), (IOFailure, 2), (ConfigError, 1))


def _split_list(values: list[str] | None) -> list[str]:
    out = []
    for v in values or []:
        out += [p.strip() for p in v.split(",") if p.strip()]
    return out


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def cmd_analyze_prompt(args) -> int:
    scene = load_scene(args.scene)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prep = prepare(scene, pb=True, seed=args.seed)
    for w in caught:
        log.warning("%s", w.message)
    provider = scene.provider()
    out = ensure_dir(Path(args.out))
    tokens, i_end = prep.tokens, prep.tokens.i_end

    header = ("index", "token", "value")
    write_text(out / "energy.csv", csv_text(
        header, [(i, tokens.token(i), v) for i, v in energy_profile(prep.S_g, i_end)]))
    single = []
    for i in range(i_end + 1):
        tok = tokens.token(i)
        vec = embed_word(tok, provider) if 0 < i < i_end else prep.S_g.rows[i]
        single.append((i, tok, float((vec @ vec) ** 0.5)))
    write_text(out / "energy_single.csv", csv_text(header, single))
    write_text(out / "energy_balanced.csv", csv_text(
        header, [(i, tokens.token(i), v) for i, v in energy_profile(prep.S_b, i_end)]))
    if not len(prep.q):
        log.warning("no keywords: cosine.csv has a header only")
    write_text(out / "cosine.csv", csv_text(
        header, [(i, tokens.token(i), v) for i, v in cosine_profile(prep.S_g, prep.q, provider)]))
    return 0


def cmd_run(args) -> int:
    scene = load_scene(args.scene)
    disabled = set(_split_list(args.disable))
    unknown = disabled - {"pb", "cp", "dt"}
    if unknown:
        raise ConfigError(f"--disable: unknown module(s) {sorted(unknown)}")
    report = run(scene, pb="pb" not in disabled, cp="cp" not in disabled,
                 dt="dt" not in disabled, seed=args.seed)
    write_bundle(report, Path(args.out))
    print(report.digest)
    return 0


def cmd_ablate(args) -> int:
    scene = load_scene(args.scene)
    out = ensure_dir(Path(args.out))
    rows = []
    for name, report in ablation_matrix(scene, seed=args.seed):
        write_bundle(report, out / name.replace("+", "_"))
        for inst, s in report.instance_summary().items():
            rows.append((name, inst, s["word"], s["area"], s["in_mask"], s["out_mask"]))
    write_text(out / "ablation.csv", csv_text(
        ("variant", "instance", "word", "area", "in_mask", "out_mask"), rows))
    return 0


def cmd_probe_topk(args) -> int:
    scene = load_scene(args.scene)
    out = ensure_dir(Path(args.out))
    table = topk_probe(scene, args.k_list, args.factor, seed=args.seed)
    prep = prepare(scene, pb=False, seed=args.seed)
    words = dict(zip(prep.q.ids, prep.q.words))
    rows = [(inst, words[inst], *[table[K][inst] for K in args.k_list]) for inst in prep.q.ids]
    header = ("instance", "word", *[f"k{K}" for K in args.k_list])
    write_text(out / "probe.csv", csv_text(header, rows))
    return 0


COMMANDS = {
    "analyze-prompt": cmd_analyze_prompt,
    "run": cmd_run,
    "ablate": cmd_ablate,
    "probe-topk": cmd_probe_topk,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="t3s2s", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.add_argument("--disable", nargs="*", default=[], metavar="MOD",
                   help="modules to disable: pb, cp, dt (comma or space separated)")
    p.add_argument("--k-list", type=_int_list, default=[0, 1, 2, 3, 4])
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except T3S2SError as exc:
        for cls, code in EXIT_CODES:
            if isinstance(exc, cls):
                log.error("%s", exc)
                return code
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
