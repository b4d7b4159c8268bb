"""Command-line entry point: ``sdftopo <subcommand> ...``.

Exit codes: 0 success, 1 invalid arguments or inputs, 2 file I/O or image
decoding failure. Every JSON document written to stdout or disk carries a
``manifest`` block (subcommand, inputs, resolved config, version, seed) and
all floats in it are rounded to 9 significant digits. Keys are sorted.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cubical import DIRECTIONS, diagram_to_csv, persistence_diagram
from .distance import sdf
from .fixtures import KINDS as FIXTURE_KINDS
from .fixtures import gen_fixture
from .grid import KINDS as IMAGE_KINDS
from .grid import binarize, load_image, save_image, write_field
from .metrics import CSV_COLUMNS, evaluate
from .oracles import SUITES, run_suite
from .refine import (AdapterParams, RefineConfig, summarize,
                     two_stage_run)
from .topo_loss import LossConfig, combined_loss

LOSS_NAMES = {"wm": "wasserstein", "bm": "betti"}
RNG_NAME = "numpy.random.PCG64"


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x):
    """Round floats to 9 significant digits; non-finite values become strings."""
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.9g}")
    return x


def dumps(doc: dict) -> str:
    return json.dumps(_num(doc), sort_keys=True, indent=2) + "\n"


def manifest(subcommand: str, inputs, config: dict, seed: int | None = None) -> dict:
    return {
        "subcommand": subcommand,
        "inputs": [str(p) for p in inputs],
        "config": config,
        "version": __version__,
        "seed": seed,
        "rng": RNG_NAME,
    }


def _emit(doc: dict, out) -> None:
    out.write(dumps(doc))


# ---------------------------------------------------------------------------
# subcommands


def cmd_sdf(args, out):
    mask = load_image(args.mask, "mask")
    field = sdf(mask)
    write_field(args.output, field)
    if args.png:
        lo, hi = float(field.min()), float(field.max())
        vis = (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)
        save_image(args.png, vis, "likelihood")
    _emit({
        "manifest": manifest("sdf", [args.mask], {"output": args.output, "png": args.png}),
        "height": field.shape[0], "width": field.shape[1],
        "min": float(field.min()), "max": float(field.max()),
    }, out)


def cmd_diagram(args, out):
    img = load_image(args.image, args.kind)
    dgm = persistence_diagram(img, args.direction)
    text = diagram_to_csv(dgm)
    if args.output is None:
        out.write(text)
        return
    Path(args.output).write_text(text)
    counts = [len(dgm.in_dim(d)) for d in (0, 1)]
    _emit({
        "manifest": manifest("diagram", [args.image],
                             {"direction": args.direction, "kind": args.kind,
                              "output": args.output}),
        "pairs_dim0": counts[0], "pairs_dim1": counts[1],
    }, out)


def _loss_config(args) -> LossConfig:
    dims = tuple(int(d) for d in args.dims.split(",") if d.strip())
    return LossConfig(alpha=args.alpha, padding_width=args.pad, dims=dims,
                      loss_kind=LOSS_NAMES[args.kind])


def cmd_loss(args, out):
    cfg = _loss_config(args)
    pred = load_image(args.pred, "likelihood")
    gt = load_image(args.gt, "mask")
    lg = combined_loss(pred, gt, cfg)
    if args.grad_out:
        write_field(args.grad_out, lg.grad)
    _emit({
        "manifest": manifest("loss", [args.pred, args.gt],
                             {**asdict(cfg), "grad_out": args.grad_out}),
        "value": lg.value,
        "dice_term": lg.terms["dice_term"],
        "topo_term": lg.terms["topo_term"],
        "grad_l1_norm": float(np.abs(lg.grad).sum()),
        "n_matched": lg.terms["n_matched"],
        "n_diagonal": lg.terms["n_diagonal"],
    }, out)


def cmd_metrics(args, out):
    pred = binarize(load_image(args.pred, "likelihood"), args.threshold)
    gt = load_image(args.gt, "mask")
    report = evaluate(pred, gt).as_dict()
    if args.csv:
        if args.header:
            out.write(",".join(CSV_COLUMNS) + "\n")
        out.write(",".join(format(report[c], ".9g") if isinstance(report[c], float)
                           else str(report[c]) for c in CSV_COLUMNS) + "\n")
        return
    _emit({"manifest": manifest("metrics", [args.pred, args.gt],
                                {"threshold": args.threshold}),
           **report}, out)


def cmd_refine(args, out):
    loss = LossConfig(alpha=args.alpha, loss_kind=LOSS_NAMES[args.loss])
    warm = "sdf" if args.warm == "both" else args.warm
    cfg = RefineConfig(learning_rate=args.lr, stage1_iters=args.iters1,
                       stage2_iters=args.iters2, loss=loss, seed=args.seed, warm_start=warm)
    params = AdapterParams(args.scale, args.bias)
    if not params.scale > 0:
        raise ValueError("--scale must be positive")
    noisy = load_image(args.noisy, "mask")
    gt = load_image(args.gt, "mask")
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    config = {**asdict(cfg), "warm": args.warm, "adapter_init": asdict(params)}
    doc = {"manifest": manifest("refine", [args.noisy, args.gt], config, args.seed)}
    modes = ("sdf", "cold") if args.warm == "both" else (warm,)
    for mode in modes:
        trace = two_stage_run(noisy, gt, replace(cfg, warm_start=mode), params)
        suffix = f"_{mode}" if len(modes) > 1 else ""
        save_image(outdir / f"mask{suffix}.png", binarize(trace.likelihood, 0.5), "mask")
        (outdir / f"trace{suffix}.csv").write_text(trace.to_csv())
        doc[mode] = summarize(trace, gt)
    (outdir / "summary.json").write_text(dumps(doc))
    _emit(doc, out)


def cmd_oracle(args, out):
    report = run_suite(args.suite, args.n, args.size, args.seed)
    for name, row in report.items():
        out.write(f"{row['status']} {name} n={row['n']} size={row['size']}\n")
    if args.json:
        doc = {"manifest": manifest("oracle", [], {"suite": args.suite, "n": args.n,
                                                   "size": args.size}, args.seed),
               "suites": {k: {"status": v["status"], "n": v["n"], "size": v["size"]}
                          for k, v in report.items()}}
        Path(args.json).write_text(dumps(doc))
    return 0 if all(r["status"] == "PASS" for r in report.values()) else 1


def cmd_gen(args, out):
    mask = gen_fixture(args.kind, args.size, args.seed, args.cells)
    save_image(args.output, mask, "mask")
    _emit({"manifest": manifest("gen", [], {"kind": args.kind, "size": args.size,
                                            "cells": args.cells, "output": args.output},
                                args.seed)}, out)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdftopo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sdf", help="signed distance field of a mask")
    s.add_argument("mask", help="binary mask image (0/255)")
    s.add_argument("output", help="output SDF1 raw float file")
    s.add_argument("--png", help="also write a linearly rescaled PNG (visualisation only)")
    s.set_defaults(func=cmd_sdf)

    s = sub.add_parser("diagram", help="cubical persistence diagram as CSV")
    s.add_argument("image")
    s.add_argument("--direction", choices=DIRECTIONS, default="sublevel")
    s.add_argument("--kind", choices=IMAGE_KINDS, default="grayscale-image",
                   help="how pixel values are read (raw 0..255, mask 0/1, likelihood /255)")
    s.add_argument("-o", "--output", help="write CSV here instead of stdout")
    s.set_defaults(func=cmd_diagram)

    s = sub.add_parser("loss", help="combined Dice + topology loss of pred vs gt")
    s.add_argument("pred", help="likelihood image (value/255)")
    s.add_argument("gt", help="binary mask image (0/255)")
    s.add_argument("--kind", choices=sorted(LOSS_NAMES), default="wm")
    s.add_argument("--alpha", type=float, default=0.9, help="Dice weight in [0, 1]")
    s.add_argument("--pad", type=int, default=2, help="foreground frame width (0 or 2)")
    s.add_argument("--dims", default="0,1", help="comma-separated homology dimensions")
    s.add_argument("--grad-out", help="write the gradient as an SDF1 raw float file")
    s.set_defaults(func=cmd_loss)

    s = sub.add_parser("metrics", help="Dice, IoU, PA, clDice, VoI and Betti error")
    s.add_argument("pred")
    s.add_argument("gt")
    s.add_argument("--threshold", type=float, default=0.5,
                   help="binarise pred (value/255) at this level")
    s.add_argument("--csv", action="store_true",
                   help="print one CSV row: " + ",".join(CSV_COLUMNS))
    s.add_argument("--header", action="store_true", help="with --csv, print the header too")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("refine", help="two-stage refinement of a noisy mask")
    s.add_argument("noisy")
    s.add_argument("gt")
    s.add_argument("outdir")
    s.add_argument("--loss", choices=sorted(LOSS_NAMES), default="wm")
    s.add_argument("--alpha", type=float, default=0.9)
    s.add_argument("--warm", choices=("sdf", "cold", "both"), default="sdf")
    s.add_argument("--iters1", type=int, default=200)
    s.add_argument("--iters2", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scale", type=float, default=1.0, help="initial adapter scale")
    s.add_argument("--bias", type=float, default=0.0, help="initial adapter bias (threshold)")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("oracle", help="cross-check the engines against brute force")
    s.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    s.add_argument("--n", type=int, default=20)
    s.add_argument("--size", type=int, default=6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--json", help="also write the report as JSON")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("gen", help="write a synthetic fixture mask")
    s.add_argument("kind", choices=FIXTURE_KINDS)
    s.add_argument("--size", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cells", type=int, default=3, help="grid fixture: cells per side")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        code = args.func(args, out)
        return 0 if code is None else code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
