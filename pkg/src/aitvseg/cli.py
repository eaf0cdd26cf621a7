"""Command-line driver: ``aitvseg {phantom,degrade,segment,evaluate,experiment}``.

Exit codes: 0 success, 2 usage, 3 bad data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .degrade import DegradeSpec, degrade, normalize_01
from .errors import AitvSegError, DataError, ParameterError
from .experiment import (
    DETERMINISTIC_TABLES,
    METHODS,
    experiment_tables,
    rows_to_csv,
    run_experiment,
)
from .io import (
    atomic_write_text,
    read_image,
    read_json,
    read_matrix,
    write_image,
    write_json,
    write_label_png,
    write_matrix,
)
from .metrics import apply_permutation, dice, match_labels, psnr
from .phantoms import PHANTOMS, REGION_NAMES
from .segment import sat_pipeline, slat_pipeline, thread_count
from .solver import AdmmConfig, trace_to_csv
from .spectral import parse_kernel

log = logging.getLogger("aitvseg")

# defaults per method family; grayscale follows the brain settings, colour the colour ones
SEGMENT_DEFAULTS = {
    "sat": {"lam": 4.0, "mu": 1.0, "alpha": 0.6},
    "slat": {"lam": 1.5, "mu": 0.05, "alpha": 0.6},
}


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


# --------------------------------------------------------------------------- phantom


def cmd_phantom(args) -> int:
    img, labels, values = PHANTOMS[args.kind](seed=args.seed)
    out = Path(args.output)
    write_image(out, img * 255.0 if args.kind == "color" and out.suffix.lower() != ".txt" else img)
    if args.labels:
        write_matrix(args.labels, labels)
    write_json(
        _sidecar(out),
        {"kind": args.kind, "seed": args.seed, "shape": list(img.shape), "values": values,
         "regions": REGION_NAMES[args.kind], "version": __version__},
    )
    log.info("wrote %s", out)
    return 0


# --------------------------------------------------------------------------- degrade


def cmd_degrade(args) -> int:
    g = read_image(args.input)
    blur = parse_kernel(args.blur)
    spec = DegradeSpec(args.peak, blur, args.seed, args.stream)
    f = degrade(g, spec)
    _, scale = normalize_01(f)
    out = Path(args.output)
    write_image(out, f)
    write_json(
        _sidecar(out),
        {"input": str(args.input), "peak": args.peak, "blur": blur.name, "seed": args.seed,
         "stream": args.stream, "source_max": float(np.max(g)), "normalize_scale": scale,
         "version": __version__},
    )
    log.info("wrote %s (max count %g)", out, scale)
    return 0


# --------------------------------------------------------------------------- segment


def _segment_config(args, family: str) -> dict:
    params = dict(SEGMENT_DEFAULTS[family])
    if args.config:
        cfg = read_json(args.config)
        params.update({k: v for k, v in cfg.items() if k in ("lam", "mu", "alpha", "beta0", "sigma", "eps", "max_iter", "K", "seed", "restarts")})
    for key in ("lam", "mu", "alpha", "beta0", "sigma", "eps", "max_iter", "K", "seed", "restarts"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    return params


def cmd_segment(args) -> int:
    f_raw = read_image(args.input)
    family = "sat" if f_raw.ndim == 2 else "slat"
    method = args.method or ("aitv-" + family)
    mode, kind = METHODS[method]
    if kind != family:
        raise ParameterError(f"method {method} needs a {'grayscale' if kind == 'sat' else 'colour'} image")
    params = _segment_config(args, family)
    K = int(params.pop("K", 2))
    seed = int(params.pop("seed", 0))
    restarts = int(params.pop("restarts", 10))
    if mode == "iso" and "alpha" in params:
        log.info("method %s ignores alpha=%g", method, params["alpha"])
        params.pop("alpha")
    cfg = AdmmConfig(mode=mode, record_trace=True, **params)
    blur = parse_kernel(args.blur)

    f, scale = normalize_01(f_raw)
    t0 = time.perf_counter()
    pipe = sat_pipeline if kind == "sat" else slat_pipeline
    res = pipe(f, blur, cfg, K, seed=seed, restarts=restarts)
    wall = time.perf_counter() - t0

    out = Path(args.outdir)
    u_star = res.u_star * scale
    f_tilde = res.f_tilde * scale
    write_matrix(out / "u_star.txt", u_star)
    write_matrix(out / "f_tilde.txt", f_tilde)
    write_matrix(out / "labels.txt", res.segmentation.labels)
    write_label_png(out / "labels.png", res.segmentation.labels, K)
    hi = float(np.max(f_raw))
    write_image(out / "u_star.png", u_star, vmin=0.0, vmax=hi)
    write_image(out / "f_tilde.png", f_tilde, vmin=0.0, vmax=hi)
    write_json(out / "centroids.json", {"K": K, "feature_dim": res.segmentation.d,
                                         "centroids": res.segmentation.centroids})
    if len(res.smooth) == 1:
        atomic_write_text(out / "trace.csv", trace_to_csv(res.smooth[0].trace))
    else:
        for c, r in enumerate(res.smooth):
            atomic_write_text(out / f"trace_ch{c + 1}.csv", trace_to_csv(r.trace))
    write_json(
        out / "manifest.json",
        {
            "input": str(args.input), "method": method, "blur": blur.name, "K": K,
            "kmeans_seed": seed, "restarts": restarts, "normalize_scale": scale,
            "solver": {"lam": cfg.lam, "mu": cfg.mu, "alpha": cfg.alpha if mode == "aitv" else None,
                       "beta0": cfg.beta0, "sigma": cfg.sigma, "eps": cfg.eps, "max_iter": cfg.max_iter,
                       "mode": mode},
            "iterations": [r.iterations for r in res.smooth],
            "converged": [bool(r.converged) for r in res.smooth],
            "wall_time_sec": wall, "backend": kernels.BACKEND_NAME, "version": __version__,
        },
    )
    log.info("%s: %d iterations, wrote %s", method, max(r.iterations for r in res.smooth), out)
    return 0


# --------------------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    pred = read_matrix(args.pred).astype(np.int64) if args.pred else None
    rows_dice, rows_psnr = [], []
    runtime = ""
    if args.manifest:
        runtime = read_json(args.manifest).get("wall_time_sec", "")

    if args.gt:
        if pred is None:
            raise ParameterError("--gt needs --pred")
        gt = read_matrix(args.gt).astype(np.int64)
        if gt.shape != pred.shape:
            raise DataError(f"prediction shape {pred.shape} does not match ground truth {gt.shape}")
        K = args.K or int(max(gt.max(), pred.max()))
        if args.match == "greedy":
            pred = apply_permutation(pred, match_labels(pred, gt, K))
        names = args.regions.split(",") if args.regions else [f"region{k}" for k in range(1, K + 1)]
        for k in range(1, K + 1):
            region = names[k - 1] if k - 1 < len(names) else f"region{k}"
            rows_dice.append((args.image_id, args.method, region, dice(gt == k, pred == k)))

    if args.f_tilde and args.clean:
        ft = read_image(args.f_tilde)
        g = read_image(args.clean)
        if ft.shape != g.shape:
            raise DataError(f"f_tilde shape {ft.shape} does not match clean image {g.shape}")
        ft = ft * args.rescale
        P = args.peak_ref if args.peak_ref else float(np.max(g))
        rows_psnr.append((args.image_id, args.method, psnr(g, ft, P, "paper"), psnr(g, ft, P, "standard"), runtime))

    if not rows_dice and not rows_psnr:
        raise ParameterError("nothing to evaluate: give --pred/--gt and/or --f-tilde/--clean")
    dice_csv = rows_to_csv(("image", "method", "region", "dice"), rows_dice)
    psnr_csv = rows_to_csv(("image", "method", "psnr_paper", "psnr_standard", "runtime_sec"), rows_psnr)
    if args.outdir:
        out = Path(args.outdir)
        if rows_dice:
            atomic_write_text(out / "dice.csv", dice_csv)
        if rows_psnr:
            atomic_write_text(out / "psnr.csv", psnr_csv)
    else:
        if rows_dice:
            sys.stdout.write(dice_csv)
        if rows_psnr:
            sys.stdout.write(psnr_csv)
    return 0


# --------------------------------------------------------------------------- experiment


def cmd_experiment(args) -> int:
    config = read_json(args.config)
    for key in ("noise_seeds", "K", "kmeans_seed", "restarts"):
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    workers = args.workers if args.workers is not None else thread_count()
    t0 = time.perf_counter()
    cells, results = run_experiment(config, workers=workers)
    tables = experiment_tables(cells, results)
    out = Path(args.outdir)
    for name, text in tables.items():
        atomic_write_text(out / name, text)
    write_json(out / "manifest.json", {"config": config, "cells": len(cells), "version": __version__,
                                        "deterministic_tables": list(DETERMINISTIC_TABLES)})
    n_fail = sum(1 for r in results if r["error"])
    log.info("%d cells, %d failed, %.1f s", len(cells), n_fail, time.perf_counter() - t0)
    for r in results:
        if r["error"]:
            log.warning("cell failed: %s", r["error"])
    return 0


# --------------------------------------------------------------------------- parser


def _add_solver_flags(p):
    g = p.add_argument_group("model and solver (override --config)")
    g.add_argument("--lam", type=float, help="fidelity weight")
    g.add_argument("--mu", type=float, help="quadratic gradient weight")
    g.add_argument("--alpha", type=float, help="weight of the isotropic term in [0, 1]")
    g.add_argument("--beta0", type=float, help="initial penalty")
    g.add_argument("--sigma", type=float, help="penalty growth factor (> 1)")
    g.add_argument("--eps", type=float, help="stopping tolerance on the relative change of u")
    g.add_argument("--max-iter", dest="max_iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aitvseg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"aitvseg {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write a synthetic test image")
    s.add_argument("--kind", choices=sorted(PHANTOMS), required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", required=True, help=".png (quantised) or .txt (exact)")
    s.add_argument("--labels", help="also write the ground-truth label matrix here")
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("degrade", help="scale to a peak, blur, add Poisson noise")
    s.add_argument("--input", required=True)
    s.add_argument("--peak", type=float, required=True, help="maximum mean intensity before sampling")
    s.add_argument("--blur", default="identity", help="identity | gaussian:RxC:sigma | motion:len:angle")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0, help="independent noise stream id (e.g. image index)")
    s.add_argument("--output", required=True)
    s.set_defaults(func=cmd_degrade)

    s = sub.add_parser("segment", help="smooth and cluster one image")
    s.add_argument("--input", required=True)
    s.add_argument("--method", choices=sorted(METHODS), help="default: aitv-sat for gray, aitv-slat for colour")
    s.add_argument("--blur", default="identity")
    s.add_argument("--K", type=int, help="number of regions (default 2)")
    s.add_argument("--seed", type=int, help="k-means seed (default 0)")
    s.add_argument("--restarts", type=int)
    s.add_argument("--config", help="JSON with any of lam, mu, alpha, beta0, sigma, eps, max_iter, K, seed")
    s.add_argument("--outdir", required=True)
    _add_solver_flags(s)
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("evaluate", help="DICE and PSNR against ground truth")
    s.add_argument("--pred", help="predicted label matrix (.txt)")
    s.add_argument("--gt", help="ground-truth label matrix (.txt)")
    s.add_argument("--K", type=int)
    s.add_argument("--match", choices=("identity", "greedy"), default="identity",
                   help="identity for intensity-ordered labels, greedy max-DICE otherwise")
    s.add_argument("--regions", help="comma-separated region names for labels 1..K")
    s.add_argument("--f-tilde", dest="f_tilde", help="piecewise-constant reconstruction")
    s.add_argument("--clean", help="clean reference image")
    s.add_argument("--rescale", type=float, default=1.0, help="factor mapping f_tilde into clean units")
    s.add_argument("--peak-ref", dest="peak_ref", type=float, help="P in the PSNR formula (default max clean)")
    s.add_argument("--manifest", help="segment manifest supplying runtime_sec")
    s.add_argument("--image-id", dest="image_id", default="image")
    s.add_argument("--method", default="unknown")
    s.add_argument("--outdir", help="write CSVs here instead of stdout")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment", help="batch of images x cases x seeds x methods")
    s.add_argument("--config", required=True)
    s.add_argument("--outdir", required=True)
    s.add_argument("--workers", type=int, help="worker processes (default AITVSEG_THREADS or 1)")
    s.add_argument("--noise-seeds", dest="noise_seeds", type=int, nargs="+")
    s.add_argument("--K", type=int)
    s.add_argument("--kmeans-seed", dest="kmeans_seed", type=int)
    s.add_argument("--restarts", type=int)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except AitvSegError as exc:
        print(f"aitvseg {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"aitvseg {args.command}: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
