"""Batch runs over images x degradation cases x noise seeds x methods.

A config is a JSON object::

    {
      "images": [{"phantom": "drive", "seed": 0},
                 {"id": "mine", "clean": "g.png", "labels": "gt.txt"}],
      "P": 255,                        # optional; default max of each clean image
      "cases": ["P/2", "P/5", {"name": "P/2+gaussian:10x10:2",
                                "methods": {"aitv-sat": {"lam": 22.5, "mu": 0.25, "alpha": 0.3}}}],
      "noise_seeds": [0, 1, 2, 3, 4],
      "methods": {"aitv-sat": {"lam": 14.5, "mu": 0.5, "alpha": 0.4},
                  "tv-sat": {"lam": 14.5, "mu": 0.5}},
      "K": 2, "kmeans_seed": 0, "restarts": 10,
      "solver": {"beta0": 1.0, "sigma": 1.25, "eps": 1e-4, "max_iter": 300}
    }

Shorthand: ``"phantom": "brain", "phantom_seeds": [0, 1]`` instead of
``images``. A case is ``<peak>[+<blur>]`` where ``<peak>`` is ``P``,
``P/<d>`` or a number and ``<blur>`` is any :func:`parse_kernel` spec.
"""

from __future__ import annotations

import csv
import io
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .degrade import DegradeSpec, degrade, normalize_01
from .errors import AitvSegError, DataError, ParameterError
from .metrics import apply_permutation, dice, match_labels, psnr
from .phantoms import PHANTOMS, REGION_NAMES
from .segment import sat_pipeline, slat_pipeline
from .solver import AdmmConfig
from .spectral import parse_kernel

__all__ = [
    "METHODS",
    "Case",
    "parse_case",
    "load_images",
    "expand_cells",
    "run_cell",
    "run_experiment",
    "aggregate",
    "rows_to_csv",
    "experiment_tables",
    "DETERMINISTIC_TABLES",
]

METHODS = {
    "aitv-sat": ("aitv", "sat"),
    "tv-sat": ("iso", "sat"),
    "aitv-slat": ("aitv", "slat"),
    "tv-slat": ("iso", "slat"),
}
SOLVER_KEYS = ("beta0", "sigma", "eps", "max_iter")
PARAM_KEYS = ("lam", "mu", "alpha")

_PEAK_RE = re.compile(r"^(?:P(?:/([0-9.eE+-]+))?|([0-9.eE+-]+))$")


@dataclass(frozen=True)
class Case:
    name: str
    peak_divisor: float | None  # peak = P / divisor when set
    peak_value: float | None  # absolute peak otherwise
    blur: str

    def peak(self, P: float) -> float:
        return P / self.peak_divisor if self.peak_divisor is not None else self.peak_value


def parse_case(spec: str) -> Case:
    """``P/2``, ``P``, ``10`` or any of those followed by ``+<blur spec>``."""
    name = spec.strip()
    head, _, blur = name.partition("+")
    m = _PEAK_RE.match(head.strip())
    if not m:
        raise ParameterError(f"bad case {spec!r}: peak must be P, P/<d> or a number")
    div = rel = None
    if m.group(2) is not None:
        rel = float(m.group(2))
        if not rel > 0:
            raise ParameterError(f"bad case {spec!r}: peak must be positive")
    else:
        div = float(m.group(1)) if m.group(1) else 1.0
        if not div > 0:
            raise ParameterError(f"bad case {spec!r}: divisor must be positive")
    blur = blur.strip() or "identity"
    parse_kernel(blur)  # validate early
    return Case(name, div, rel, blur)


def load_images(config: dict) -> list[dict]:
    """Resolve the image list to ``{id, clean, labels, region_names}`` entries."""
    from .io import read_image, read_matrix

    entries = config.get("images")
    if entries is None and "phantom" in config:
        seeds = config.get("phantom_seeds", [0])
        entries = [{"phantom": config["phantom"], "seed": s} for s in seeds]
    if not entries:
        raise ParameterError("config needs 'images' or 'phantom'")
    out = []
    for i, e in enumerate(entries):
        if "phantom" in e:
            kind = e["phantom"]
            if kind not in PHANTOMS:
                raise ParameterError(f"unknown phantom {kind!r}; choose from {sorted(PHANTOMS)}")
            seed = int(e.get("seed", 0))
            img, labels, _ = PHANTOMS[kind](seed=seed)
            out.append(
                {"id": e.get("id", f"{kind}{seed}"), "clean": img, "labels": labels,
                 "region_names": REGION_NAMES[kind]}
            )
        else:
            if "clean" not in e:
                raise ParameterError(f"image entry {i} needs 'phantom' or 'clean'")
            img = read_image(e["clean"])
            labels = read_matrix(e["labels"]).astype(np.int64) if e.get("labels") else None
            K = int(labels.max()) if labels is not None else 0
            out.append(
                {"id": e.get("id", f"image{i}"), "clean": img, "labels": labels,
                 "region_names": tuple(e.get("regions", [f"region{k}" for k in range(1, K + 1)]))}
            )
    ids = [o["id"] for o in out]
    if len(set(ids)) != len(ids):
        raise ParameterError(f"image ids must be unique, got {ids}")
    return out


def _case_entries(config):
    cases = config.get("cases", ["P"])
    out = []
    for c in cases:
        if isinstance(c, str):
            out.append((parse_case(c), {}))
        else:
            out.append((parse_case(c["name"]), c.get("methods", {})))
    return out


def expand_cells(config: dict, images: list[dict]) -> list[dict]:
    """One dict per (image, case, noise seed, method), in a fixed order."""
    methods = config.get("methods")
    if not methods:
        raise ParameterError("config needs a non-empty 'methods' object")
    for name in methods:
        if name not in METHODS:
            raise ParameterError(f"unknown method {name!r}; choose from {sorted(METHODS)}")
    solver = {k: config["solver"][k] for k in SOLVER_KEYS if k in config.get("solver", {})}
    K = int(config.get("K", 2))
    cells = []
    for stream, img in enumerate(images):
        P = float(config.get("P", np.max(img["clean"])))
        for case, overrides in _case_entries(config):
            for seed in config.get("noise_seeds", [0]):
                for name in methods:
                    params = dict(methods[name])
                    params.update(overrides.get(name, {}))
                    cells.append(
                        {
                            "image": f"{img['id']}|{case.name}|{int(seed)}",
                            "image_index": stream,
                            "method": name,
                            "peak": case.peak(P),
                            "P": P,
                            "blur": case.blur,
                            "noise_seed": int(seed),
                            "params": {k: params[k] for k in PARAM_KEYS if k in params},
                            "solver": solver,
                            "K": K,
                            "kmeans_seed": int(config.get("kmeans_seed", 0)),
                            "restarts": int(config.get("restarts", 10)),
                        }
                    )
    return cells


def run_cell(cell: dict, image: dict) -> dict:
    """Degrade, segment and score one cell; errors are captured, not raised."""
    t0 = time.perf_counter()
    try:
        mode, kind = METHODS[cell["method"]]
        g = np.asarray(image["clean"], dtype=np.float64)
        if (kind == "sat") != (g.ndim == 2):
            raise DataError(f"method {cell['method']} does not apply to an image of shape {g.shape}")
        blur = parse_kernel(cell["blur"])
        spec = DegradeSpec(cell["peak"], blur, cell["noise_seed"], cell["image_index"])
        f, scale = normalize_01(degrade(g, spec))
        params = dict(cell["params"])
        if mode == "iso":
            params.pop("alpha", None)
        cfg = AdmmConfig(mode=mode, **params, **cell["solver"])
        pipe = sat_pipeline if kind == "sat" else slat_pipeline
        res = pipe(f, blur, cfg, cell["K"], seed=cell["kmeans_seed"], restarts=cell["restarts"])

        # back to clean-image units: normalized -> counts -> original scale
        P_img = float(np.max(g))
        f_tilde = res.f_tilde * (scale * P_img / cell["peak"])
        out = {
            "psnr_paper": psnr(g, f_tilde, P_img, "paper"),
            "psnr_standard": psnr(g, f_tilde, P_img, "standard"),
            "dice": [],
        }
        gt = image["labels"]
        if gt is not None:
            labels = res.segmentation.labels
            K = cell["K"]
            if kind == "slat":
                labels = apply_permutation(labels, match_labels(labels, gt, K))
            names = image["region_names"]
            for k in range(1, K + 1):
                region = names[k - 1] if k - 1 < len(names) else f"region{k}"
                out["dice"].append((region, dice(gt == k, labels == k)))
        out["error"] = None
    except (AitvSegError, ArithmeticError, ValueError, TypeError, KeyError) as exc:
        # a failed cell is reported in failures.csv; the batch carries on
        out = {"error": f"{type(exc).__name__}: {exc}", "dice": []}
    out["runtime_sec"] = time.perf_counter() - t0
    return out


def _run_indexed(args):
    cell, image = args
    return run_cell(cell, image)


def run_experiment(config: dict, workers: int = 1):
    """Run every cell; returns ``(cells, results)`` in cell order."""
    images = load_images(config)
    cells = expand_cells(config, images)
    jobs = [(c, images[c["image_index"]]) for c in cells]
    if workers <= 1:
        results = [run_cell(c, img) for c, img in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_indexed, jobs))
    return cells, results


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def aggregate(cells, results):
    """Mean and sample standard deviation per (case, method, region, metric) over images and seeds."""
    groups: dict[tuple, list[float]] = {}
    for c, r in zip(cells, results):
        if r["error"]:
            continue
        case = c["image"].split("|")[1]
        for region, d in r["dice"]:
            groups.setdefault((case, c["method"], region, "dice"), []).append(d)
        for metric in ("psnr_paper", "psnr_standard"):
            groups.setdefault((case, c["method"], "all", metric), []).append(r[metric])
    rows = []
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=np.float64)
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        rows.append((*key, float(vals.mean()), std, int(vals.size)))
    return rows


def experiment_tables(cells, results) -> dict[str, str]:
    """CSV text for every output table, keyed by file name."""
    dice_rows, psnr_rows, time_rows, fail_rows = [], [], [], []
    for c, r in zip(cells, results):
        time_rows.append((c["image"], c["method"], r["runtime_sec"]))
        if r["error"]:
            fail_rows.append((c["image"], c["method"], r["error"]))
            continue
        for region, d in r["dice"]:
            dice_rows.append((c["image"], c["method"], region, d))
        psnr_rows.append((c["image"], c["method"], r["psnr_paper"], r["psnr_standard"]))
    return {
        "dice.csv": rows_to_csv(("image", "method", "region", "dice"), dice_rows),
        "psnr.csv": rows_to_csv(("image", "method", "psnr_paper", "psnr_standard"), psnr_rows),
        "aggregate.csv": rows_to_csv(
            ("case", "method", "region", "metric", "mean", "std", "n"), aggregate(cells, results)
        ),
        "failures.csv": rows_to_csv(("image", "method", "error"), fail_rows),
        "timing.csv": rows_to_csv(("image", "method", "runtime_sec"), time_rows),
    }


DETERMINISTIC_TABLES = ("dice.csv", "psnr.csv", "aggregate.csv", "failures.csv")
