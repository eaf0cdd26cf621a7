"""Reading and writing images, label maps, matrices and JSON manifests.

All writers go through a temporary file in the destination directory
followed by ``os.replace`` so a crash never leaves a truncated artifact.
"""

from __future__ import annotations

import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError, DimensionError

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "read_image",
    "write_image",
    "read_matrix",
    "write_matrix",
    "matrix_to_text",
    "label_colors",
    "write_label_png",
    "write_json",
    "read_json",
]

_RASTER = {".png", ".pgm", ".ppm", ".pnm", ".bmp", ".tif", ".tiff"}


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# --------------------------------------------------------------------------- text matrices


def matrix_to_text(arr) -> str:
    """Plain-text dump that round-trips float64 exactly.

    The first line is a ``# shape`` comment: ``M N`` for an image or
    ``d M N`` for a channel-major stack, which then follows as ``d`` blocks
    of ``M`` rows.
    """
    arr = np.asarray(arr)
    if arr.ndim not in (2, 3):
        raise DimensionError(f"can only write 2-D or 3-D arrays, got shape {arr.shape}")
    fmt = "%d" if np.issubdtype(arr.dtype, np.integer) else "%.17g"
    buf = _io.StringIO()
    buf.write("# shape " + " ".join(str(s) for s in arr.shape) + "\n")
    for block in arr.reshape(-1, arr.shape[-2], arr.shape[-1]):
        np.savetxt(buf, block, fmt=fmt)
    return buf.getvalue()


def write_matrix(path, arr) -> Path:
    return atomic_write_text(path, matrix_to_text(arr))


def _dimension_line(rows):
    """``(M, N)`` when the first row reads ``M N`` and exactly M rows of N values follow."""
    if len(rows) < 2 or len(rows[0]) != 2:
        return None
    try:
        M, N = (int(t) for t in rows[0])
    except ValueError:
        return None
    if M == len(rows) - 1 and all(len(r) == N for r in rows[1:]):
        return M, N
    return None


def read_matrix(path) -> np.ndarray:
    """Inverse of :func:`write_matrix`.

    Also accepts a bare ``M N`` first line followed by ``M`` rows of ``N``
    values; files without any header are read as 2-D.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    shape = None
    if lines and lines[0].startswith("# shape"):
        shape = tuple(int(t) for t in lines[0].split()[2:])
    rows = [ln.split() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if shape is None and _dimension_line(rows):
        rows = rows[1:]
    if not rows or len({len(r) for r in rows}) != 1:
        raise DataError(f"{path} is not a rectangular numeric matrix")
    try:
        data = np.array(rows, dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path} is not a numeric matrix: {exc}") from exc
    if shape is not None:
        if int(np.prod(shape)) != data.size:
            raise DataError(f"{path}: header says shape {shape} but holds {data.size} values")
        data = data.reshape(shape)
    return data


# --------------------------------------------------------------------------- raster images


def read_image(path) -> np.ndarray:
    """Load a raster or text image as float64: ``(M, N)`` gray or ``(3, M, N)`` colour.

    Raster values stay in their stored units (0..255 or 0..65535).
    """
    path = Path(path)
    if path.suffix.lower() == ".txt":
        return read_matrix(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("RGB", "RGBA", "P", "CMYK", "YCbCr", "LA"):
                arr = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = np.moveaxis(arr, -1, 0)
                if np.array_equal(arr[0], arr[1]) and np.array_equal(arr[1], arr[2]) and im.mode in ("P", "LA"):
                    arr = arr[0]
            else:
                arr = np.asarray(im, dtype=np.float64)
    except OSError as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return np.ascontiguousarray(arr)


def _png_bytes(arr) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim == 3:
        if arr.shape[0] != 3:
            raise DimensionError(f"colour images must be (3, M, N), got {arr.shape}")
        rgb = np.moveaxis(arr, 0, -1)
        if rgb.max(initial=0) > 255:
            raise DataError("colour values above 255 cannot be stored in PNG; write a .txt matrix instead")
        im = Image.fromarray(np.ascontiguousarray(rgb.astype(np.uint8)), mode="RGB")
    elif arr.ndim == 2:
        if arr.max(initial=0) > 255:
            im = Image.fromarray(arr.astype(np.uint16))
        else:
            im = Image.fromarray(arr.astype(np.uint8), mode="L")
    else:
        raise DimensionError(f"cannot store an array of shape {arr.shape} as an image")
    buf = _io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def write_image(path, img, *, vmin: float | None = None, vmax: float | None = None) -> Path:
    """Write ``img`` to ``path``; the suffix picks the format.

    ``.txt`` stores exact float64 values. Raster formats store values
    rounded to integers in ``0..255`` (``0..65535`` for large gray counts);
    when ``vmin``/``vmax`` are given the range is first mapped linearly to
    ``0..255``.
    """
    path = Path(path)
    img = np.asarray(img, dtype=np.float64)
    if path.suffix.lower() == ".txt":
        return write_matrix(path, img)
    if vmin is not None or vmax is not None:
        lo = float(img.min()) if vmin is None else vmin
        hi = float(img.max()) if vmax is None else vmax
        span = hi - lo if hi > lo else 1.0
        img = (img - lo) / span * 255.0
    q = np.clip(np.rint(img), 0, 65535)
    if path.suffix.lower() == ".png" or path.suffix.lower() not in _RASTER:
        return atomic_write_bytes(path, _png_bytes(q))
    buf = _io.BytesIO()
    Image.open(_io.BytesIO(_png_bytes(q))).save(buf, format=Image.registered_extensions()[path.suffix.lower()])
    return atomic_write_bytes(path, buf.getvalue())


_BASE_COLORS = np.array(
    [
        [31, 119, 180],
        [255, 127, 14],
        [44, 160, 44],
        [214, 39, 40],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
    ],
    dtype=np.uint8,
)


def label_colors(K: int) -> np.ndarray:
    """``K`` distinct RGB colours; beyond ten, hues are spread by the golden angle."""
    if K <= len(_BASE_COLORS):
        return _BASE_COLORS[:K].copy()
    extra = []
    for i in range(K - len(_BASE_COLORS)):
        h = (i * 0.618033988749895) % 1.0
        im = Image.new("HSV", (1, 1), (int(h * 255), 200, 220)).convert("RGB")
        extra.append(im.getpixel((0, 0)))
    return np.vstack((_BASE_COLORS, np.array(extra, dtype=np.uint8)))


def write_label_png(path, labels, K: int | None = None) -> Path:
    """Colour-coded rendering of a label map with labels ``1..K``."""
    labels = np.asarray(labels, dtype=np.int64)
    K = int(labels.max()) if K is None else K
    rgb = label_colors(K)[labels - 1]
    buf = _io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return atomic_write_bytes(path, buf.getvalue())


# --------------------------------------------------------------------------- JSON


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def write_json(path, obj) -> Path:
    text = json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"
    return atomic_write_text(path, text)


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
