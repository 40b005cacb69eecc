"""Single-file posterior archive.

Layout::

    FINRES-POSTERIOR 1\\n
    [# provenance comment\\n]
    <one line of JSON: spec, seed, dates, columns, arrays=[{name, shape}]>\\n
    <each listed array as little-endian float64, row-major, in listed order>

The format has no timestamps, so identical posteriors give identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataIOError, ValidationError
from .diagnostics import posterior_summary
from .model import TvpVarPosterior, TvpVarSpec

MAGIC = b"FINRES-POSTERIOR 1\n"
_ARRAYS = ("beta_mean", "beta_sd", "alpha_mean", "alpha_sd", "h_mean", "h_sd",
           "innovation_draws", "beta_draws", "alpha_draws", "h_draws")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_posterior(post: TvpVarPosterior, path, comment: str | None = None) -> None:
    arrays = [(name, getattr(post, name)) for name in _ARRAYS if getattr(post, name) is not None]
    header = {
        "spec": _jsonable(post.spec.to_dict()),
        "seed": int(post.spec.mcmc.seed),
        "dates": list(post.dates),
        "columns": list(post.columns),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        if comment:
            fh.write(f"# {comment}\n".encode("utf-8"))
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n")
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_posterior(path) -> TvpVarPosterior:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataIOError(f"cannot read posterior archive {path}: {exc}") from exc
    if not raw.startswith(MAGIC):
        raise ValidationError(f"{path} is not a posterior archive")
    start = len(MAGIC)
    if raw.startswith(b"#", start):
        start = raw.index(b"\n", start) + 1
    nl = raw.index(b"\n", start)
    header = json.loads(raw[start:nl])
    pos = nl + 1
    arrays = {}
    for item in header["arrays"]:
        shape = tuple(item["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if pos + nbytes > len(raw):
            raise ValidationError(f"{path}: truncated array {item['name']}")
        arrays[item["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(raw):
        raise ValidationError(f"{path}: trailing bytes after arrays")
    post = TvpVarPosterior(
        spec=TvpVarSpec.from_dict(header["spec"]),
        dates=tuple(header["dates"]),
        columns=tuple(header["columns"]),
        **{name: arrays.get(name) for name in _ARRAYS},
    )
    post.summary = posterior_summary(post)
    return post
