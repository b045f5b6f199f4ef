"""Persistence: chain JSONL, boundary CSV, report JSON and SVG rendering.

Floats are written with ``repr`` (shortest round-trip form), so a load
reconstructs every array bit for bit and save -> load -> save is
byte-identical.  No timestamps are written anywhere.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .conformal import SlitChain
from .hull import HullBoundary


class FormatError(ValueError):
    """A persisted file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj, indent: int | None = None) -> str:
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=indent, allow_nan=False)


# chains ------------------------------------------------------------------

def chain_lines(chain: SlitChain, config: dict | None = None) -> list[str]:
    head = {"type": "chain", "version": __version__, "convention": chain.convention,
            "n_events": len(chain), "config": config or {}}
    lines = [dumps(head)]
    for k in range(len(chain)):
        lines.append(dumps({"type": "event", "k": k + 1, "theta": float(chain.thetas[k]),
                            "delta": float(chain.deltas[k]), "tau": float(chain.taus[k]),
                            "cap": float(chain.caps[k]), "convention": chain.convention}))
    return lines


def save_chain(path, chain: SlitChain, config: dict | None = None) -> Path:
    path = Path(path)
    path.write_text("\n".join(chain_lines(chain, config)) + "\n", encoding="utf-8")
    return path


def load_chain(path) -> tuple[SlitChain, dict]:
    """Read a chain JSONL file; returns the chain and its header."""
    path = Path(path)
    head, rows = None, []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", path, lineno) from None
            if not isinstance(rec, dict):
                raise FormatError("record is not an object", path, lineno)
            if head is None:
                if rec.get("type") != "chain":
                    raise FormatError("first record must be the chain header", path, lineno)
                head = rec
                continue
            try:
                if rec["type"] != "event" or rec["k"] != len(rows) + 1:
                    raise FormatError("unexpected record or event out of order", path, lineno)
                rows.append((float(rec["theta"]), float(rec["delta"]), float(rec["tau"]),
                             float(rec["cap"])))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(f"bad event record ({exc!r})", path, lineno) from None
    if head is None:
        raise FormatError("empty file", path)
    if head.get("n_events") != len(rows):
        raise FormatError(f"header announces {head.get('n_events')} events, found {len(rows)}", path)
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    chain = SlitChain(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], head["convention"])
    return chain, head


# boundaries --------------------------------------------------------------

_BOUNDARY_KEYS = ("log_capacity", "rescaled", "spacing_tol", "resolution", "degraded",
                  "approximate", "convention")


def boundary_text(boundary: HullBoundary, config: dict | None = None, seed=None) -> str:
    meta = {"version": __version__, "log_capacity": boundary.log_capacity,
            "capacity": math.exp(boundary.log_capacity), "rescaled": boundary.rescaled,
            "spacing_tol": boundary.spacing_tol, "resolution": boundary.resolution,
            "degraded": boundary.degraded, "approximate": boundary.approximate,
            "convention": boundary.convention, "seed": seed,
            "provenance": boundary.provenance, "config": config or {}}
    out = [f"# {k}={dumps(meta[k])}" for k in sorted(meta)]
    out.append("x,y")
    pts = boundary.points
    out.extend(f"{x!r},{y!r}" for x, y in zip(pts.real.tolist(), pts.imag.tolist()))
    return "\n".join(out) + "\n"


def save_boundary(path, boundary: HullBoundary, config: dict | None = None, seed=None) -> Path:
    path = Path(path)
    path.write_text(boundary_text(boundary, config, seed), encoding="utf-8")
    return path


def load_boundary(path) -> tuple[HullBoundary, dict]:
    """Read a boundary CSV; returns the boundary and its metadata header."""
    path = Path(path)
    meta, xs, ys = {}, [], []
    header_done = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                if header_done:
                    raise FormatError("metadata after data", path, lineno)
                key, sep, val = line[1:].strip().partition("=")
                if not sep:
                    raise FormatError("metadata line without '='", path, lineno)
                try:
                    meta[key] = json.loads(val)
                except json.JSONDecodeError:
                    raise FormatError(f"bad metadata value for {key!r}", path, lineno) from None
                continue
            if not header_done:
                if line.strip() != "x,y":
                    raise FormatError("expected column header 'x,y'", path, lineno)
                header_done = True
                continue
            parts = line.split(",")
            try:
                if len(parts) != 2:
                    raise ValueError
                xs.append(float(parts[0]))
                ys.append(float(parts[1]))
            except ValueError:
                raise FormatError("expected two numbers", path, lineno) from None
    missing = [k for k in _BOUNDARY_KEYS if k not in meta]
    if missing or not header_done:
        raise FormatError(f"missing metadata {missing}" if missing else "no data header", path)
    num = {k: float(meta[k]) if isinstance(meta[k], str) else meta[k]
           for k in ("log_capacity", "spacing_tol", "resolution")}
    pts = np.array(xs) + 1j * np.array(ys)
    b = HullBoundary(pts, num["log_capacity"], bool(meta["rescaled"]), num["spacing_tol"],
                     num["resolution"], bool(meta["degraded"]), bool(meta["approximate"]),
                     meta["convention"], meta.get("provenance", {}))
    return b, meta


# reports -----------------------------------------------------------------

def save_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj, indent=2) + "\n", encoding="utf-8")
    return path


def save_jsonl(path, records) -> Path:
    path = Path(path)
    path.write_text("".join(dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


# rendering ---------------------------------------------------------------

def render_svg(boundary: HullBoundary, legend: dict | None = None, size: int = 800,
               stroke: str = "#1f3a93", fill: str = "#c9d6f2", margin: float = 0.05) -> str:
    """SVG 1.1 drawing of a hull boundary with the unit-circle reference ring.

    The viewport is the bounding box of hull and ring plus ``margin`` on each
    side; one user unit equals one unit of the complex plane.
    """
    pts = boundary.points
    if pts.size == 0:
        raise ValueError("empty boundary")
    ring = boundary.scale
    xs = np.concatenate((pts.real, [-ring, ring]))
    ys = np.concatenate((-pts.imag, [-ring, ring]))
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    span = max(x1 - x0, y1 - y0)
    pad = margin * span
    vb = (x0 - pad, y0 - pad, (x1 - x0) + 2 * pad, (y1 - y0) + 2 * pad)
    px = size / max(vb[2], vb[3])
    lw = 1.0 / px
    d = "M" + " L".join(f"{x:.6g},{y:.6g}" for x, y in zip(pts.real, -pts.imag)) + " Z"
    info = {"capacity": f"e^{boundary.log_capacity:.6g}", "convention": boundary.convention,
            "rescaled": boundary.rescaled, "points": int(pts.size)}
    info.update(legend or {})
    text = "; ".join(f"{k}={v}" for k, v in info.items())
    fs = 12.0 / px
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{vb[2] * px:.1f}" height="{vb[3] * px:.1f}" '
        f'viewBox="{vb[0]:.6g} {vb[1]:.6g} {vb[2]:.6g} {vb[3]:.6g}">',
        f"<title>{escape(text)}</title>",
        f'<path id="hull" d="{d}" fill="{fill}" stroke="{stroke}" stroke-width="{lw:.4g}" '
        'fill-rule="nonzero"/>',
        f'<circle id="reference" cx="0" cy="0" r="{ring:.6g}" fill="none" stroke="#b03030" '
        f'stroke-width="{lw:.4g}" stroke-dasharray="{4 * lw:.4g},{3 * lw:.4g}"/>',
        f'<text id="legend" x="{vb[0] + pad / 2:.6g}" y="{vb[1] + pad / 2 + fs:.6g}" '
        f'font-size="{fs:.4g}" font-family="monospace">{escape(text)}</text>',
        "</svg>", ""])
