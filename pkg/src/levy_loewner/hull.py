"""Hull boundaries and the geometric estimators built on them.

For a slit chain the hull boundary is exactly the image of the unit circle
under the chain, and the hull itself is the closed disk plus the arcs
``l_k = f_{k-1}(slit_k)``.  Both descriptions are available here: the first
as an ordered polyline (:func:`trace_boundary`), the second as arc samples
(:func:`arc_points`), which also carry the quadrature for arc lengths.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .conformal import SlitChain, chain_eval_circle, circle_slit_map, _slit_core
from .driver import DriverPath, wrap_angle
from .loewner import backward_flow

TWO_PI = 2.0 * math.pi

# Gauss-Kronrod 7/15 on [-1, 1] (QUADPACK qk15 constants)
_XK = np.array([0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                0.207784955007898467600689403773245, 0.0])
_WK = np.array([0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
GK_NODES = np.concatenate((-_XK[:-1], _XK[::-1]))
GK_WEIGHTS = np.concatenate((_WK[:-1], _WK[::-1]))
_g = np.zeros(8)
_g[[1, 3, 5, 7]] = _WG
G_WEIGHTS = np.concatenate((_g[:-1], _g[::-1]))

ARC_LEVELS = (6, 14, 28, 44)
ARC_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class HullBoundary:
    """Closed polyline approximating the boundary of a hull.

    ``log_capacity`` is ``T`` for the raw hull (capacity ``e^T``); when
    ``rescaled`` is set the points have been multiplied by ``e^{-T}``.
    ``resolution`` is the largest gap between consecutive points.
    """

    points: np.ndarray
    log_capacity: float
    rescaled: bool = False
    spacing_tol: float = math.nan
    resolution: float = math.nan
    degraded: bool = False
    approximate: bool = False
    convention: str = "capacity-consistent"
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).reshape(-1)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, HullBoundary):
            return NotImplemented
        same = (self.log_capacity, self.rescaled, self.convention, self.degraded, self.approximate)
        return (same == (other.log_capacity, other.rescaled, other.convention, other.degraded,
                         other.approximate) and np.array_equal(self.points, other.points))

    __hash__ = None

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def scale(self) -> float:
        """Factor mapping raw coordinates to the stored ones."""
        return math.exp(-self.log_capacity) if self.rescaled else 1.0


def _gaps(points: np.ndarray) -> np.ndarray:
    return np.abs(np.roll(points, -1) - points)


def _attachments(chain: SlitChain):
    """Where each slit's base sits on the boundary of the earlier hull.

    Slit ``k`` grows from ``f_{k-1}(e^{i theta_k})``.  Following that point
    back through ``h_{k-1}, ..., h_1`` it either stays on the circle (parent
    0, position = angle) or first lands on slit ``j`` (parent ``j``, position =
    radius on the unrotated slit, side -1 for the outgoing leg, +1 for the
    return leg, 0 at the tip).
    """
    n = len(chain)
    ang = np.array(chain.thetas, dtype=float)
    parent = np.zeros(n, dtype=int)
    pos = np.zeros(n)
    side = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    for j in range(n - 2, -1, -1):
        delta = float(chain.deltas[j])
        if delta == 0.0:
            continue
        idx = np.flatnonzero(active[j + 1:]) + j + 1
        if idx.size == 0:
            continue
        theta = float(chain.thetas[j])
        on, a, p = circle_slit_map(theta, delta, ang[idx])
        hit = idx[~on]
        parent[hit] = j + 1
        pos[hit] = np.abs(p[~on])
        side[hit] = np.sign(wrap_angle(ang[hit] - theta)).astype(int)
        active[hit] = False
        ang[idx[on]] = a[on]
    circ = np.flatnonzero(parent == 0)
    pos[circ] = wrap_angle(ang[circ])
    pos[circ] = np.where(pos[circ] == math.pi, -math.pi, pos[circ])
    return parent, pos, side


def _arc_eval(chain: SlitChain, ks: np.ndarray, us: np.ndarray, base: np.ndarray) -> np.ndarray:
    """``f_{k-1}((1 + delta_k u^2) e^{i theta_k})`` for arcs ``k`` (1-based), batched."""
    out = np.empty(ks.size, dtype=complex)
    rho = 1.0 + chain.deltas[ks - 1] * us * us
    at_base = rho == 1.0
    out[at_base] = base[ks[at_base] - 1]
    sel = np.flatnonzero(~at_base)
    order = sel[np.argsort(-ks[sel], kind="stable")]
    kk = ks[order]
    z = rho[order] * np.exp(1j * chain.thetas[kk - 1])
    neg = -kk
    for j in range(int(kk.max(initial=1)) - 2, -1, -1):
        delta = float(chain.deltas[j])
        if delta == 0.0:
            continue
        m = int(np.searchsorted(neg, -(j + 1), side="left"))   # points with k - 1 > j
        if m == 0:
            continue
        rot = np.exp(1j * chain.thetas[j])
        z[:m] = rot * _slit_core(delta, z[:m] * rot.conjugate(), False)[0]
    out[order] = z
    return out


def trace_boundary(chain: SlitChain, spacing_tol: float = 1e-2, max_points: int = 400_000,
                   initial_points: int = 1024) -> HullBoundary:
    """Trace ``f_n(unit circle)`` as an ordered closed polyline.

    Since ``h_k`` maps the circle onto the circle plus slit ``k``, the image
    of the circle is the circle together with the arcs
    ``f_{k-1}([1, 1 + delta_k] e^{i theta_k})``.  The circle is sampled by
    angle and every arc by ``u`` with ``rho = 1 + delta_k u^2``; each arc is
    walked out and back at its attachment point, which yields the same
    closed curve as walking the circle through ``f_n``.  Parametrizing arcs
    locally avoids the loss of resolution that angles on the original circle
    suffer when an arc's harmonic measure falls below machine precision.

    Samples are bisected until consecutive image points are within
    ``spacing_tol`` or ``max_points`` (counting arc samples twice) is reached;
    then, or when a parameter interval can no longer be split in floating
    point, ``degraded`` is set and ``resolution`` reports the spacing
    actually achieved.
    """
    if spacing_tol <= 0:
        raise ValueError("spacing_tol must be positive")
    n = len(chain)
    live = np.flatnonzero(chain.deltas > 0) + 1           # arcs with positive length
    parent, pos, side = _attachments(chain)
    base = np.empty(n, dtype=complex)
    for k in range(1, n + 1):
        p = parent[k - 1]
        if p == 0:
            base[k - 1] = np.exp(1j * pos[k - 1])
        else:
            u = math.sqrt(max(pos[k - 1] - 1.0, 0.0) / chain.deltas[p - 1])
            base[k - 1] = _arc_eval(chain, np.array([p]), np.array([min(u, 1.0)]), base)[0]
    attach_u = np.zeros(n)
    for k in range(1, n + 1):
        p = parent[k - 1]
        if p == 0:
            attach_u[k - 1] = pos[k - 1]
        else:
            attach_u[k - 1] = min(math.sqrt(max(pos[k - 1] - 1.0, 0.0) / chain.deltas[p - 1]), 1.0)
    kids = live[parent[live - 1] == 0] if n else live
    nodes = [np.zeros(initial_points, dtype=int), np.zeros(kids.size, dtype=int)]
    params = [np.linspace(-math.pi, math.pi, initial_points, endpoint=False), attach_u[kids - 1]]
    for k in live:
        ch = live[parent[live - 1] == k]
        nodes += [np.full(9 + ch.size, k)]
        params += [np.concatenate((np.linspace(0.0, 1.0, 9), attach_u[ch - 1]))]
    node = np.concatenate(nodes)
    par = np.concatenate(params)
    order = np.lexsort((par, node))
    node, par = node[order], par[order]
    keep = np.ones(node.size, dtype=bool)
    keep[1:] = (node[1:] != node[:-1]) | (par[1:] != par[:-1])
    node, par = node[keep], par[keep]
    pts = np.empty(node.size, dtype=complex)
    circ = node == 0
    pts[circ] = np.exp(1j * par[circ])
    if np.any(~circ):
        pts[~circ] = _arc_eval(chain, node[~circ], par[~circ], base)
    n_circ = int(circ.sum())
    min_dphi = 8 * np.spacing(math.pi)
    lengths = np.concatenate(([0.0], chain.deltas))

    while True:
        nxt = np.roll(pts, -1)
        nxt_par = np.roll(par, -1)
        same = np.roll(node, -1) == node
        same[n_circ - 1] = True                          # circle closes on itself
        nxt[n_circ - 1] = pts[0]
        nxt_par[n_circ - 1] = par[0] + TWO_PI
        gaps = np.where(same, np.abs(nxt - pts), 0.0)
        mid = 0.5 * (par + nxt_par)
        arc = node > 0
        dl = lengths[node]
        rho_l, rho_m, rho_r = 1.0 + dl * par * par, 1.0 + dl * mid * mid, 1.0 + dl * nxt_par * nxt_par
        split = np.where(arc, (rho_m != rho_l) & (rho_m != rho_r), nxt_par - par > min_dphi)
        todo = np.flatnonzero(same & (gaps > spacing_tol) & split)
        room = max_points - (n_circ + 2 * (node.size - n_circ))
        weight = np.where(node[todo] > 0, 2, 1)
        if todo.size == 0 or room <= 0:
            break
        if weight.sum() > room:
            by_gap = todo[np.argsort(gaps[todo], kind="stable")[::-1]]
            take = np.cumsum(np.where(node[by_gap] > 0, 2, 1)) <= room
            todo = np.sort(by_gap[take])
            if todo.size == 0:
                break
        new_par = mid[todo]
        new_node = node[todo]
        new_pts = np.empty(todo.size, dtype=complex)
        c = new_node == 0
        new_pts[c] = np.exp(1j * new_par[c])
        if np.any(~c):
            new_pts[~c] = _arc_eval(chain, new_node[~c], new_par[~c], base)
        node = np.insert(node, todo + 1, new_node)
        par = np.insert(par, todo + 1, new_par)
        pts = np.insert(pts, todo + 1, new_pts)
        n_circ = int((node == 0).sum())

    seq = _walk(node, par, parent, attach_u, side, live, chain.deltas)
    out = pts[seq]
    if not np.all(np.isfinite(out)):
        raise ArithmeticError("non-finite boundary point")
    res = float(_gaps(out).max()) if out.size > 1 else 0.0
    return HullBoundary(out, chain.log_capacity, False, spacing_tol, res, res > spacing_tol,
                        False, chain.convention, {"events": n})


def _walk(node, par, parent, attach_u, side, live, deltas) -> np.ndarray:
    """Sample indices in boundary order: the circle counterclockwise, each arc
    out along its clockwise side and back along the other, recursively."""
    starts = np.searchsorted(node, np.arange(node.max(initial=0) + 2))
    at = {}                                          # (node, sample) -> [(side, child)]
    for k in live:
        p = parent[k - 1]
        lo, hi = starts[p], starts[p + 1]
        i = lo + int(np.searchsorted(par[lo:hi], attach_u[k - 1]))
        at.setdefault((p, i), []).append((side[k - 1], k))

    def circle_tokens():
        for i in range(starts[0], starts[1]):
            yield ("pt", i)
            for _, k in at.get((0, i), ()):
                yield ("arc", k)
                yield ("pt", i)

    def arc_tokens(k):
        lo, hi = starts[k], starts[k + 1]
        first = [c for s, c in at.get((k, lo), ()) if s <= 0]
        for c in first:
            yield ("arc", c)
            yield ("pt", lo)
        for i in range(lo + 1, hi):
            yield ("pt", i)
            kids = at.get((k, i), ())
            for s, c in kids:
                if s <= 0 or i == hi - 1:
                    yield ("arc", c)
                    yield ("pt", i)
        for i in range(hi - 2, lo, -1):
            yield ("pt", i)
            for s, c in at.get((k, i), ()):
                if s > 0:
                    yield ("arc", c)
                    yield ("pt", i)
        yield ("pt", lo)
        for c in [c for s, c in at.get((k, lo), ()) if s > 0]:
            yield ("arc", c)
            yield ("pt", lo)

    seq = []
    stack = [circle_tokens()]
    while stack:
        tok = next(stack[-1], None)
        if tok is None:
            stack.pop()
        elif tok[0] == "pt":
            seq.append(tok[1])
        else:
            stack.append(arc_tokens(tok[1]))
    return np.array(seq, dtype=int)


def trace_flow_boundary(path: DriverPath, T: float | None = None, n_points: int = 4096,
                        eta: float = 1e-9, method: str = "auto") -> HullBoundary:
    """Boundary of a general driver's hull from backward-flow images of a circle.

    Points ``(1 + eta) e^{i phi}`` are pushed through the backward flow; the
    result is flagged approximate.
    """
    T = path.horizon if T is None else float(T)
    phi = np.linspace(-math.pi, math.pi, n_points, endpoint=False)
    pts = backward_flow(path, (1.0 + eta) * np.exp(1j * phi), T, method=method, normalize=False)
    res = float(_gaps(pts).max())
    return HullBoundary(pts, T, False, math.nan, res, False, True, "capacity-consistent",
                        {"driver": path.kind})


def rescale(boundary: HullBoundary) -> HullBoundary:
    """Multiply by ``e^{-T}`` so the hull has capacity one."""
    if boundary.rescaled:
        raise ValueError("boundary is already rescaled")
    f = math.exp(-boundary.log_capacity)
    return replace(boundary, points=boundary.points * f, rescaled=True,
                   spacing_tol=boundary.spacing_tol * f, resolution=boundary.resolution * f)


def _as_points(obj) -> np.ndarray:
    if isinstance(obj, HullBoundary):
        return obj.points
    pts = np.asarray(obj)
    if np.iscomplexobj(pts) or pts.ndim == 1:
        return pts.astype(complex).reshape(-1)
    return (pts[:, 0] + 1j * pts[:, 1]).astype(complex)


def diameter(obj) -> float:
    """Largest distance between two points (exact; convex-hull vertices only)."""
    pts = _as_points(obj)
    if pts.size == 0:
        raise ValueError("empty point set")
    xy = np.column_stack((pts.real, pts.imag))
    try:
        cand = xy[ConvexHull(xy).vertices]
    except (QhullError, ValueError):
        cand = np.unique(xy, axis=0)
    best = 0.0
    for i in range(0, len(cand), 2048):
        d = cand[i:i + 2048, None, :] - cand[None, :, :]
        best = max(best, float(np.sqrt((d * d).sum(-1)).max()))
    return best


def hausdorff_distance(a, b) -> float:
    """Hausdorff distance between two finite point sets (exact nearest neighbours)."""
    pa, pb = _as_points(a), _as_points(b)
    if pa.size == 0 or pb.size == 0:
        raise ValueError("empty point set")
    xa = np.column_stack((pa.real, pa.imag))
    xb = np.column_stack((pb.real, pb.imag))
    d_ab = cKDTree(xb).query(xa)[0].max()
    d_ba = cKDTree(xa).query(xb)[0].max()
    return float(max(d_ab, d_ba))


def cone_test(boundary, theta1: float, theta2: float, radius_tol: float = 1e-9) -> bool:
    """True iff every boundary point outside the closed unit disk has argument in ``[theta1, theta2]``.

    For a rescaled boundary the unit disk is rescaled with it.
    """
    if not theta1 < theta2:
        raise ValueError("need theta1 < theta2")
    pts = _as_points(boundary)
    unit = boundary.scale if isinstance(boundary, HullBoundary) else 1.0
    out = pts[np.abs(pts) > unit * (1.0 + radius_tol)]
    if out.size == 0:
        return True
    arg = np.angle(out)
    return bool(np.all((arg >= theta1) & (arg <= theta2)))


@dataclass(frozen=True)
class BoxCountResult:
    """Least-squares fit of ``log N(s)`` against ``log(1/s)``."""

    slope: float
    intercept: float
    r_squared: float
    scales: np.ndarray
    counts: np.ndarray
    accepted: bool


def _densify(pts: np.ndarray, step: float, closed: bool) -> np.ndarray:
    a = pts
    b = np.roll(pts, -1) if closed else pts[1:]
    if not closed:
        a = pts[:-1]
    n = np.maximum(np.ceil(np.abs(b - a) / step).astype(int), 1)
    seg = np.repeat(np.arange(a.size), n)
    frac = np.arange(seg.size) - np.repeat(np.cumsum(n) - n, n)
    out = a[seg] + (b[seg] - a[seg]) * (frac / np.repeat(n, n))
    return out if closed else np.append(out, pts[-1])


def box_counting_dimension(obj, scale_min: float | None = None, scale_max: float | None = None,
                           n_scales: int = 12, polyline: bool | None = None,
                           closed: bool = True, min_r_squared: float = 0.99) -> BoxCountResult:
    """Box-counting slope over geometrically spaced scales.

    Polylines are resampled at a quarter box so no crossed box is missed;
    counts are averaged over four grid offsets.  Default scales span
    ``[diam/300, diam/10]``; for a :class:`HullBoundary` the smallest scale
    must be at least three times its resolution.
    """
    pts = _as_points(obj)
    if polyline is None:
        polyline = isinstance(obj, HullBoundary)
    diam = diameter(pts)
    scale_min = diam / 300.0 if scale_min is None else float(scale_min)
    scale_max = diam / 10.0 if scale_max is None else float(scale_max)
    if not 0 < scale_min < scale_max:
        raise ValueError("need 0 < scale_min < scale_max")
    if isinstance(obj, HullBoundary) and math.isfinite(obj.resolution) and scale_min < 3 * obj.resolution:
        raise ValueError(f"scale_min {scale_min:g} below 3x boundary resolution {obj.resolution:g}")
    scales = np.geomspace(scale_min, scale_max, n_scales)
    counts = np.empty(n_scales)
    for i, s in enumerate(scales):
        p = _densify(pts, 0.25 * s, closed) if polyline else pts
        x, y = p.real, p.imag
        total = 0
        for ox, oy in ((0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)):
            ix = np.floor((x - x.min()) / s + ox).astype(np.int64)
            iy = np.floor((y - y.min()) / s + oy).astype(np.int64)
            total += np.unique(ix * (iy.max() + 2) + iy).size
        counts[i] = total / 4.0
    lx, ly = np.log(1.0 / scales), np.log(counts)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return BoxCountResult(float(slope), float(intercept), r2, scales, counts, r2 >= min_r_squared)


def _radial_rule(delta: np.ndarray, levels: int):
    """Kronrod nodes/weights on ``[1, 1 + delta]``, geometrically refined toward 1.

    Returns ``(rho, wk, wg)`` with one row per ``delta``.
    """
    delta = np.asarray(delta, dtype=float).reshape(-1, 1)
    edges = 2.0 ** -np.arange(levels + 1)                    # fractions of delta, descending
    lo = np.append(edges[1:], 0.0)
    hi = edges
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    frac = (mid[:, None] + half[:, None] * GK_NODES[None, :]).reshape(-1)
    wk = (half[:, None] * GK_WEIGHTS[None, :]).reshape(-1)
    wg = (half[:, None] * G_WEIGHTS[None, :]).reshape(-1)
    return 1.0 + delta * frac[None, :], delta * wk[None, :], delta * wg[None, :]


def _arc_values(chain: SlitChain, rows: np.ndarray, rho: np.ndarray, deriv: bool = True):
    """Images and derivatives of ``f_{k-1}`` at ``rho e^{i theta_k}`` for the rows ``k-1``.

    ``rows`` are sorted 0-based event indices; row ``r`` is pushed through
    events ``r-1, ..., 0``.  One vectorized pass over the events serves all rows.
    """
    rows = np.asarray(rows)
    th = chain.thetas[rows]
    z = rho * np.exp(1j * th)[:, None]
    d = np.ones_like(z) if deriv else None
    if rows.size == 0:
        return z, d
    for e in range(int(rows.max()) - 1, -1, -1):
        start = int(np.searchsorted(rows, e, side="right"))
        delta = float(chain.deltas[e])
        if start >= rows.size or delta == 0.0:
            continue
        theta = float(chain.thetas[e])
        rot = complex(math.cos(theta), math.sin(theta))
        h, hd = _slit_core(delta, z[start:] * rot.conjugate(), deriv)
        z[start:] = rot * h
        if deriv:
            d[start:] *= hd
    return z, d


@dataclass(frozen=True)
class ArcLengths:
    """Arc lengths ``l_k`` with their Kronrod error estimates."""

    lengths: np.ndarray
    errors: np.ndarray
    converged: np.ndarray


def arc_lengths(chain: SlitChain, rtol: float = ARC_RTOL, levels=ARC_LEVELS) -> ArcLengths:
    """All ``l_k = int_1^{1+delta_k} |f_{k-1}'(rho e^{i theta_k})| d rho`` at once.

    Gauss-Kronrod 7/15 on intervals halving toward ``rho = 1``; rows whose
    Kronrod/Gauss gap exceeds ``rtol`` are redone with more halvings, and any
    row still above it after the last level is reported unconverged.
    """
    n = len(chain)
    lengths = np.zeros(n)
    errors = np.zeros(n)
    todo = np.arange(n)
    for lv in levels:
        if todo.size == 0:
            break
        rho, wk, wg = _radial_rule(chain.deltas[todo], lv)
        _, d = _arc_values(chain, todo, rho)
        a = np.abs(d)
        k = (wk * a).sum(axis=1)
        g = (wg * a).sum(axis=1)
        lengths[todo] = k
        errors[todo] = np.abs(k - g)
        bad = ~(errors[todo] <= rtol * np.abs(k)) | ~np.isfinite(k)
        todo = todo[bad]
    converged = np.ones(n, dtype=bool)
    converged[todo] = False
    return ArcLengths(lengths, errors, converged)


def arc_length(chain: SlitChain, k: int, rtol: float = ARC_RTOL) -> float:
    """Length of the ``k``-th added arc (1-based)."""
    if not 1 <= k <= len(chain):
        raise ValueError(f"k={k} outside 1..{len(chain)}")
    res = arc_lengths(chain.prefix(k), rtol)
    return float(res.lengths[k - 1])


def boundary_length_series(chain: SlitChain, lengths: np.ndarray | None = None) -> np.ndarray:
    """``L~_n = e^{-T_n} (2 pi + sum_{k<=n} l_k)`` for ``n = 0..len(chain)``."""
    ell = arc_lengths(chain).lengths if lengths is None else np.asarray(lengths)
    raw = TWO_PI + np.concatenate(([0.0], np.cumsum(ell)))
    return raw * np.exp(-chain.cumulative_log_capacity())


def arc_points(chain: SlitChain, per_arc: int = 32, circle_points: int = 512) -> np.ndarray:
    """Sample points of the hull ``closed disk + union of arcs`` (boundary point set).

    Each arc gets ``per_arc`` points, clustered toward its base.
    """
    circle = np.exp(1j * np.linspace(-math.pi, math.pi, circle_points, endpoint=False))
    n = len(chain)
    if n == 0:
        return circle
    s = np.linspace(0.0, 1.0, per_arc)
    rho = 1.0 + chain.deltas[:, None] * s[None, :] ** 2
    z, _ = _arc_values(chain, np.arange(n), rho, deriv=False)
    return np.concatenate((circle, z.reshape(-1)))


def annulus_energy(chain: SlitChain, delta: float, n_theta: int = 512, levels: int = 8) -> float:
    """``(1/2pi) int int_{1<rho<1+delta} |f'(rho e^{i theta})|^2 d rho d theta`` for ``f = e^{-T} f_n``.

    Tensor rule: midpoint in ``theta``, Gauss-Kronrod in ``rho`` halving toward 1.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rho, wk, _ = _radial_rule(np.array([delta]), levels)
    theta = -math.pi + (np.arange(n_theta) + 0.5) * (TWO_PI / n_theta)
    z = (rho[0][None, :] * np.exp(1j * theta)[:, None]).reshape(-1)
    d = np.ones_like(z)
    for k in range(len(chain) - 1, -1, -1):
        dk = float(chain.deltas[k])
        if dk == 0.0:
            continue
        rot = complex(math.cos(chain.thetas[k]), math.sin(chain.thetas[k]))
        h, hd = _slit_core(dk, z * rot.conjugate(), True)
        z = rot * h
        d = d * hd
    dens = (np.abs(d) ** 2).reshape(n_theta, -1) * math.exp(-2.0 * chain.log_capacity)
    return float((dens * wk[0][None, :]).sum() / n_theta)
