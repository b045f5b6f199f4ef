"""Forward and backward radial Loewner flows in the exterior disk.

The forward flow solves ``dg/dt = g (xi + g) / (xi - g)``, ``g_0(z) = z``,
until ``t_max`` or until ``g`` meets the driving point (the swallow time).
The backward flow ``dh/dt = -h (phi(T-t) + h) / (phi(T-t) - h)`` evaluates the
inverse map ``f_T``; its normalization ``e^{-T} f_T`` has capacity one.

Drivers are step functions, so every flow is split at the driver breakpoints
and each constant piece is an autonomous problem.  In the frame rotated by
the driver angle the field is ``+-w (1 + w) / (1 - w)``.  A piece is advanced
either exactly (the slit map or its inverse) or by adaptive RK4 with
step-doubling error control and per-point step sizes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .conformal import (capacity_factor, inverse_slit_map, log_capacity, slit_length_from_capacity,
                        slit_map)
from .driver import DriverPath, DriverSpec, make_rng, reverse_path, sample_path

DEFAULT_SWALLOW_TOL = 1e-9
DEFAULT_STEP_FRACTION = 0.1
DEFAULT_WHOLE_PLANE_HORIZON = 8.0
METHODS = ("auto", "exact", "ode")


class FlowError(ArithmeticError):
    """The integrator's step size underflowed; ``state`` holds the last points."""

    def __init__(self, message: str, state=None, time: float | None = None):
        super().__init__(message)
        self.state = state
        self.time = time


@dataclass
class FlowResult:
    """Outcome of a forward flow from one point or an array of points.

    ``value`` is ``g_{t_max}(z)`` (NaN where swallowed); ``swallow_time`` is
    NaN where the point survived.  ``steps`` counts accepted RK4 steps over
    all points, ``error_estimate`` sums the local step-doubling estimates.
    """

    z: np.ndarray | complex
    value: np.ndarray | complex
    swallowed: np.ndarray | bool
    swallow_time: np.ndarray | float
    t_max: float
    tol: float
    method: str
    steps: int = 0
    error_estimate: float = 0.0
    trajectory: list = field(default_factory=list)


def _field(w, sign):
    return sign * w * (1.0 + w) / (1.0 - w)


def _rk4(w, h, sign):
    k1 = _field(w, sign)
    k2 = _field(w + 0.5 * h * k1, sign)
    k3 = _field(w + 0.5 * h * k2, sign)
    k4 = _field(w + h * k3, sign)
    return w + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _ode_piece(w, duration, sign, rtol, atol, step_fraction, swallow_tol):
    """Integrate the rotated autonomous field over ``duration``.

    Returns ``(w, swallow_offset, steps, err)``; ``swallow_offset`` is the time
    into the piece at which a point came within ``swallow_tol`` of 1 (NaN if
    it never did).
    """
    w = np.array(w, dtype=complex)
    n = w.size
    t = np.zeros(n)
    hit = np.full(n, np.nan)
    if sign > 0:
        close = np.abs(1.0 - w) < swallow_tol
        hit[close] = 0.0
    dist = np.abs(1.0 - w)
    h = np.minimum(duration, step_fraction * dist / np.maximum(np.abs(_field(w, sign)), 1e-300))
    h = np.minimum(h, max(duration, 0.0) / 4.0 + 1e-300)
    steps = 0
    err_total = 0.0
    active = (t < duration) & np.isnan(hit)
    floor = 1e-15 * max(1.0, duration)
    while np.any(active):
        idx = np.flatnonzero(active)
        wa, ha = w[idx], h[idx]
        with np.errstate(all="ignore"):
            y1 = _rk4(wa, ha, sign)
            ym = _rk4(wa, 0.5 * ha, sign)
            y2 = _rk4(ym, 0.5 * ha, sign)
            err = np.abs(y2 - y1) / 15.0
            scale = atol + rtol * np.abs(y2)
            ok = np.isfinite(err) & (err <= scale) & (np.abs(y2) > 1.0)
            ratio = np.where(np.isfinite(err) & (err > 0), scale / err, 16.0)
            fac = np.clip(0.9 * ratio ** 0.2, 0.2, 4.0)
        fac = np.where(np.isfinite(err), fac, 0.25)
        acc = idx[ok]
        w[acc] = y2[ok] + (y2[ok] - y1[ok]) / 15.0
        t[acc] += ha[ok]
        steps += int(ok.sum())
        err_total += float(err[ok].sum())
        new_h = ha * fac
        wn = w[idx]
        dist = np.abs(1.0 - wn)
        speed = np.maximum(np.abs(_field(wn, sign)), 1e-300)
        new_h = np.minimum(new_h, step_fraction * dist / speed)
        new_h = np.minimum(new_h, duration - t[idx])
        h[idx] = new_h
        stalled = t[idx] + new_h == t[idx]
        if sign > 0:
            # remaining time to the singularity is about dist**2 / 4; once that
            # is below the resolution of t the point is as good as swallowed
            resolution = 4.0 * np.spacing(np.maximum(t[idx], 1.0))
            caught = (dist < swallow_tol) | (stalled & (0.25 * dist * dist <= resolution))
            hit[idx[caught]] = t[idx[caught]]
        done = t[idx] >= duration * (1 - 1e-15)
        t[idx[done]] = duration
        active = (t < duration) & np.isnan(hit)
        stuck = np.zeros(n, dtype=bool)
        stuck[idx] = stalled
        stuck &= active & (duration - t > floor)
        if np.any(stuck):
            raise FlowError("step size underflow", state=w[stuck].copy(), time=float(t[stuck][0]))
    return w, hit, steps, err_total


def _resolve_method(path: DriverPath, method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if method == "auto":
        return "exact" if path.kind == "jumps" else "ode"
    return method


def forward_flow(driver: DriverPath, z, t_max: float, tol: float = DEFAULT_SWALLOW_TOL,
                 method: str = "auto", rtol: float = 1e-11, atol: float = 1e-13,
                 step_fraction: float = DEFAULT_STEP_FRACTION, trajectory: bool = False) -> FlowResult:
    """Run ``g_t(z)`` forward to ``t_max`` and report swallowing.

    ``method="exact"`` advances constant pieces with the inverse slit map and
    detects swallowing of points on the growing slit in closed form;
    ``"ode"`` integrates every piece with adaptive RK4 and declares a point
    swallowed once ``|g - xi| < tol``.  ``"auto"`` picks exact steps for jump
    lists and the ODE for grid drivers.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 0
    g = np.atleast_1d(arr).astype(complex).copy()
    if np.any(np.abs(g) <= 1.0):
        raise ValueError("forward_flow needs |z| > 1")
    if t_max > driver.horizon * (1 + 1e-12):
        raise ValueError("t_max beyond the driver horizon")
    method = _resolve_method(driver, method)
    swallowed = np.zeros(g.shape, dtype=bool)
    when = np.full(g.shape, np.nan)
    steps, err = 0, 0.0
    traj = [(0.0, g.copy())] if trajectory else []
    if t_max > 0:
        starts, durations, angles = driver.pieces(0.0, t_max)
        for s, d, a in zip(starts, durations, angles):
            live = ~swallowed
            if not np.any(live):
                break
            rot = complex(math.cos(a), math.sin(a))
            w = g[live] * rot.conjugate()
            if method == "exact":
                delta = slit_length_from_capacity(d)
                on_slit = ((np.abs(w.imag) <= tol) & (w.real >= 1.0 - tol)
                           & (w.real <= 1.0 + delta + tol))
                hit = np.where(on_slit, log_capacity(np.maximum(w.real - 1.0, 0.0)), np.nan)
                hit = np.minimum(hit, d)
                w_new = np.where(on_slit, np.nan, inverse_slit_map(delta, np.where(on_slit, 2.0, w)))
            else:
                w_new, hit, k, e = _ode_piece(w, d, +1.0, rtol, atol, step_fraction, tol)
                steps += k
                err += e
            idx = np.flatnonzero(live)
            caught = ~np.isnan(hit)
            swallowed[idx[caught]] = True
            when[idx[caught]] = s + hit[caught]
            g[idx[~caught]] = rot * w_new[~caught]
            g[idx[caught]] = np.nan
            if trajectory:
                traj.append((float(s + d), g.copy()))
    out_g = np.where(swallowed, np.nan + 0j, g)
    if scalar:
        return FlowResult(complex(arr), complex(out_g[0]), bool(swallowed[0]), float(when[0]),
                          float(t_max), tol, method, steps, err, traj)
    return FlowResult(arr, out_g.reshape(arr.shape), swallowed.reshape(arr.shape),
                      when.reshape(arr.shape), float(t_max), tol, method, steps, err, traj)


def backward_flow(driver: DriverPath, z, T: float | None = None, method: str = "auto",
                  normalize: bool = True, rtol: float = 1e-12, atol: float = 1e-14,
                  step_fraction: float = DEFAULT_STEP_FRACTION):
    """Evaluate ``L_T[phi](z) = e^{-T} f_T(z)`` via the backward flow.

    With ``normalize=False`` the capacity-``e^T`` map ``f_T(z)`` is returned.
    The last driver piece is applied first.
    """
    T = driver.horizon if T is None else float(T)
    if T > driver.horizon * (1 + 1e-12) or T < 0:
        raise ValueError(f"T={T} outside [0, {driver.horizon}]")
    arr = np.asarray(z, dtype=complex)
    scalar = arr.ndim == 0
    h = np.atleast_1d(arr).astype(complex).copy()
    if np.any(np.abs(h) <= 1.0):
        raise ValueError("backward_flow needs |z| > 1")
    method = _resolve_method(driver, method)
    if T > 0:
        _, durations, angles = driver.pieces(0.0, T)
        for d, a in zip(durations[::-1], angles[::-1]):
            rot = complex(math.cos(a), math.sin(a))
            w = h * rot.conjugate()
            if method == "exact":
                w = slit_map(slit_length_from_capacity(d), w)
            else:
                w, _, _, _ = _ode_piece(w, d, -1.0, rtol, atol, step_fraction, 0.0)
            h = rot * w
    if normalize:
        h = h * math.exp(-T)
    return complex(h[0]) if scalar else h.reshape(arr.shape)


def whole_plane_driver(spec: DriverSpec, horizon: float, rng: np.random.Generator | None = None,
                       dt: float | None = None) -> DriverPath:
    """Driver on ``[-horizon, 0]`` stored as a path on ``[0, horizon]``.

    ``phi(s) = exp(i(U - X((-s)-)))`` is built from a forward sample ``X`` by
    time reversal; entry ``u`` of the returned path is ``phi(u - horizon)``.
    """
    rng = make_rng(0) if rng is None else rng
    x = sample_path(spec, horizon, dt=dt, rng=rng)
    return reverse_path(x, horizon, rng=rng).negated()


def whole_plane_approx(driver: DriverPath, z, t_n: float, method: str = "auto", **kw):
    """``L_n[phi](z)``: start at ``-t_n`` from ``e^{-t_n} z`` and evaluate at time 0.

    ``driver`` encodes ``phi`` on ``[-H, 0]`` as a path on ``[0, H]`` (see
    :func:`whole_plane_driver`); ``t_n`` must not exceed ``H``.
    """
    H = driver.horizon
    if not 0 <= t_n <= H * (1 + 1e-12):
        raise ValueError(f"t_n={t_n} outside [0, {H}]")
    t_n = min(float(t_n), H)
    if t_n == 0:
        arr = np.asarray(z, dtype=complex)
        return complex(arr) if arr.ndim == 0 else arr.copy()
    return backward_flow(driver.window(H - t_n, H), z, t_n, method=method, normalize=True, **kw)


def continuity_bound(T: float, rho: float, eps: float) -> float:
    """Grönwall bound on ``|L_T[phi](z) - L_T[psi](z)|`` for ``|z| = rho``.

    Valid when ``||phi - psi||_1 <= e^{-T} eps / 32``.  Overflow returns ``inf``.
    """
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    if eps < 0 or T < 0:
        raise ValueError("T and eps must be >= 0")
    if eps == 0:
        return 0.0
    lead = rho * rho / (rho - 1.0) ** 2
    expo = (4.0 * math.exp(T) * rho + 1.0) ** 2 * T / (rho - 1.0) ** 2
    log_val = math.log(lead) + expo + math.log(eps)
    return math.exp(log_val) if log_val < 700 else math.inf


def bound_epsilon(T: float, l1: float) -> float:
    """Smallest ``eps`` for which :func:`continuity_bound` covers an L1 distance ``l1``."""
    return 32.0 * math.exp(T) * l1


def swallow_time_on_slit(delta_tip: float) -> float:
    """Capacity time at which a constant driver's slit reaches length ``delta_tip``."""
    return math.log(capacity_factor(delta_tip))
