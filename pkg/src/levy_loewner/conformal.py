"""Exterior slit maps and their rotated compositions.

``h_delta`` maps ``{|z| > 1}`` onto ``{|z| > 1}`` minus the radial slit
``[1, 1 + delta]``.  It is built as ``J^{-1} o A o J`` with the Joukowski map
``J(z) = (z + 1/z)/2``, the affine stretch ``A(w) = ((b+1)w + (b-1))/2`` of
``[-1, 1]`` onto ``[-1, b]`` and ``b = J(1 + delta)``.  All three factors are
evaluated through ``J - 1`` and ``J + 1`` directly, which keeps full relative
precision next to both branch points.

A chain ``f_n = h_1 o ... o h_n`` (event 1 outermost) is the conformal map of
the compound Poisson Loewner evolution at its ``n``-th event time.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .driver import DriverPath, DriverSpec, make_rng, sample_jump_angles, wrap_angle

CONVENTIONS = ("capacity-consistent", "paper")


class ChainError(ArithmeticError):
    """A point left the exterior disk while a chain was being evaluated."""

    def __init__(self, message: str, event_index: int | None = None):
        super().__init__(message)
        self.event_index = event_index


def _check_convention(convention: str) -> str:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    return convention


def _b_minus_one(delta):
    return delta * delta / (2.0 * (1.0 + delta))


def capacity_factor(delta):
    """Leading coefficient ``1 + delta^2 / (4 (1 + delta))`` of ``h_delta`` at infinity."""
    delta = np.asarray(delta, dtype=float)
    out = 1.0 + delta * delta / (4.0 * (1.0 + delta))
    return out if out.ndim else float(out)


def log_capacity(delta):
    delta = np.asarray(delta, dtype=float)
    out = np.log1p(delta * delta / (4.0 * (1.0 + delta)))
    return out if out.ndim else float(out)


def slit_length_from_capacity(tau, convention: str = "capacity-consistent"):
    """Slit length added during a constant-driver interval of length ``tau``.

    ``"capacity-consistent"`` solves ``capacity_factor(delta) = e^tau`` so a
    chain matches the Loewner flow in capacity time.  ``"paper"`` uses
    ``2 e^{2 tau} (1 + sqrt(1 - e^{-2 tau})) - 2``, whose capacity factor is
    ``e^{2 tau}``.
    """
    _check_convention(convention)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("waiting time must be >= 0")
    s = tau if convention == "capacity-consistent" else 2.0 * tau
    out = 2.0 * np.expm1(s) + 2.0 * np.exp(s) * np.sqrt(-np.expm1(-s))
    return out if out.ndim else float(out)


def capacity_increment(tau, convention: str = "capacity-consistent"):
    """Capacity exponent added by one event of waiting time ``tau``."""
    _check_convention(convention)
    tau = np.asarray(tau, dtype=float)
    out = tau if convention == "capacity-consistent" else 2.0 * tau
    return out if out.ndim else float(out)


def _slit_core(delta: float, z: np.ndarray, deriv: bool):
    bm1 = _b_minus_one(delta)
    b1 = 2.0 + bm1
    p = (z - 1.0) ** 2 / (2.0 * z)          # J(z) - 1
    q = (z + 1.0) ** 2 / (2.0 * z)          # J(z) + 1
    P = 0.5 * (b1 * p + 2.0 * bm1)          # A(J(z)) - 1
    Q = 0.5 * b1 * q                        # A(J(z)) + 1
    s = np.sqrt(P) * np.sqrt(Q)
    h = 0.5 * (P + Q) + s
    if not deriv:
        return h, None
    with np.errstate(divide="ignore", invalid="ignore"):
        d = h / s * (0.5 * b1) * ((z - 1.0) * (z + 1.0) / (2.0 * z * z))
    return h, d


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    return arr, arr.ndim == 0


def _check_exterior(z: np.ndarray):
    if np.any(np.abs(z) < 1.0):
        raise ValueError("slit maps are defined on |z| >= 1")


def slit_map(delta: float, z):
    """``h_delta(z)`` for ``|z| >= 1``."""
    if delta < 0:
        raise ValueError("slit length must be >= 0")
    arr, scalar = _as_complex(z)
    _check_exterior(arr)
    if delta == 0:
        out = arr.copy()
    else:
        out, _ = _slit_core(float(delta), arr, False)
    return complex(out) if scalar else out


def slit_map_deriv(delta: float, z):
    """``h_delta'(z)`` by the chain rule through ``J``, ``A`` and ``J^{-1}``."""
    if delta < 0:
        raise ValueError("slit length must be >= 0")
    arr, scalar = _as_complex(z)
    _check_exterior(arr)
    if delta == 0:
        out = np.ones_like(arr)
    else:
        _, out = _slit_core(float(delta), arr, True)
    return complex(out) if scalar else out


def inverse_slit_map(delta: float, w):
    """``h_delta^{-1}(w)`` for ``w`` off the slit; slit points land on the circle."""
    arr, scalar = _as_complex(w)
    if delta == 0:
        out = arr.copy()
    else:
        bm1 = _b_minus_one(delta)
        b1 = 2.0 + bm1
        p = (arr - 1.0) ** 2 / (2.0 * arr)
        q = (arr + 1.0) ** 2 / (2.0 * arr)
        P = 2.0 * (p - bm1) / b1
        Q = 2.0 * q / b1
        out = 0.5 * (P + Q) + np.sqrt(P) * np.sqrt(Q)
    return complex(out) if scalar else out


def rotated_slit_map(theta: float, delta: float, z):
    """``e^{i theta} h_delta(e^{-i theta} z)``: slit attached at angle ``theta``."""
    rot = complex(math.cos(theta), math.sin(theta))
    arr, scalar = _as_complex(z)
    out = rot * slit_map(delta, arr * rot.conjugate())
    return complex(out) if scalar else out


def rotated_slit_map_deriv(theta: float, delta: float, z):
    rot = complex(math.cos(theta), math.sin(theta))
    arr, scalar = _as_complex(z)
    out = slit_map_deriv(delta, arr * rot.conjugate())
    return complex(out) if scalar else out


def circle_slit_map(theta: float, delta: float, phi: np.ndarray):
    """Boundary values of ``h_{theta,delta}`` at ``e^{i phi}``.

    Returns ``(on_circle, angle, point)``: images that stay on the unit circle
    are reported by their exact angle, images on the new slit as complex
    points.  Working with ``1 - cos`` keeps precision for ``phi`` near
    ``theta``.
    """
    psi = wrap_angle(np.asarray(phi, dtype=float) - theta)
    psi = np.atleast_1d(psi)
    bm1 = _b_minus_one(delta)
    b1 = 2.0 + bm1
    u = 2.0 * np.sin(0.5 * psi) ** 2          # 1 - cos(psi)
    xm1 = bm1 - 0.5 * b1 * u                  # A(cos psi) - 1
    on = xm1 <= 0.0
    angle = np.full(psi.shape, np.nan)
    point = np.full(psi.shape, np.nan + 0j)
    one_minus_x = -xm1[on]
    half = np.sqrt(np.clip(0.5 * one_minus_x, 0.0, 1.0))
    # psi = 0 gives the tip, never the circle, so sign(0) cannot occur here
    angle[on] = theta + np.sign(psi[on]) * 2.0 * np.arcsin(half)
    x = 1.0 + xm1[~on]
    point[~on] = complex(math.cos(theta), math.sin(theta)) * (x + np.sqrt(xm1[~on] * (x + 1.0)))
    return on, angle, point


@dataclass(frozen=True)
class SlitEvent:
    """One growth event: slit at ``theta`` of length ``delta`` after waiting ``tau``."""

    theta: float
    delta: float
    tau: float
    c: float


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SlitChain:
    """Ordered slit events; ``f_n = h_{theta_1,delta_1} o ... o h_{theta_n,delta_n}``.

    The capacity is kept as the log-space total ``log_capacity = sum(c_k)``.
    """

    thetas: np.ndarray
    deltas: np.ndarray
    taus: np.ndarray
    caps: np.ndarray
    convention: str = "capacity-consistent"

    def __post_init__(self):
        _check_convention(self.convention)
        arrs = [_ro(getattr(self, k)) for k in ("thetas", "deltas", "taus", "caps")]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("event arrays differ in length")
        if np.any(arrs[1] < 0) or np.any(arrs[2] < 0):
            raise ValueError("slit lengths and waiting times must be >= 0")
        for k, a in zip(("thetas", "deltas", "taus", "caps"), arrs):
            object.__setattr__(self, k, a)

    def __eq__(self, other):
        if not isinstance(other, SlitChain):
            return NotImplemented
        return (self.convention == other.convention
                and np.array_equal(self.thetas, other.thetas)
                and np.array_equal(self.deltas, other.deltas)
                and np.array_equal(self.taus, other.taus)
                and np.array_equal(self.caps, other.caps))

    __hash__ = None

    @classmethod
    def from_waits(cls, thetas, taus, convention: str = "capacity-consistent") -> "SlitChain":
        taus = np.asarray(taus, dtype=float)
        return cls(wrap_angle(np.asarray(thetas, dtype=float)).reshape(-1),
                   np.atleast_1d(slit_length_from_capacity(taus, convention)),
                   taus, np.atleast_1d(capacity_increment(taus, convention)), convention)

    @classmethod
    def from_events(cls, events, convention: str = "capacity-consistent") -> "SlitChain":
        events = list(events)
        return cls([e.theta for e in events], [e.delta for e in events],
                   [e.tau for e in events], [e.c for e in events], convention)

    @classmethod
    def empty(cls, convention: str = "capacity-consistent") -> "SlitChain":
        return cls([], [], [], [], convention)

    def __len__(self) -> int:
        return int(self.thetas.size)

    @property
    def events(self) -> list[SlitEvent]:
        return [SlitEvent(float(a), float(b), float(c), float(d))
                for a, b, c, d in zip(self.thetas, self.deltas, self.taus, self.caps)]

    @property
    def log_capacity(self) -> float:
        return float(np.sum(self.caps))

    def cumulative_log_capacity(self) -> np.ndarray:
        """``T_k`` for ``k = 0..n``."""
        return np.concatenate(([0.0], np.cumsum(self.caps)))

    def prefix(self, k: int) -> "SlitChain":
        return SlitChain(self.thetas[:k], self.deltas[:k], self.taus[:k], self.caps[:k],
                         self.convention)


def chain_from_path(path: DriverPath, T: float | None = None,
                    convention: str = "capacity-consistent") -> SlitChain:
    """Slit chain equivalent to the step driver ``path`` on ``[0, T]``.

    Each constant piece of the driver becomes one event whose waiting time is
    the piece's duration; the earliest piece is the outermost map.
    """
    _, durations, angles = path.pieces(0.0, T)
    return SlitChain.from_waits(angles, durations, convention)


def sample_chain(spec: DriverSpec, n_events: int, rng: np.random.Generator | None = None,
                 convention: str = "capacity-consistent", random_rotation: bool = False) -> SlitChain:
    """Chain of the first ``n_events`` events of a compound Poisson driver.

    Event ``k`` waits ``tau_k ~ Exp(lambda)`` and sits at the driver angle
    ``U + X_1 + ... + X_{k-1}`` that holds during that wait.
    """
    if spec.kind != "compound_poisson":
        raise ValueError("sample_chain needs a compound_poisson spec")
    rng = make_rng(0) if rng is None else rng
    taus = rng.exponential(1.0 / spec.intensity, n_events)
    jumps = sample_jump_angles(spec.jump_model, max(n_events - 1, 0), rng)
    rot = rng.uniform(-math.pi, math.pi) if random_rotation else 0.0
    angles = rot + np.concatenate(([0.0], np.cumsum(jumps)))[:n_events]
    return SlitChain.from_waits(angles, taus, convention)


def _apply_chain(chain: SlitChain, z: np.ndarray, depth: int, deriv: bool):
    d = np.ones_like(z) if deriv else None
    for k in range(depth - 1, -1, -1):
        delta = float(chain.deltas[k])
        if delta == 0.0:
            continue
        theta = float(chain.thetas[k])
        rot = complex(math.cos(theta), math.sin(theta))
        w = z * rot.conjugate()
        h, hd = _slit_core(delta, w, deriv)
        z = rot * h
        if deriv:
            d = d * hd
        if np.any(np.abs(z) < 1.0 - 1e-12) or not np.all(np.isfinite(z)):
            raise ChainError(f"point left the exterior disk at event {k}", event_index=k)
    return z, d


def _prepare(chain: SlitChain, z, depth):
    arr, scalar = _as_complex(z)
    arr = np.atleast_1d(arr).astype(complex)
    if np.any(np.abs(arr) < 1.0):
        raise ValueError("chain maps are evaluated on |z| >= 1")
    depth = len(chain) if depth is None else int(depth)
    if not 0 <= depth <= len(chain):
        raise ValueError(f"depth {depth} outside 0..{len(chain)}")
    return arr, scalar, depth


def chain_eval(chain: SlitChain, z, depth: int | None = None):
    """``f_depth(z)``: the first ``depth`` events (all by default), innermost first."""
    arr, scalar, depth = _prepare(chain, z, depth)
    out, _ = _apply_chain(chain, arr, depth, False)
    return complex(out[0]) if scalar else out.reshape(np.shape(z))


def chain_deriv(chain: SlitChain, z, depth: int | None = None):
    """``f_depth'(z)`` as the product of the per-event derivatives."""
    arr, scalar, depth = _prepare(chain, z, depth)
    _, d = _apply_chain(chain, arr, depth, True)
    return complex(d[0]) if scalar else d.reshape(np.shape(z))


def chain_eval_deriv(chain: SlitChain, z, depth: int | None = None):
    arr, scalar, depth = _prepare(chain, z, depth)
    out, d = _apply_chain(chain, arr, depth, True)
    if scalar:
        return complex(out[0]), complex(d[0])
    return out.reshape(np.shape(z)), d.reshape(np.shape(z))


def chain_eval_circle(chain: SlitChain, phi, depth: int | None = None) -> np.ndarray:
    """Boundary values ``f_depth(e^{i phi})`` with the side of every cut resolved exactly."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    depth = len(chain) if depth is None else int(depth)
    on = np.ones(phi.shape, dtype=bool)
    ang = phi.copy()
    z = np.full(phi.shape, np.nan + 0j)
    for k in range(depth - 1, -1, -1):
        theta, delta = float(chain.thetas[k]), float(chain.deltas[k])
        if delta == 0.0:
            continue
        if np.any(~on):
            rot = complex(math.cos(theta), math.sin(theta))
            z[~on] = rot * _slit_core(delta, z[~on] * rot.conjugate(), False)[0]
        if np.any(on):
            idx = np.flatnonzero(on)
            still, a, p = circle_slit_map(theta, delta, ang[idx])
            ang[idx[still]] = a[still]
            left = idx[~still]
            z[left] = p[~still]
            on[left] = False
    return np.where(on, np.exp(1j * ang), z)


def chain_capacity(chain: SlitChain) -> float:
    """``e^{T_n}``, the leading coefficient of the chain at infinity."""
    return math.exp(chain.log_capacity)
