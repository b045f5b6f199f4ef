"""Lévy driving processes on the unit circle.

A driving function is stored as an unwrapped cumulative angle ``Y(t)`` plus a
fixed rotation ``U``; the unimodular value ``exp(i(U + Y(t)))`` is only formed
on demand, so it has modulus one by construction.

Random streams
--------------
Every replicate owns one counter-based stream: ``numpy.random.Philox`` keyed
by ``SeedSequence(master_seed, spawn_key=(index,))``.  The mapping from
``(master_seed, index)`` to bits is fixed by numpy and stable across runs and
platforms, so a seed pins a path bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

TWO_PI = 2.0 * math.pi

JUMP_KINDS = ("poisson_kernel", "beta_mixture", "heat_kernel")
DRIVER_KINDS = ("compound_poisson", "cauchy", "brownian", "constant")


def make_rng(master_seed: int, index: int = 0) -> np.random.Generator:
    """Return the random stream of replicate ``index`` under ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))


def wrap_angle(x):
    """Wrap real angles into ``(-pi, pi]``."""
    x = np.asarray(x, dtype=float)
    out = math.pi - np.mod(math.pi - x, TWO_PI)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class JumpModel:
    """Law of a single jump of the compound Poisson driver.

    ``param`` is ``r`` in [0, 1) for the Poisson kernel, ``beta`` > 0 for the
    beta mixture of Poisson kernels and ``gamma`` > 0 for the heat kernel.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in JUMP_KINDS:
            raise ValueError(f"unknown jump model {self.kind!r}")
        p = float(self.param)
        if not math.isfinite(p):
            raise ValueError("jump parameter must be finite")
        if self.kind == "poisson_kernel" and not 0.0 <= p < 1.0:
            raise ValueError(f"poisson_kernel needs 0 <= r < 1, got {p}")
        if self.kind != "poisson_kernel" and p <= 0.0:
            raise ValueError(f"{self.kind} needs a positive parameter, got {p}")
        object.__setattr__(self, "param", p)

    @classmethod
    def poisson_kernel(cls, r: float) -> "JumpModel":
        return cls("poisson_kernel", r)

    @classmethod
    def beta_mixture(cls, beta: float) -> "JumpModel":
        return cls("beta_mixture", beta)

    @classmethod
    def heat_kernel(cls, gamma: float) -> "JumpModel":
        return cls("heat_kernel", gamma)

    def coefficient(self, n: int) -> float:
        """Fourier coefficient ``E[exp(i n X)]`` of one jump."""
        n = abs(int(n))
        if n == 0:
            return 1.0
        if self.kind == "poisson_kernel":
            return self.param ** n
        if self.kind == "beta_mixture":
            return self.param / (self.param + n)
        return math.exp(-self.param * n * n)

    def density(self, theta):
        """Density of the jump on ``(-pi, pi]``."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "poisson_kernel":
            r = self.param
            out = (1 - r * r) / (TWO_PI * (1 - 2 * r * np.cos(theta) + r * r))
            return out if out.ndim else float(out)
        if self.kind == "heat_kernel":
            # wrapped normal, variance 2*gamma; |k| <= 10 turns is below 1e-15
            s2 = 2.0 * self.param
            x = theta[..., None] + TWO_PI * np.arange(-10, 11)
            out = np.exp(-x * x / (2 * s2)).sum(axis=-1) / math.sqrt(TWO_PI * s2)
            return out if out.ndim else float(out)
        # mixture over r = s**(1/beta) of Poisson kernels; log-singular at 0
        b = self.param

        def one(th):
            s2 = 4.0 * math.sin(0.5 * th) ** 2
            if s2 == 0.0:
                return math.inf
            f = lambda x: b * x ** (b - 1) * (1 - x) * (1 + x) / ((1 - x) ** 2 + x * s2)
            return integrate.quad(f, 0.0, 1.0, limit=200)[0] / TWO_PI

        out = np.vectorize(one, otypes=[float])(theta)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class DriverSpec:
    """Driving process: compound Poisson, Cauchy, Brownian or constant."""

    kind: str
    jump_model: JumpModel | None = None
    intensity: float | None = None
    speed: float | None = None
    kappa: float | None = None
    angle: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        if self.kind not in DRIVER_KINDS:
            raise ValueError(f"unknown driver kind {self.kind!r}")
        if not (math.isfinite(self.horizon) and self.horizon >= 0):
            raise ValueError("horizon must be finite and >= 0")
        if self.kind == "compound_poisson":
            if self.jump_model is None:
                raise ValueError("compound_poisson needs a jump model")
            if self.intensity is None or not self.intensity > 0 or not math.isfinite(self.intensity):
                raise ValueError("intensity must be positive and finite")
        elif self.kind == "cauchy":
            if self.speed is None or not self.speed > 0 or not math.isfinite(self.speed):
                raise ValueError("cauchy speed must be positive and finite")
        elif self.kind == "brownian":
            if self.kappa is None or not self.kappa >= 0 or not math.isfinite(self.kappa):
                raise ValueError("brownian kappa must be >= 0 and finite")

    @classmethod
    def compound_poisson(cls, model: JumpModel, intensity: float, horizon: float = 1.0):
        return cls("compound_poisson", jump_model=model, intensity=float(intensity), horizon=horizon)

    @classmethod
    def cauchy(cls, speed: float, horizon: float = 1.0):
        return cls("cauchy", speed=float(speed), horizon=horizon)

    @classmethod
    def brownian(cls, kappa: float, horizon: float = 1.0):
        return cls("brownian", kappa=float(kappa), horizon=horizon)

    @classmethod
    def constant(cls, angle: float = 0.0, horizon: float = 1.0):
        return cls("constant", angle=float(angle), horizon=horizon)

    @property
    def is_continuous(self) -> bool:
        return self.kind in ("cauchy", "brownian")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "horizon": self.horizon}
        if self.kind == "compound_poisson":
            d.update(jump_kind=self.jump_model.kind, jump_param=self.jump_model.param,
                     intensity=self.intensity)
        elif self.kind == "cauchy":
            d["speed"] = self.speed
        elif self.kind == "brownian":
            d["kappa"] = self.kappa
        else:
            d["angle"] = self.angle
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DriverSpec":
        kind = d["kind"]
        horizon = float(d.get("horizon", 1.0))
        if kind == "compound_poisson":
            return cls.compound_poisson(JumpModel(d["jump_kind"], d["jump_param"]),
                                        d["intensity"], horizon)
        if kind == "cauchy":
            return cls.cauchy(d["speed"], horizon)
        if kind == "brownian":
            return cls.brownian(d["kappa"], horizon)
        return cls.constant(d.get("angle", 0.0), horizon)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DriverPath:
    """Right-continuous step path ``t -> U + Y(t)`` on ``[0, horizon]``.

    ``times`` are the breakpoints in ``(0, horizon]`` (jump times, or grid
    points ``j*step``) and ``levels[k] = Y(times[k])``; ``Y = 0`` before the
    first breakpoint.  ``step`` is ``None`` for an exact jump list.
    """

    times: np.ndarray
    levels: np.ndarray
    horizon: float
    rotation: float = 0.0
    step: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        times = _frozen(self.times).reshape(-1)
        levels = _frozen(self.levels).reshape(-1)
        if times.shape != levels.shape:
            raise ValueError("times and levels differ in length")
        if times.size:
            if times[0] <= 0 or np.any(np.diff(times) <= 0):
                raise ValueError("breakpoints must be strictly increasing in (0, T]")
            if times[-1] > self.horizon:
                raise ValueError("breakpoint beyond the horizon")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "rotation", float(self.rotation))

    def __eq__(self, other):
        if not isinstance(other, DriverPath):
            return NotImplemented
        return (self.horizon == other.horizon and self.rotation == other.rotation and self.step == other.step
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.levels, other.levels))

    __hash__ = None

    @property
    def kind(self) -> str:
        return "jumps" if self.step is None else "grid"

    @property
    def n_breaks(self) -> int:
        return int(self.times.size)

    def value(self, t):
        """``Y(t)`` with right-continuous lookup."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right") - 1
        out = np.where(idx >= 0, self.levels[np.maximum(idx, 0)] if self.levels.size else 0.0, 0.0)
        return out if out.ndim else float(out)

    def left_value(self, t):
        """``Y(t-)``; equal to ``Y(0) = 0`` at ``t = 0``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left") - 1
        out = np.where(idx >= 0, self.levels[np.maximum(idx, 0)] if self.levels.size else 0.0, 0.0)
        return out if out.ndim else float(out)

    def angle(self, t):
        return self.rotation + self.value(t)

    def xi(self, t):
        """Unimodular driving value ``exp(i(U + Y(t)))``."""
        return np.exp(1j * np.asarray(self.angle(t)))

    def jumps(self) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoint times and jump sizes ``Y(t_k) - Y(t_k-)``."""
        sizes = np.diff(self.levels, prepend=0.0)
        return self.times.copy(), sizes

    def pieces(self, t0: float = 0.0, t1: float | None = None):
        """Constant pieces of the driver on ``[t0, t1)``.

        Returns ``(starts, durations, angles)``; zero-length pieces are dropped.
        """
        t1 = self.horizon if t1 is None else float(t1)
        if t1 > self.horizon * (1 + 1e-12) or t0 < 0 or t1 < t0:
            raise ValueError(f"window [{t0}, {t1}] outside [0, {self.horizon}]")
        inner = self.times[(self.times > t0) & (self.times < t1)]
        edges = np.concatenate(([t0], inner, [t1]))
        starts = edges[:-1]
        durations = np.diff(edges)
        keep = durations > 0
        starts = starts[keep]
        return starts, durations[keep], self.rotation + np.asarray(self.value(starts), dtype=float)

    def window(self, t0: float, t1: float) -> "DriverPath":
        """Restriction to ``[t0, t1]`` re-based to start at time 0 with ``Y(0)=0``."""
        if not 0 <= t0 <= t1 <= self.horizon:
            raise ValueError(f"window [{t0}, {t1}] outside [0, {self.horizon}]")
        base = self.value(t0)
        sel = (self.times > t0) & (self.times <= t1)
        return DriverPath(self.times[sel] - t0, self.levels[sel] - base, t1 - t0,
                          rotation=self.rotation + base, step=self.step, meta=dict(self.meta))

    def negated(self) -> "DriverPath":
        """The path ``U - Y(t)``."""
        return DriverPath(self.times, -self.levels, self.horizon, self.rotation, self.step,
                          meta=dict(self.meta))

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "levels": self.levels.tolist(),
                "horizon": self.horizon, "rotation": self.rotation, "step": self.step}

    @classmethod
    def from_dict(cls, d: dict) -> "DriverPath":
        return cls(d["times"], d["levels"], d["horizon"], d.get("rotation", 0.0), d.get("step"))


def mobius_pushforward(u, r: float):
    """Push a uniform angle ``u`` through the disk automorphism sending 0 to ``r``.

    The image ``arg((e^{iu} + r) / (1 + r e^{iu}))`` has the Poisson kernel
    density at ``r``.
    """
    e = np.exp(1j * np.asarray(u, dtype=float))
    out = np.angle((e + r) / (1.0 + r * e))
    return out if out.ndim else float(out)


def sample_jump_angles(model: JumpModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` i.i.d. jumps in ``(-pi, pi]``."""
    if model.kind == "heat_kernel":
        return wrap_angle(rng.normal(0.0, math.sqrt(2.0 * model.param), size))
    u = rng.uniform(-math.pi, math.pi, size)
    if model.kind == "poisson_kernel":
        r = model.param
    else:
        r = rng.uniform(0.0, 1.0, size) ** (1.0 / model.param)
    return np.asarray(mobius_pushforward(u, r), dtype=float).reshape(-1)


def sample_jump_angle(model: JumpModel, rng: np.random.Generator) -> float:
    return float(sample_jump_angles(model, 1, rng)[0])


def sample_path(spec: DriverSpec, T: float | None = None, dt: float | None = None,
                rng: np.random.Generator | None = None, random_rotation: bool = False) -> DriverPath:
    """Sample one driving path on ``[0, T]``.

    Compound Poisson paths are exact jump lists (``dt`` is ignored).  Cauchy
    and Brownian paths live on the grid ``j*dt`` with exact wrapped-Cauchy or
    normal increments.  With ``random_rotation`` the rotation ``U`` is drawn
    uniformly from ``[-pi, pi)``; otherwise it is 0 (or the constant angle).
    """
    T = spec.horizon if T is None else float(T)
    if not (math.isfinite(T) and T >= 0):
        raise ValueError("T must be finite and >= 0")
    if rng is None:
        rng = make_rng(0)
    meta = {"spec": spec.to_dict()}
    if spec.kind == "constant":
        rot = spec.angle + (rng.uniform(-math.pi, math.pi) if random_rotation else 0.0)
        return DriverPath([], [], T, rotation=rot, meta=meta)

    if spec.kind == "compound_poisson":
        lam = spec.intensity
        times = []
        t = rng.exponential(1.0 / lam)
        while t <= T:
            times.append(t)
            t += rng.exponential(1.0 / lam)
        jumps = sample_jump_angles(spec.jump_model, len(times), rng)
        levels = np.cumsum(jumps)
        step = None
    else:
        if dt is None or not dt > 0:
            raise ValueError(f"{spec.kind} driver needs a grid step dt > 0")
        m = int(math.floor(T / dt + 1e-9))
        times = dt * np.arange(1, m + 1)
        if spec.kind == "cauchy":
            r = math.exp(-spec.speed * dt)
            incr = np.asarray(mobius_pushforward(rng.uniform(-math.pi, math.pi, m), r)).reshape(-1)
        else:
            incr = wrap_angle(rng.normal(0.0, math.sqrt(spec.kappa * dt), m))
        levels = np.cumsum(incr)
        step = float(dt)
    rot = rng.uniform(-math.pi, math.pi) if random_rotation else 0.0
    return DriverPath(times, levels, T, rotation=rot, step=step, meta=meta)


def sample_values(spec: DriverSpec, t: float, size: int, rng: np.random.Generator,
                  dt: float | None = None) -> np.ndarray:
    """Draw ``size`` independent copies of ``Y(t)`` in one vectorized pass.

    Equal in law to ``sample_path(spec, t, dt).value(t)`` but much faster for
    large ``size``.  Continuous variants without ``dt`` draw the marginal
    directly (wrapped Cauchy with ``r = exp(-speed*t)``, or a normal).
    """
    if spec.kind == "constant":
        return np.zeros(size)
    if spec.kind == "compound_poisson":
        counts = rng.poisson(spec.intensity * t, size)
        jumps = sample_jump_angles(spec.jump_model, int(counts.sum()), rng)
        owner = np.repeat(np.arange(size), counts)
        return np.bincount(owner, weights=jumps, minlength=size)
    if dt is None:
        m, h = 1, t
    else:
        m = int(math.floor(t / dt + 1e-9))
        h = dt
    if spec.kind == "cauchy":
        r = math.exp(-spec.speed * h)
        incr = np.asarray(mobius_pushforward(rng.uniform(-math.pi, math.pi, (size, m)), r))
    else:
        incr = wrap_angle(rng.normal(0.0, math.sqrt(spec.kappa * h), (size, m)))
    return incr.reshape(size, m).sum(axis=1)


def theoretical_coefficient(spec: DriverSpec, n: int, t: float) -> float:
    """Fourier coefficient ``a_{Y(t)}(n) = E[exp(i n Y(t))]``."""
    n = abs(int(n))
    if n == 0 or spec.kind == "constant":
        return 1.0
    if spec.kind == "compound_poisson":
        lam, model = spec.intensity, spec.jump_model
        if model.kind == "beta_mixture":
            return math.exp(-lam * t * n / (model.param + n))
        return math.exp(lam * t * (model.coefficient(n) - 1.0))
    if spec.kind == "cauchy":
        return math.exp(-spec.speed * t * n)
    return math.exp(-spec.kappa * t * n * n / 2.0)


def empirical_coefficient(samples, n: int) -> complex:
    """Monte Carlo estimate ``mean(exp(i n Y_j))``."""
    s = np.asarray(samples, dtype=float).reshape(-1)
    if s.size == 0:
        raise ValueError("empirical_coefficient needs at least one sample")
    return complex(np.exp(1j * n * s).mean())


def reverse_path(path: DriverPath, T: float | None = None,
                 rng: np.random.Generator | None = None) -> DriverPath:
    """Time reversal ``t -> Y((T-t)-) - Y(T-)`` on ``[0, T]``.

    A jump of size ``x`` at time ``s < T`` becomes a jump of size ``-x`` at
    time ``T - s``; a jump exactly at ``T`` is not seen by the left limit and
    disappears.  The reversed path has the law of ``-Y``.  With ``rng`` the
    rotation is a fresh uniform angle, otherwise the original one is kept.
    """
    T = path.horizon if T is None else float(T)
    if T > path.horizon * (1 + 1e-12):
        raise ValueError(f"T={T} exceeds the path horizon {path.horizon}")
    times, sizes = path.jumps()
    keep = times < T
    new_times = (T - times[keep])[::-1]
    new_sizes = (-sizes[keep])[::-1]
    step = path.step
    if step is not None and abs(T / step - round(T / step)) > 1e-9:
        step = None
    rot = rng.uniform(-math.pi, math.pi) if rng is not None else path.rotation
    return DriverPath(new_times, np.cumsum(new_sizes), T, rotation=rot, step=step,
                      meta=dict(path.meta, reversed=True))


def l1_distance(a: DriverPath, b: DriverPath, T: float | None = None) -> float:
    """``int_0^T |xi_a(t) - xi_b(t)| dt`` for two step paths, computed exactly."""
    T = min(a.horizon, b.horizon) if T is None else float(T)
    edges = np.union1d(np.concatenate(([0.0, T], a.times, b.times)), [])
    edges = edges[(edges >= 0) & (edges <= T)]
    starts, ends = edges[:-1], edges[1:]
    diff = np.abs(a.xi(starts) - b.xi(starts))
    return float(np.sum(diff * (ends - starts)))
