"""Monte Carlo ensembles and statistical checks of the model's distributional claims.

Every check draws from fixed, pre-registered seeds (``make_rng(master, i)``)
and returns a JSON-ready report with the stable keys ``test_id``,
``inputs``, ``statistics`` and ``verdict``.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import math
import time

import numpy as np
from scipy import stats as sps

from .conformal import SlitChain, chain_from_path, slit_length_from_capacity
from .driver import (DriverPath, DriverSpec, JumpModel, empirical_coefficient, make_rng,
                     sample_jump_angles, sample_path, sample_values, theoretical_coefficient,
                     wrap_angle)
from .hull import (HullBoundary, arc_lengths, boundary_length_series, box_counting_dimension,
                   cone_test, diameter, hausdorff_distance, rescale, trace_boundary)

FUNCTIONALS = ("diameter", "capacity", "events", "level", "cone", "dimension", "length")
DEFAULT_GRID_STEP = 1e-2


def _spec_dict(spec: DriverSpec) -> dict:
    return spec.to_dict()


def _report(test_id: str, inputs: dict, statistics: dict, passed: bool) -> dict:
    return {"test_id": test_id, "inputs": inputs, "statistics": statistics,
            "verdict": "pass" if passed else "fail"}


@dataclass(frozen=True)
class Simulation:
    """One simulated hull: driver path, slit chain and raw boundary."""

    spec: DriverSpec
    seed: int
    index: int
    T: float
    convention: str
    path: DriverPath
    chain: SlitChain
    boundary: HullBoundary | None


def simulate(spec: DriverSpec, T: float | None = None, seed: int = 0, index: int = 0,
             convention: str = "capacity-consistent", spacing_tol: float | None = None,
             relative_tol: float = 2e-3, max_points: int = 400_000, dt: float | None = None,
             random_rotation: bool = True, trace: bool = True) -> Simulation:
    """Simulate one hull.

    Continuous drivers are sampled on a grid (``dt``, default 0.01) and the
    hull of the resulting step driver is traced exactly; such boundaries are
    flagged approximate.  Without ``spacing_tol`` the boundary is refined to
    ``relative_tol`` times the capacity radius ``e^T``.
    """
    T = spec.horizon if T is None else float(T)
    if spec.is_continuous and dt is None:
        dt = DEFAULT_GRID_STEP
    rng = make_rng(seed, index)
    path = sample_path(spec, T, dt=dt, rng=rng, random_rotation=random_rotation)
    chain = chain_from_path(path, T, convention)
    boundary = None
    if trace:
        tol = spacing_tol if spacing_tol is not None else relative_tol * math.exp(chain.log_capacity)
        boundary = trace_boundary(chain, tol, max_points)
        prov = {"seed": seed, "index": index, "driver": spec.kind}
        boundary = HullBoundary(boundary.points, boundary.log_capacity, False, boundary.spacing_tol,
                                boundary.resolution, boundary.degraded, spec.is_continuous,
                                convention, dict(boundary.provenance, **prov))
    return Simulation(spec, seed, index, T, convention, path, chain, boundary)


def _functionals(sim: Simulation, names, options: dict) -> dict:
    out = {}
    resc = rescale(sim.boundary) if sim.boundary is not None else None
    for name in names:
        if name == "diameter":
            out["diameter"] = diameter(resc)
        elif name == "capacity":
            # capacity of the rescaled hull, identically one
            out["capacity"] = math.exp(sim.chain.log_capacity - resc.log_capacity) if resc else 1.0
        elif name == "events":
            out["events"] = len(sim.chain)
        elif name == "level":
            out["level"] = float(sim.path.angle(sim.T))
        elif name == "cone":
            hw = options.get("cone_half_width", 0.2)
            # cone around the driver's starting direction, tested in the rotated frame
            turned = replace(sim.boundary, points=sim.boundary.points * np.exp(-1j * sim.path.rotation))
            out["cone"] = cone_test(turned, -hw, hw)
        elif name == "dimension":
            bc = box_counting_dimension(resc)
            out["dimension"] = bc.slope
            out["dimension_r2"] = bc.r_squared
        elif name == "length":
            checkpoints = options.get("length_checkpoints", (len(sim.chain),))
            series = boundary_length_series(sim.chain)
            out["length"] = [float(series[k]) if k < series.size else None for k in checkpoints]
        else:
            raise ValueError(f"unknown functional {name!r}")
    return out


def _replicate(args) -> dict:
    spec, T, i, master_seed, names, options = args
    sim = simulate(spec, T, master_seed, i, trace=any(n in names for n in ("diameter", "cone", "dimension")),
                   **{k: v for k, v in options.items() if k in _SIM_KEYS})
    return {"index": i, "seed": [master_seed, i], "functionals": _functionals(sim, names, options)}


_SIM_KEYS = ("convention", "spacing_tol", "relative_tol", "max_points", "dt", "random_rotation")


@dataclass(frozen=True)
class EnsembleResult:
    """Per-replicate functional records in replicate order."""

    spec: DriverSpec
    T: float
    master_seed: int
    functionals: tuple
    options: dict
    records: list
    wall_clock: float = field(default=0.0, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def values(self, name: str) -> np.ndarray:
        return np.array([r["functionals"][name] for r in self.records], dtype=float)

    def to_records(self) -> list[dict]:
        """Header plus one dict per replicate (no timing data)."""
        head = {"type": "ensemble", "spec": _spec_dict(self.spec), "T": self.T,
                "master_seed": self.master_seed, "functionals": list(self.functionals),
                "options": dict(self.options), "n_replicates": len(self.records)}
        return [head] + [dict(r, type="replicate") for r in self.records]


def run_ensemble(spec: DriverSpec, T: float, n_replicates: int, functionals=("diameter",),
                 master_seed: int = 0, workers: int = 1, **options) -> EnsembleResult:
    """Independent replicates ``i = 0..n-1`` seeded by ``(master_seed, i)``.

    Results are folded in replicate order, so ``workers > 1`` (process pool)
    changes nothing but wall-clock time.
    """
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    names = tuple(functionals)
    for n in names:
        if n not in FUNCTIONALS:
            raise ValueError(f"unknown functional {n!r}")
    t0 = time.perf_counter()
    jobs = [(spec, float(T), i, int(master_seed), names, options) for i in range(n_replicates)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            records = list(ex.map(_replicate, jobs))
    else:
        records = [_replicate(j) for j in jobs]
    return EnsembleResult(spec, float(T), int(master_seed), names, dict(options), records,
                          time.perf_counter() - t0)


def ecf_test(samples, spec: DriverSpec, n_range=range(1, 6), t: float = 1.0,
             confidence: float = 0.9999, theoretical=None, band: float | None = None) -> dict:
    """Compare empirical Fourier coefficients of ``Y(t)`` with their closed forms.

    The band is ``z * sqrt(2/N)`` (each summand has modulus one) unless
    ``band`` is given.  ``theoretical`` may override the closed forms, e.g.
    with coefficients estimated from an independent run.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    N = samples.size
    if N == 0:
        raise ValueError("no samples")
    ns = [int(n) for n in n_range]
    z = float(sps.norm.ppf(0.5 + confidence / 2.0))
    width = z * math.sqrt(2.0 / N) if band is None else float(band)
    rows = []
    for j, n in enumerate(ns):
        emp = empirical_coefficient(samples, n)
        theo = theoretical_coefficient(spec, n, t) if theoretical is None else complex(theoretical[j])
        err = abs(emp - theo)
        rows.append({"n": n, "empirical": [emp.real, emp.imag], "theoretical": [complex(theo).real,
                     complex(theo).imag], "error": err, "margin": width - err, "pass": err < width})
    inputs = {"spec": _spec_dict(spec), "t": t, "N": N, "n": ns, "confidence": confidence,
              "band": width}
    return _report("ecf", inputs, {"coefficients": rows}, all(r["pass"] for r in rows))


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float


def ks_two_sample(a, b) -> KSResult:
    """Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    res = sps.ks_2samp(a, b, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))


def circular_align(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Wrap both samples around their pooled circular mean."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.exp(1j * a).sum() + np.exp(1j * b).sum()
    centre = math.atan2(s.imag, s.real) if abs(s) > 1e-12 * (a.size + b.size) else 0.0
    return wrap_angle(a - centre), wrap_angle(b - centre)


def circular_ks(a, b) -> KSResult:
    """KS on the wrapped coordinate after circular-mean alignment (an approximation)."""
    return ks_two_sample(*circular_align(a, b))


def _jump_paths(spec: DriverSpec, T: float, N: int, rng, jump_shift: float):
    """``N`` compound Poisson paths as flat arrays: owner, time, cumulative level."""
    counts = rng.poisson(spec.intensity * T, N)
    total = int(counts.sum())
    times = rng.uniform(0.0, T, total)
    jumps = sample_jump_angles(spec.jump_model, total, rng) + jump_shift
    owner = np.repeat(np.arange(N), counts)
    order = np.lexsort((times, owner))
    return counts, owner[order], times[order], jumps[order]


def _levels_at(counts, owner, times, jumps, t, left: bool):
    mask = times < t if left else times <= t
    return np.bincount(owner[mask], weights=jumps[mask], minlength=counts.size)


def reversal_test(spec: DriverSpec, T: float = 1.0, N: int = 10_000, checkpoints=(0.3, 0.7, 1.0),
                  master_seed: int = 0, batches: int = 10, level: float = 0.01,
                  required: int = 8, flip: bool = True, jump_shift: float = 0.0,
                  rotation: float = 0.0) -> dict:
    """Monte Carlo check that forward and time-reversed driving processes agree in law.

    Per batch, ``Y1(t) = U1 + X1(t)`` and ``Y2(t) = U2 - X2((T-t)-)`` are
    sampled ``N`` times (``flip=False`` drops the minus sign, a negative
    control).  At each checkpoint ``t*T`` the circular marginals ``Y(t)`` and
    the increments ``Y(t) - Y(0)`` are KS-compared; a batch passes when every
    p-value is at least ``level``.  ``jump_shift`` adds a constant to every
    jump, making the jump law asymmetric; ``rotation`` is added to both
    processes.
    """
    if spec.kind != "compound_poisson":
        raise ValueError("reversal_test needs a compound Poisson spec")
    sign = -1.0 if flip else 1.0
    batch_rows = []
    for b in range(batches):
        rng = make_rng(master_seed, b)
        p1 = _jump_paths(spec, T, N, rng, jump_shift)
        p2 = _jump_paths(spec, T, N, rng, jump_shift)
        u1 = rng.uniform(-math.pi, math.pi, N) + rotation
        u2 = rng.uniform(-math.pi, math.pi, N) + rotation
        y1_0 = u1
        y2_0 = u2 + sign * _levels_at(*p2, T, left=True)
        rows = []
        for c in checkpoints:
            t = c * T
            y1 = u1 + _levels_at(*p1, t, left=False)
            y2 = u2 + sign * _levels_at(*p2, T - t, left=True)
            km = circular_ks(y1, y2)
            ki = circular_ks(y1 - y1_0, y2 - y2_0)
            rows.append({"t": t, "marginal_D": km.statistic, "marginal_p": km.pvalue,
                         "increment_D": ki.statistic, "increment_p": ki.pvalue,
                         "pass": km.pvalue >= level and ki.pvalue >= level})
        batch_rows.append({"batch": b, "seed": [master_seed, b], "checkpoints": rows,
                           "pass": all(r["pass"] for r in rows)})
    n_pass = sum(r["pass"] for r in batch_rows)
    inputs = {"spec": _spec_dict(spec), "T": T, "N": N, "checkpoints": list(checkpoints),
              "master_seed": master_seed, "batches": batches, "level": level, "required": required,
              "flip": flip, "jump_shift": jump_shift, "rotation": rotation}
    return _report("reversal", inputs, {"batches": batch_rows, "passed_batches": n_pass},
                   n_pass >= required)


def _functional_at(path: DriverPath, t: float, functional: str, convention: str,
                   relative_tol: float) -> float:
    if functional == "capacity":
        return 1.0                      # rescaled hulls have capacity one by construction
    chain = chain_from_path(path, t, convention)
    if functional == "events":
        return float(len(chain))
    bd = trace_boundary(chain, relative_tol * math.exp(chain.log_capacity))
    if functional == "diameter":
        return diameter(rescale(bd))
    raise ValueError(f"unsupported functional {functional!r}")


def convergence_diagnostic(spec: DriverSpec, t_list, functional: str = "diameter", N: int = 200,
                           master_seed: int = 0, convention: str = "capacity-consistent",
                           relative_tol: float = 5e-3, dt: float | None = None) -> dict:
    """Pairwise KS distances between the laws of a rescaled-hull functional at several times.

    Replicate ``i`` samples one path on ``[0, max t]`` and evaluates the
    functional at every ``t``, so equal times give identical samples.
    """
    ts = [float(t) for t in t_list]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("t_list must be nondecreasing")
    if spec.is_continuous and dt is None:
        dt = DEFAULT_GRID_STEP
    values = np.empty((len(ts), N))
    for i in range(N):
        path = sample_path(spec, ts[-1], dt=dt, rng=make_rng(master_seed, i), random_rotation=True)
        for j, t in enumerate(ts):
            values[j, i] = _functional_at(path, t, functional, convention, relative_tol)
    k = len(ts)
    dist = np.zeros((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            dist[a, b] = dist[b, a] = ks_two_sample(values[a], values[b]).statistic
    inputs = {"spec": _spec_dict(spec), "t": ts, "functional": functional, "N": N,
              "master_seed": master_seed, "convention": convention}
    rep = _report("convergence", inputs, {"ks_distance": dist.tolist()}, True)
    rep["values"] = values
    return rep


def predicted_slit_length(T: float, convention: str = "capacity-consistent") -> float:
    """Length of the limiting slit for a constant driver run to capacity time ``T``."""
    return float(slit_length_from_capacity(T, convention))


def _segment(delta: float, spacing: float) -> np.ndarray:
    m = max(int(math.ceil(delta / spacing)), 1)
    return 1.0 + np.linspace(0.0, delta, m + 1)


def _limit_deterministic(params: dict, N: int, master_seed: int) -> dict:
    r = params.get("r", 0.999)
    lam = params.get("lambda", 20.0)
    T = params.get("T", 1.0)
    conv = params.get("convention", "capacity-consistent")
    hw = params.get("cone_half_width", 0.2)
    d_tol = params.get("d_tol", 0.1)
    required = params.get("required", math.ceil(0.8 * N))
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(r), lam, T)
    # the model's time T is capacity time only in the capacity-consistent convention
    chain_T = T
    delta = predicted_slit_length(chain_T, conv)
    rows = []
    for i in range(N):
        sim = simulate(spec, T, master_seed, i, conv, random_rotation=False,
                       spacing_tol=params.get("spacing_tol", 1e-3))
        pts = sim.boundary.points
        gamma = pts[np.abs(pts) > 1.0 + 1e-9]
        seg = _segment(delta, 1e-3)
        d_h = hausdorff_distance(gamma, seg) if gamma.size else math.inf
        cone = cone_test(sim.boundary, -hw, hw)
        rows.append({"seed": [master_seed, i], "events": len(sim.chain), "d_H": d_h, "cone": cone,
                     "pass": d_h < d_tol and cone})
    n_pass = sum(r_["pass"] for r_ in rows)
    inputs = {"kind": "deterministic", "r": r, "lambda": lam, "T": T, "convention": conv, "N": N,
              "master_seed": master_seed, "d_tol": d_tol, "cone_half_width": hw,
              "required": required, "predicted_delta": delta}
    return _report("limit_deterministic", inputs, {"replicates": rows, "passed": n_pass},
                   n_pass >= required)


def _limit_cauchy(params: dict, N: int, master_seed: int) -> dict:
    r = params.get("r", 0.99)
    t = params.get("t", 1.0)
    ns = list(params.get("n", (1, 2, 3)))
    tol = params.get("tol", 0.05)
    lam = 1.0 / (1.0 - r)
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(r), lam)
    y = sample_values(spec, t, N, make_rng(master_seed, 0))
    rows = []
    for n in ns:
        emp = empirical_coefficient(y, n)
        target = math.exp(-abs(n) * t)
        rows.append({"n": n, "empirical": [emp.real, emp.imag], "target": target,
                     "finite_r": theoretical_coefficient(spec, n, t), "error": abs(emp - target),
                     "pass": abs(emp - target) < tol})
    inputs = {"kind": "cauchy", "r": r, "lambda": lam, "t": t, "N": N, "n": ns, "tol": tol,
              "master_seed": master_seed}
    return _report("limit_cauchy", inputs, {"coefficients": rows}, all(x["pass"] for x in rows))


def _limit_sle(params: dict, N: int, master_seed: int) -> dict:
    gamma = params.get("gamma", 1e-3)
    c = params.get("c", 1.0)
    dt = params.get("dt", 0.1)
    var_tol = params.get("var_tol", 0.05)
    n_sigma = params.get("n_sigma", 4.0)
    lam = c / gamma
    spec = DriverSpec.compound_poisson(JumpModel.heat_kernel(gamma), lam)
    x = sample_values(spec, dt, N, make_rng(master_seed, 0))
    target = 2.0 * c * dt
    var = float(np.var(x, ddof=1))
    skew = float(sps.skew(x))
    kurt = float(sps.kurtosis(x))
    se_skew = math.sqrt(6.0 / N)
    se_kurt = math.sqrt(24.0 / N)
    checks = {"variance": abs(var / target - 1.0) <= var_tol,
              "skewness": abs(skew) <= n_sigma * se_skew,
              "kurtosis": abs(kurt) <= n_sigma * se_kurt}
    inputs = {"kind": "sle", "gamma": gamma, "c": c, "lambda": lam, "dt": dt, "N": N,
              "var_tol": var_tol, "n_sigma": n_sigma, "master_seed": master_seed}
    stats_ = {"variance": var, "target_variance": target, "skewness": skew,
              "excess_kurtosis": kurt, "skew_band": n_sigma * se_skew,
              "kurtosis_band": n_sigma * se_kurt, "checks": checks}
    return _report("limit_sle", inputs, stats_, all(checks.values()))


def limit_test(kind: str, params: dict | None = None, N: int | None = None,
               master_seed: int = 0) -> dict:
    """Scaling limits: ``deterministic`` (r -> 1), ``cauchy`` (Cauchy process), ``sle`` (Brownian)."""
    params = dict(params or {})
    if kind == "deterministic":
        return _limit_deterministic(params, 10 if N is None else N, master_seed)
    if kind == "cauchy":
        return _limit_cauchy(params, 100_000 if N is None else N, master_seed)
    if kind == "sle":
        return _limit_sle(params, 100_000 if N is None else N, master_seed)
    raise ValueError(f"unknown limit kind {kind!r}")
