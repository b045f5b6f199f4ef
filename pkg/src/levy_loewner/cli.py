"""Command line: ``levy-loewner {simulate,ensemble,verify,dimension,render,sweep}``.

Settings come from an optional INI file (section ``[run]``, flat keys) and
are overridden by flags.  Data goes to files in the output directory
(``--outdir``, else ``$LEVY_LOEWNER_OUTDIR``, else ``.``); logs go to stderr.
Exit status: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import configparser
from dataclasses import asdict, dataclass, fields
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .conformal import CONVENTIONS
from .driver import DriverSpec, JumpModel, make_rng, sample_values
from .hull import box_counting_dimension, rescale
from . import io as lio
from . import stats

log = logging.getLogger("levy_loewner")

MODELS = ("poisson", "beta", "heat", "cauchy", "brownian", "constant")
SUITES = ("fourier", "reversal", "cauchy", "sle", "deterministic", "distortion")
ENV_OUTDIR = "LEVY_LOEWNER_OUTDIR"


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    model: str = "poisson"
    r: float = 0.0
    beta: float = 1.0
    gamma: float = 0.1
    lam: float = 10.0
    kappa: float = 2.0
    speed: float = 1.0
    angle: float = 0.0
    T: float = 1.0
    dt: float = 0.01
    convention: str = "capacity-consistent"
    spacing_tol: float = 0.0            # 0 selects relative_tol * e^T
    relative_tol: float = 2e-3
    max_points: int = 400_000
    ensemble_size: int = 10
    seed: int = 0
    outdir: str = ""
    formats: str = "csv,jsonl,json"

    def validate(self) -> "RunConfig":
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        if not (self.T >= 0 and math.isfinite(self.T)):
            raise ValueError("T must be finite and >= 0")
        if self.ensemble_size < 1 or self.max_points < 16:
            raise ValueError("ensemble_size >= 1 and max_points >= 16 required")
        self.to_spec()
        return self

    def to_spec(self) -> DriverSpec:
        if self.model == "poisson":
            return DriverSpec.compound_poisson(JumpModel.poisson_kernel(self.r), self.lam, self.T)
        if self.model == "beta":
            return DriverSpec.compound_poisson(JumpModel.beta_mixture(self.beta), self.lam, self.T)
        if self.model == "heat":
            return DriverSpec.compound_poisson(JumpModel.heat_kernel(self.gamma), self.lam, self.T)
        if self.model == "cauchy":
            return DriverSpec.cauchy(self.speed, self.T)
        if self.model == "brownian":
            return DriverSpec.brownian(self.kappa, self.T)
        return DriverSpec.constant(self.angle, self.T)

    def to_ini(self) -> str:
        lines = ["[run]"]
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, values: dict, base: "RunConfig | None" = None) -> "RunConfig":
        cfg = RunConfig(**asdict(base)) if base is not None else cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kind = types[key]
            val = raw
            if isinstance(raw, str) and kind != "str":
                val = int(raw) if kind == "int" else float(raw)
            elif kind == "float":
                val = float(raw)
            elif kind == "int":
                val = int(raw)
            setattr(cfg, key, val)
        return cfg

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        if "run" not in cp:
            raise ValueError("config needs a [run] section")
        return cls.from_mapping(dict(cp["run"])).validate()

    def record(self) -> dict:
        """Config as embedded in outputs; the output location is left out so
        reruns into different directories stay byte-identical."""
        d = asdict(self)
        d.pop("outdir")
        return d

    def output_dir(self) -> Path:
        d = Path(self.outdir or os.environ.get(ENV_OUTDIR, "") or ".")
        d.mkdir(parents=True, exist_ok=True)
        return d

    def stem(self) -> str:
        return f"{self.model}_seed{self.seed}"

    def sim_options(self) -> dict:
        opts = {"convention": self.convention, "relative_tol": self.relative_tol,
                "max_points": self.max_points}
        if self.spacing_tol > 0:
            opts["spacing_tol"] = self.spacing_tol
        if self.model in ("cauchy", "brownian"):
            opts["dt"] = self.dt
        return opts


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class UsageError(Exception):
    pass


_FLAG_MAP = {"model": "model", "r": "r", "beta": "beta", "gamma": "gamma", "lam": "lam",
             "kappa": "kappa", "speed": "speed", "angle": "angle", "T": "T", "dt": "dt",
             "convention": "convention", "spacing_tol": "spacing_tol",
             "relative_tol": "relative_tol", "max_points": "max_points", "n": "ensemble_size",
             "seed": "seed", "outdir": "outdir", "formats": "formats"}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("run configuration")
    g.add_argument("--config", help="INI file with a [run] section")
    g.add_argument("--model", choices=MODELS)
    g.add_argument("--r", type=float, help="Poisson-kernel parameter")
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lambda", dest="lam", type=float, help="jump intensity")
    g.add_argument("--kappa", type=float)
    g.add_argument("--speed", type=float)
    g.add_argument("--angle", type=float)
    g.add_argument("--T", type=float, help="horizon (capacity time)")
    g.add_argument("--dt", type=float, help="grid step of continuous drivers")
    g.add_argument("--convention", choices=CONVENTIONS)
    g.add_argument("--spacing-tol", dest="spacing_tol", type=float)
    g.add_argument("--relative-tol", dest="relative_tol", type=float)
    g.add_argument("--max-points", dest="max_points", type=int)
    g.add_argument("--n", type=int, help="ensemble size / replicate count")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--outdir")
    g.add_argument("--formats", help="comma list out of csv,jsonl,json,svg")
    g.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="levy-loewner", description="Loewner hulls driven by Lévy processes.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="one hull: boundary CSV, chain JSONL, metadata")
    e = sub.add_parser("ensemble", parents=[common], help="replicate functionals as JSONL")
    e.add_argument("--functionals", default="diameter,events")
    e.add_argument("--workers", type=int, default=1)
    v = sub.add_parser("verify", parents=[common], help="statistical checks")
    v.add_argument("--suite", action="append", choices=SUITES + ("all",), required=True)
    v.add_argument("--samples", type=int, help="sample size of scalar tests")
    d = sub.add_parser("dimension", parents=[common], help="box-counting report")
    d.add_argument("--boundary", help="boundary CSV (default: simulate one)")
    d.add_argument("--scale-min", type=float)
    d.add_argument("--scale-max", type=float)
    d.add_argument("--n-scales", type=int, default=12)
    rd = sub.add_parser("render", parents=[common], help="boundary CSV -> SVG")
    rd.add_argument("--boundary", help="boundary CSV (default: simulate one)")
    rd.add_argument("--rescaled", action="store_true")
    rd.add_argument("--out")
    s = sub.add_parser("sweep", parents=[common], help="grid over (r, lambda) or (gamma, lambda)")
    s.add_argument("--r-values")
    s.add_argument("--gamma-values")
    s.add_argument("--lambda-values", required=True)
    return p


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def resolve_config(args) -> tuple[RunConfig, set]:
    """Config file values overridden by flags; also returns the explicitly set keys."""
    cfg = RunConfig()
    explicit = set()
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
        cfg = RunConfig.from_ini(text)
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        explicit |= set(cp["run"])
    overrides = {dst: getattr(args, src) for src, dst in _FLAG_MAP.items()
                 if getattr(args, src, None) is not None}
    explicit |= set(overrides)
    return RunConfig.from_mapping(overrides, cfg).validate(), explicit


def _formats(cfg: RunConfig) -> set:
    return {f.strip() for f in cfg.formats.split(",") if f.strip()}


def _write_simulation(cfg: RunConfig, sim, outdir: Path, stem: str) -> list[Path]:
    conf = cfg.record()
    fm = _formats(cfg)
    written = []
    if "csv" in fm:
        written.append(lio.save_boundary(outdir / f"{stem}_boundary.csv", sim.boundary, conf,
                                         [cfg.seed, 0]))
    if "jsonl" in fm:
        written.append(lio.save_chain(outdir / f"{stem}_chain.jsonl", sim.chain, conf))
    if "json" in fm:
        b = sim.boundary
        meta = {"version": __version__, "config": conf, "spec": cfg.to_spec().to_dict(),
                "seed": [cfg.seed, 0], "convention": cfg.convention, "events": len(sim.chain),
                "log_capacity": sim.chain.log_capacity, "boundary_points": len(b),
                "spacing_tol": b.spacing_tol, "resolution": b.resolution, "degraded": b.degraded,
                "approximate": b.approximate,
                "rescaled_diameter": stats.diameter(rescale(b))}
        written.append(lio.save_json(outdir / f"{stem}_meta.json", meta))
    if "svg" in fm:
        legend = {"model": cfg.model, "seed": cfg.seed, "T": cfg.T}
        svg = lio.render_svg(sim.boundary, legend)
        p = outdir / f"{stem}.svg"
        p.write_text(svg, encoding="utf-8")
        written.append(p)
    return written


def _simulate(cfg: RunConfig):
    return stats.simulate(cfg.to_spec(), cfg.T, cfg.seed, 0, **cfg.sim_options())


def cmd_simulate(args, cfg, explicit) -> int:
    sim = _simulate(cfg)
    for p in _write_simulation(cfg, sim, cfg.output_dir(), cfg.stem()):
        log.info("wrote %s", p)
    return 0


def cmd_ensemble(args, cfg, explicit) -> int:
    names = [n.strip() for n in args.functionals.split(",") if n.strip()]
    res = stats.run_ensemble(cfg.to_spec(), cfg.T, cfg.ensemble_size, names, cfg.seed,
                             workers=args.workers, **cfg.sim_options())
    recs = res.to_records()
    recs[0]["config"] = cfg.record()
    recs[0]["version"] = __version__
    p = lio.save_jsonl(cfg.output_dir() / f"{cfg.stem()}_ensemble.jsonl", recs)
    log.info("wrote %s (%.2fs)", p, res.wall_clock)
    return 0


def _suite_report(name: str, cfg: RunConfig, explicit: set, samples: int | None) -> dict:
    spec = cfg.to_spec()
    if name == "fourier":
        N = samples or 100_000
        y = sample_values(spec, cfg.T, N, make_rng(cfg.seed, 0), dt=None)
        return stats.ecf_test(y, spec, range(1, 6), cfg.T)
    if name == "reversal":
        return stats.reversal_test(spec, cfg.T, samples or 10_000, master_seed=cfg.seed)
    params = {}
    if name == "cauchy":
        if "r" in explicit:
            params["r"] = cfg.r
        return stats.limit_test("cauchy", params, samples, cfg.seed)
    if name == "sle":
        if "gamma" in explicit:
            params["gamma"] = cfg.gamma
        return stats.limit_test("sle", params, samples, cfg.seed)
    if name == "deterministic":
        for key, dst in (("r", "r"), ("lam", "lambda"), ("T", "T"), ("convention", "convention")):
            if key in explicit:
                params[dst] = getattr(cfg, key)
        return stats.limit_test("deterministic", params, samples, cfg.seed)
    # distortion: rescaled diameters of an ensemble inside [1, 4] up to 1%
    res = stats.run_ensemble(spec, cfg.T, cfg.ensemble_size, ("diameter",), cfg.seed,
                             **cfg.sim_options())
    d = res.values("diameter")
    ok = bool(np.all((d >= 0.99) & (d <= 4.04)))
    return {"test_id": "distortion", "inputs": {"spec": spec.to_dict(), "T": cfg.T,
            "N": cfg.ensemble_size, "master_seed": cfg.seed, "bounds": [0.99, 4.04]},
            "statistics": {"diameters": d.tolist(), "min": float(d.min()), "max": float(d.max())},
            "verdict": "pass" if ok else "fail"}


def cmd_verify(args, cfg, explicit) -> int:
    suites = SUITES if "all" in args.suite else tuple(dict.fromkeys(args.suite))
    outdir = cfg.output_dir()
    failed = []
    for name in suites:
        rep = _suite_report(name, cfg, explicit, args.samples)
        rep["config"] = cfg.record()
        rep["version"] = __version__
        lio.save_json(outdir / f"verify_{name}.json", rep)
        log.info("%s: %s", name, rep["verdict"])
        if rep["verdict"] != "pass":
            failed.append(name)
    return 1 if failed else 0


def _boundary_for(args, cfg):
    if args.boundary:
        b, _ = lio.load_boundary(args.boundary)
        return b
    return _simulate(cfg).boundary


def cmd_dimension(args, cfg, explicit) -> int:
    b = _boundary_for(args, cfg)
    if not b.rescaled:
        b = rescale(b)
    bc = box_counting_dimension(b, args.scale_min, args.scale_max, args.n_scales)
    rep = {"test_id": "dimension", "version": __version__, "config": cfg.record(),
           "inputs": {"boundary": args.boundary, "n_scales": args.n_scales},
           "statistics": {"slope": bc.slope, "intercept": bc.intercept, "r_squared": bc.r_squared,
                          "scales": bc.scales, "counts": bc.counts},
           "verdict": "pass" if bc.accepted else "fail"}
    lio.save_json(cfg.output_dir() / f"{cfg.stem()}_dimension.json", rep)
    log.info("slope %.4f, R^2 %.5f", bc.slope, bc.r_squared)
    return 0


def cmd_render(args, cfg, explicit) -> int:
    b = _boundary_for(args, cfg)
    if args.rescaled and not b.rescaled:
        b = rescale(b)
    legend = {"model": cfg.model, "seed": cfg.seed} if not args.boundary else {"source": Path(args.boundary).name}
    out = Path(args.out) if args.out else cfg.output_dir() / f"{cfg.stem()}.svg"
    out.write_text(lio.render_svg(b, legend), encoding="utf-8")
    log.info("wrote %s", out)
    return 0


def cmd_sweep(args, cfg, explicit) -> int:
    lams = _floats(args.lambda_values)
    if args.gamma_values:
        key, vals, model = "gamma", _floats(args.gamma_values), "heat"
    else:
        key, vals, model = "r", _floats(args.r_values or str(cfg.r)), "poisson"
    outdir = cfg.output_dir()
    summary = []
    for v in vals:
        for lam in lams:
            cell = RunConfig.from_mapping({"model": model, key: v, "lam": lam}, cfg).validate()
            cdir = outdir / f"{key}{v!r}_lambda{lam!r}"
            cdir.mkdir(parents=True, exist_ok=True)
            cell.outdir = str(cdir)
            sim = _simulate(cell)
            _write_simulation(cell, sim, cdir, cell.stem())
            summary.append({key: v, "lambda": lam, "dir": cdir.name, "events": len(sim.chain),
                            "rescaled_diameter": stats.diameter(rescale(sim.boundary))})
    lio.save_json(outdir / "sweep_summary.json", {"version": __version__, "config": cfg.record(),
                                                   "cells": summary})
    return 0


COMMANDS = {"simulate": cmd_simulate, "ensemble": cmd_ensemble, "verify": cmd_verify,
            "dimension": cmd_dimension, "render": cmd_render, "sweep": cmd_sweep}


def execute(argv=None) -> int:
    """Run one subcommand; returns the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:           # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg, explicit = resolve_config(args)
    except (ValueError, OSError, configparser.Error, UsageError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg, explicit)
    except (UsageError, lio.FormatError, OSError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(execute())
