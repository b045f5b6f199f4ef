"""Simulate hulls for several driving processes and render them as SVG.

Run: python3 demos/02_hull_gallery.py [outdir]
"""
from pathlib import Path
import sys

from levy_loewner import DriverSpec, JumpModel, simulate
from levy_loewner.hull import box_counting_dimension, diameter, rescale
from levy_loewner.io import render_svg, save_boundary

outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
outdir.mkdir(parents=True, exist_ok=True)

models = {
    # uniform jumps: the hull branches in every direction
    "poisson_r0": DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 20.0),
    # concentrated jumps: the hull straightens toward a slit
    "poisson_r09": DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.9), 20.0),
    "beta": DriverSpec.compound_poisson(JumpModel.beta_mixture(2.0), 20.0),
    "heat": DriverSpec.compound_poisson(JumpModel.heat_kernel(0.05), 20.0),
    # continuous drivers go through a fine step grid and are flagged approximate
    "cauchy": DriverSpec.cauchy(1.0),
    "sle": DriverSpec.brownian(2.0),
}

for name, spec in models.items():
    sim = simulate(spec, T=1.0, seed=2024, relative_tol=2e-3)
    b = sim.boundary
    small = rescale(b)
    line = f"{name:12s} events={len(sim.chain):4d} points={len(b):7d} rescaled diam={diameter(small):.3f}"
    try:
        line += f" box slope={box_counting_dimension(small).slope:.3f}"
    except ValueError:
        line += " box slope=n/a (resolution)"
    print(line + (" approximate" if b.approximate else ""))
    save_boundary(outdir / f"{name}.csv", b, {"model": name}, [2024, 0])
    (outdir / f"{name}.svg").write_text(render_svg(small, {"model": name, "T": 1.0}))

print("wrote", outdir.resolve())
