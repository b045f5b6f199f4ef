"""Boundary length and box-counting dimension of rescaled hulls.

Run: python3 demos/04_length_and_dimension.py
"""
import numpy as np

from levy_loewner import DriverSpec, JumpModel, make_rng, run_ensemble, sample_chain
from levy_loewner.hull import arc_lengths, boundary_length_series

spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 8.0)

# arc k has length l_k = integral of |f_{k-1}'| along the new slit
chain = sample_chain(spec, 40, make_rng(1), random_rotation=True)
res = arc_lengths(chain)
print("first arc lengths:", np.round(res.lengths[:5], 4), "all converged:", bool(res.converged.all()))

# the rescaled length e^{-T_n}(2 pi + sum l_k) stays bounded as n grows
series = np.array([boundary_length_series(sample_chain(spec, 200, make_rng(2, i),
                                                       random_rotation=True)) for i in range(30)])
for n in (0, 50, 100, 200):
    print(f"mean rescaled length at n={n:3d}: {series[:, n].mean():.3f}")

# with lambda large the boundary is close to a curve of dimension one
dense = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 50.0)
ens = run_ensemble(dense, 2.0, 5, ("dimension", "diameter"), master_seed=3, relative_tol=1e-3)
print("box-counting slopes:", np.round(ens.values("dimension"), 3))
print("fit R^2:            ", np.round(ens.values("dimension_r2"), 4))
print("rescaled diameters: ", np.round(ens.values("diameter"), 3))
