"""Slit maps and how a chain of them grows a hull.

Run: python3 demos/01_slit_maps.py
"""
import math

import numpy as np

from levy_loewner import (SlitChain, backward_flow, capacity_factor, chain_eval, chain_from_path,
                          slit_length_from_capacity, slit_map)
from levy_loewner.driver import DriverPath

# A single slit of length 1 at angle 0: the tip 1 is sent to 1 + delta, -1 stays put.
delta = 1.0
print("h(1)  =", slit_map(delta, 1.0))
print("h(-1) =", slit_map(delta, -1.0))

# Far from the disk h behaves like c z; c is the capacity factor.
R = 1e6
print("slope at infinity", (slit_map(delta, 2 * R) - slit_map(delta, R)) / R,
      "capacity factor", capacity_factor(delta))

# Waiting time tau buys a slit whose capacity factor is exactly e^tau.
for tau in (0.01, 0.1, 1.0):
    d = slit_length_from_capacity(tau)
    print(f"tau={tau:<5} delta={d:.6f} log capacity={math.log(capacity_factor(d)):.6f}")

# A driver that jumps twice is a chain of three slits; the chain is the
# backward Loewner flow of the step driver, so both routes agree.
path = DriverPath([0.2, 0.5], [0.8, -0.4], horizon=1.0)
chain = chain_from_path(path)
z = 2.0 * np.exp(1j * np.linspace(0, 2 * math.pi, 6, endpoint=False))
by_chain = chain_eval(chain, z)
by_ode = backward_flow(path, z, method="ode", normalize=False)
print("events:", len(chain), " max |chain - ODE| =", np.abs(by_chain - by_ode).max())

# Chains can also be written down directly: angles, lengths, waits.
star = SlitChain.from_waits(np.linspace(0, 2 * math.pi, 5, endpoint=False), [0.2] * 5)
print("five-armed star, capacity e^T with T =", star.log_capacity)
