"""The three scaling limits of the jump model, plus time reversal.

Run: python3 demos/03_limits.py
"""
from levy_loewner import DriverSpec, JumpModel
from levy_loewner.stats import limit_test, reversal_test

# r -> 1 with lambda (1 - r) fixed: the driver level tends to a Cauchy process.
rep = limit_test("cauchy", {"r": 0.99}, N=50_000)
for row in rep["statistics"]["coefficients"]:
    print(f"Cauchy n={row['n']}: empirical {row['empirical'][0]:+.4f} target {row['target']:.4f}")

# heat-kernel jumps with gamma -> 0 and lambda = c / gamma: Brownian motion.
rep = limit_test("sle", {"gamma": 1e-3, "c": 1.0}, N=50_000)
s = rep["statistics"]
print(f"SLE variance {s['variance']:.4f} (target {s['target_variance']}), "
      f"skew {s['skewness']:+.4f}, excess kurtosis {s['excess_kurtosis']:+.4f}")

# r -> 1 with lambda fixed: hulls collapse onto one radial slit.
for r in (0.999, 0.9999):
    rep = limit_test("deterministic", {"r": r}, N=5)
    d = [row["d_H"] for row in rep["statistics"]["replicates"]]
    print(f"deterministic r={r}: d_H to the predicted slit", " ".join(f"{x:.3f}" for x in d))

# Reversing a compound Poisson path in time gives a process with the same law.
spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.5), 5.0)
rep = reversal_test(spec, N=5000, batches=5, required=4)
print("reversal:", rep["statistics"]["passed_batches"], "of 5 batches agree ->", rep["verdict"])
rep = reversal_test(spec, N=5000, batches=5, required=4, flip=False, jump_shift=0.5)
print("without the sign flip, asymmetric jumps:", rep["statistics"]["passed_batches"], "of 5 ->",
      rep["verdict"])
