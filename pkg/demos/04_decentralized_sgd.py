"""Decentralized SGD: compressed gossip vs exact gossip vs a central server.

Eight nodes share a noisy strongly convex quadratic but hold different
local optima (heterogeneous data). All three algorithms use the same
stepsize and the same gradient draws, so the differences come from the
communication scheme alone.
"""

import numpy as np

from chocosim import (OptimizerConfig, make_quadratic, mixing_matrix,
                      parse_compressor, ring, run)

N, DIM, T, ETA = 8, 20, 2000, 0.05

problem = make_quadratic(N, DIM, heterogeneity=1.0, noise_std=1.0, seed=1)
mixing = mixing_matrix(ring(N))
f_star = problem.f_star()

print(f"n={N} on a ring, d={DIM}, eta={ETA}, T={T}; f* = {f_star:.6f}\n")
print(f"{'algorithm':<24} {'final f-f*':<12} {'consensus':<12} "
      f"{'busiest node MB':<16}")

runs = {}
for label, algorithm, comp in (
    ("central server", "centralized", "identity"),
    ("exact gossip", "decentralized-exact", "identity"),
    ("compressed (sign)", "choco", "sign"),
    ("compressed (gsgd:4)", "choco", "gsgd:4"),
):
    cfg = OptimizerConfig(algorithm=algorithm, eta=ETA, iterations=T)
    mix = None if algorithm == "centralized" else mixing
    rec = run(problem, cfg, mix, parse_compressor(comp), seed=3)
    runs[label] = rec
    mb = rec.ledger.busiest() / 8.0 / 1e6
    print(f"{label:<24} {rec.f_avg[-1] - f_star:<12.6f} "
          f"{rec.consensus[-1]:<12.3e} {mb:<16.3f}")

sign_mb = runs["compressed (sign)"].ledger.busiest() / 8e6
exact_mb = runs["exact gossip"].ledger.busiest() / 8e6
print(f"\nall four land in the same noise ball, but the sign run moved "
      f"{exact_mb / sign_mb:.0f}x fewer bits through its busiest node")
print("than exact gossip, and needs no coordinator at all.")

best = min(runs["compressed (sign)"].f_avg)
print(f"(best objective seen by the sign run: {best - f_star:.6f} above f*)")
