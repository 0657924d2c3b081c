"""Measure how per-sweep cost scales with the problem dimensions.

The Gram-matrix inverse is cubic in the number of training samples (timed in
isolation: training factors it once, so it never shows at sweep granularity),
and the sweep itself grows roughly quadratically in the dictionary size.
"""

from bcdl import complexity_benchmark

res = complexity_benchmark()

print("isolated Gram inverse:")
for row in res["gram_inverse"]:
    print(f"  N={row['N']:5d}  {row['seconds']*1e3:9.1f} ms")
print(f"  fitted log-log slope in N: {res['gram_inverse_slope_n']:.2f} (theory: 3)")

print("full Gibbs sweep at fixed N, M:")
for row in res["sweep"]:
    print(f"  K={row['K']:5d}  {row['seconds']*1e3:9.1f} ms")
print(f"  fitted log-log slope in K: {res['sweep_slope_k']:.2f} (theory: -> 2)")
