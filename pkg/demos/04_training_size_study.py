"""Error versus training-set size, averaged over seeded runs.

Mirrors the usual protocol of reporting mean +- std over repeated runs for
each training budget: the error falls as the training set grows.
"""

from bcdl import HyperParams, ModelConfig, SamplerConfig, synthetic_experiment

cfg = ModelConfig(dict_size=16, hyper=HyperParams.uniform(1e-6))
sampler = SamplerConfig(burn_in=200, collect=150, thin=1, seed=42)

agg, per_run = synthetic_experiment([30, 60, 100, 200], cfg, sampler,
                                    runs=5, n_test=25, j_neighbors=3)

print("train#   mean RMS (deg)   std over runs")
for n, rep in sorted(agg.items()):
    print(f"{n:6d}   {rep.mean_rms_degrees:14.3f}   {rep.std_rms_degrees:13.3f}")
