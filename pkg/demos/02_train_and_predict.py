"""Train on synthetic data and predict held-out outputs.

Shows the full pipeline: generate, train by MCMC, inspect chain diagnostics,
predict with the importance-weighted mixture, and score in degrees.
"""

import numpy as np

from bcdl import (HyperParams, KernelSpec, ModelConfig, PredictionConfig, RngStream,
                  SamplerConfig, SyntheticSpec, evaluate, make_synthetic, predict, train)

spec = SyntheticSpec(k_true=4, m_x=10, m_y=10)  # ~2-degree output scale, mild noise
data = make_synthetic(120, spec, KernelSpec(), RngStream(7))
train_set = data.subset(range(100))
test_set = data.subset(range(100, 120))

# The bandwidth controls how strongly the Gram couples the activation
# weights across samples. A small explicit bandwidth keeps it near identity,
# where the bound-tilted proposal is accepted nearly always; the automatic
# mean-squared-distance bandwidth on degree-scale poses gives a strongly
# coupled Gram where the independence-style proposal is rarely accepted
# (prediction quality is driven by the code transfer either way).
cfg = ModelConfig(dict_size=16, hyper=HyperParams.uniform(1e-6),
                  kernel=KernelSpec(eta=0.5))
sampler = SamplerConfig(burn_in=300, collect=200, thin=1, seed=11)
post = train(train_set, cfg, sampler)

print(f"retained {len(post)} posterior samples")
print(f"overall MH acceptance: {post.mh_accept_rate:.3f}")
print(f"log density: start {post.log_density_trace[0]:.0f} "
      f"-> end {post.log_density_trace[-1]:.0f}")
print(f"kernel bandwidth {post.eta:.3f}, jitter {post.jitter_applied:.1e}")

# single-frame prediction with diagnostics
res = predict(post, post.train_x, test_set.x[:, 0], PredictionConfig(j_neighbors=3),
              RngStream(99))
print(f"frame 0: truth {np.round(test_set.y[:3, 0], 2)}..., "
      f"predicted {np.round(res.y_hat[:3], 2)}...")
print(f"frame 0 effective sample size: {res.effective_sample_size:.1f} of {len(post)}")

# full test-set evaluation
rep = evaluate(post, test_set, PredictionConfig(j_neighbors=3), RngStream(100))
print(f"mean RMS over {test_set.n} frames: {rep.mean_rms_degrees:.3f} degrees")
