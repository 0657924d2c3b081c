"""Independent correctness oracles for the samplers.

These deliberately avoid the sampler code paths they validate: conditionals
are reconstructed by brute force from the joint log density alone (grid
normalization for continuous scalars, two-point enumeration for the binary
indicators), and the Geweke check compares two simulators of the same joint
that only share the model definition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gibbs import gibbs_sweep
from .kernel import KernelGram, build_gram
from .mathcore import RngStream
from .model import Dataset, HyperParams, LatentState, ModelConfig, ancestral_sample


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    points: int = 512

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        if self.points < 64:
            raise ValueError("need at least 64 grid points")


def grid_conditional(log_density, grid: GridSpec):
    """Normalized density table of a scalar conditional.

    log_density maps a scalar (the free variable, all others held fixed by
    the caller's closure) to the joint log density. Returns (xs, density)
    normalized by the trapezoid rule.
    """
    xs = np.linspace(grid.lo, grid.hi, grid.points)
    logv = np.array([log_density(float(x)) for x in xs])
    logv -= logv.max()
    dens = np.exp(logv)
    z = np.trapezoid(dens, xs)
    return xs, dens / z


def grid_cdf(xs: np.ndarray, dens: np.ndarray):
    """Cumulative trapezoid of a grid density (starts at 0, ends at ~1)."""
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    return cum / cum[-1]


def ks_statistic(draws: np.ndarray, xs: np.ndarray, dens: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between draws and a grid density."""
    draws = np.sort(np.asarray(draws, dtype=float))
    cdf = np.interp(draws, xs, grid_cdf(xs, dens))
    n = draws.size
    emp_hi = np.arange(1, n + 1) / n
    emp_lo = np.arange(0, n) / n
    return float(max(np.max(np.abs(emp_hi - cdf)), np.max(np.abs(emp_lo - cdf))))


def enumerate_binary_conditional(log_density_at) -> float:
    """P(z = +1) from the two-point normalization of the joint.

    log_density_at maps a value in {-1.0, +1.0} to the joint log density.
    """
    lp = log_density_at(+1.0)
    lm = log_density_at(-1.0)
    m = max(lp, lm)
    return math.exp(lp - m) / (math.exp(lp - m) + math.exp(lm - m))


# ---------------------------------------------------------------------------
# Geweke: marginal-conditional vs successive-conditional simulators
# ---------------------------------------------------------------------------

GEWEKE_STATISTIC_NAMES = (
    "gamma_s", "gamma_xy", "gamma_x", "gamma_y",
    "z_active_fraction", "mean_s_sq", "mean_dx_sq", "mean_dy_sq", "w_first",
)


@dataclass(frozen=True)
class GewekeConfig:
    """Tiny-instance settings for the getting-it-right check.

    The hyper-parameters default to 3.0 rather than the diffuse 1e-6 used
    for data analysis: the test compares prior moments, and Gamma(1e-6, 1e-6)
    has no usable ones (its mean-square statistics diverge). The surrogate
    pose scale keeps the fixed Gram weakly coupled, where the chain mixes
    fast enough for well-calibrated batch means.
    """

    cycles: int = 20_000
    n: int = 8
    k: int = 3
    m_x: int = 2
    m_y: int = 2
    hyper: HyperParams = field(default_factory=lambda: HyperParams.uniform(3.0))
    batches: int = 100
    surrogate_scale: float = 0.05

    def __post_init__(self):
        if self.cycles < 10_000:
            raise ValueError("Geweke needs at least 1e4 cycles for usable z-scores")
        if self.n > 8 or self.k > 3 or self.m_x > 2 or self.m_y > 2:
            raise ValueError("Geweke runs on the tiny instance only")


def geweke_statistics(state: LatentState) -> np.ndarray:
    stats = np.array([
        state.gamma_s, state.gamma_xy, state.gamma_x, state.gamma_y,
        float(np.mean(0.5 * (state.z + 1.0))),
        float(np.mean(state.s**2)), float(np.mean(state.dx**2)), float(np.mean(state.dy**2)),
        float(state.w[0, 0]),
    ])
    # a diverged chain (mutation check) may produce inf/NaN; pin to a huge
    # sentinel so the z-scores blow up instead of going silent
    return np.nan_to_num(stats, nan=1e30, posinf=1e30, neginf=-1e30)


def _regenerate_data(state: LatentState, m_x: int, m_y: int, rng: RngStream) -> Dataset:
    """Fresh observations from the likelihood at the current state."""
    g = rng.gen
    code = state.code
    noise = 1.0 / np.sqrt(state.gamma_xy)
    x = state.dx @ code + g.normal(0.0, noise, size=(m_x, state.z.shape[1]))
    y = state.dy @ code + g.normal(0.0, noise, size=(m_y, state.z.shape[1]))
    return Dataset(x=x, y=y)


def geweke_run(cfg: GewekeConfig, rng: RngStream, mutate: str | None = None,
               gram: KernelGram | None = None) -> dict:
    """Compare prior-ancestral cycles against sweep-then-regenerate cycles.

    Returns z-scores per tracked statistic (positive z means the Gibbs chain
    runs high). mutate="flip_mu_s" flips the sign of the slab conditional
    mean inside the sweep; a correct test of the test drives |z| above 6.
    The Gram matrix is built once from a fixed surrogate pose set: it is a
    constant of the model being checked, exactly as in training where it
    comes from the observed outputs.
    """
    model_cfg = ModelConfig(dict_size=cfg.k, hyper=cfg.hyper)
    if gram is None:
        surrogate = cfg.surrogate_scale * rng.substream(0).gen.standard_normal((cfg.m_y, cfg.n))
        gram = build_gram(surrogate, model_cfg.kernel)
    mu_s_sign = -1.0 if mutate == "flip_mu_s" else 1.0
    if mutate not in (None, "flip_mu_s"):
        raise ValueError(f"unknown mutation {mutate!r}")

    nstat = len(GEWEKE_STATISTIC_NAMES)
    forward = np.empty((cfg.cycles, nstat))
    fwd_rng = rng.substream(1)
    for t in range(cfg.cycles):
        _, st = ancestral_sample(model_cfg, cfg.n, cfg.m_x, cfg.m_y,
                                 fwd_rng.substream(t), gram=gram)
        forward[t] = geweke_statistics(st)

    chain = np.empty((cfg.cycles, nstat))
    gb_rng = rng.substream(2)
    data, state = ancestral_sample(model_cfg, cfg.n, cfg.m_x, cfg.m_y,
                                   gb_rng.substream(0), gram=gram)
    step_rng = gb_rng.substream(1)
    with np.errstate(all="ignore"):
        for t in range(cfg.cycles):
            # a broken sampler (e.g. the mutation hook) can diverge to the
            # point of raising; record sentinel stats instead of dying
            try:
                gibbs_sweep(state, data, model_cfg, gram, step_rng, mu_s_sign=mu_s_sign)
                data = _regenerate_data(state, cfg.m_x, cfg.m_y, step_rng)
                chain[t] = geweke_statistics(state)
            except (ValueError, FloatingPointError):
                chain[t:] = np.inf
                break

    # batch means absorb the Gibbs chain's autocorrelation; residual lag-1
    # correlation between batches inflates the variance estimate further
    nb = cfg.batches
    bs = cfg.cycles // nb
    batch_means = chain[: nb * bs].reshape(nb, bs, nstat).mean(axis=1)
    centered = batch_means - batch_means.mean(axis=0)
    var_b = np.mean(centered**2, axis=0)
    lag1 = np.mean(centered[1:] * centered[:-1], axis=0)
    rho1 = np.clip(np.divide(lag1, var_b, out=np.zeros_like(lag1), where=var_b > 0), 0.0, 0.9)
    se_chain = np.sqrt(var_b * (1.0 + 2.0 * rho1) / nb)
    se_fwd = forward.std(axis=0, ddof=1) / np.sqrt(cfg.cycles)
    denom = np.sqrt(se_fwd**2 + se_chain**2)
    z = (chain.mean(axis=0) - forward.mean(axis=0)) / np.where(denom > 0, denom, np.inf)
    z = np.where(np.isfinite(z), z, np.inf)

    return {
        "z_scores": dict(zip(GEWEKE_STATISTIC_NAMES, z)),
        "max_abs_z": float(np.max(np.abs(z))),
        "forward_means": dict(zip(GEWEKE_STATISTIC_NAMES, forward.mean(axis=0))),
        "chain_means": dict(zip(GEWEKE_STATISTIC_NAMES, chain.mean(axis=0))),
        "flagged": bool(np.max(np.abs(z)) > 4.0),
    }
