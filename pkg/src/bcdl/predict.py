"""Prediction for unseen inputs via Monte-Carlo code transfer.

For each retained posterior sample l: the activation weights w_t of the test
point are the mean of the rows of W^l belonging to the j nearest training
inputs; a fresh test code (z_t, s_t) is drawn from its prior given w_t and
gamma_s^l; the sample's vote is mu_l = Dy^l alpha_t with importance weight
beta_l = likelihood of x_t under the input-side reconstruction. The default
prediction is the weight-normalized mixture mean; the literal variant keeps
the L * sum(gamma_xy) denominator of the source formula for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import PosteriorSamples
from .mathcore import RngStream, sigmoid


class NoLikelihoodSupport(Exception):
    """Every importance weight vanished; the prediction would be meaningless."""


@dataclass(frozen=True)
class PredictionConfig:
    j_neighbors: int = 5
    num_samples: int | None = None  # None = all collected
    mean_variant: str = "normalized-mixture"  # or "paper-literal"
    neighbor_metric: str = "euclidean"

    def __post_init__(self):
        if self.j_neighbors < 1:
            raise ValueError("j_neighbors must be >= 1")
        if self.mean_variant not in ("normalized-mixture", "paper-literal"):
            raise ValueError(f"unknown mean_variant {self.mean_variant!r}")
        if self.neighbor_metric != "euclidean":
            raise ValueError("only the euclidean neighbor metric is supported")


@dataclass
class PredictiveResult:
    y_hat: np.ndarray
    log_beta: np.ndarray
    effective_sample_size: float


def nearest_neighbors(train_x: np.ndarray, x_t: np.ndarray, j: int) -> np.ndarray:
    """Indices of the j nearest training columns; distance ties go to the lowest index."""
    n = train_x.shape[1]
    if j > n:
        raise ValueError(f"j = {j} exceeds the {n} training samples")
    d = np.sqrt(np.sum((train_x - x_t[:, None]) ** 2, axis=0))
    return np.argsort(d, kind="stable")[:j]


def derive_w_t(posterior: PosteriorSamples, train_x: np.ndarray, x_t: np.ndarray,
               j: int, l: int) -> np.ndarray:
    """Mean over the j nearest training samples of their W^l rows (length K)."""
    nn = nearest_neighbors(train_x, np.asarray(x_t, dtype=float), j)
    return posterior.states[l].w[nn].mean(axis=0)


def sample_test_code(w_t: np.ndarray, gamma_s_l: float, rng: RngStream):
    """z_t entries +1 w.p. sigmoid(w_t); s_t i.i.d. N(0, 1/gamma_s_l)."""
    g = rng.gen
    z_t = np.where(g.random(w_t.size) < sigmoid(w_t), 1.0, -1.0)
    s_t = g.normal(0.0, 1.0 / np.sqrt(gamma_s_l), size=w_t.size)
    return z_t, s_t


def log_beta(x_t: np.ndarray, z_t: np.ndarray, s_t: np.ndarray,
             dx_l: np.ndarray, gamma_xy_l: float) -> float:
    """log N(x_t; Dx^l alpha_t, I/gamma_xy^l)."""
    alpha_t = 0.5 * (z_t + 1.0) * s_t
    r = x_t - dx_l @ alpha_t
    m_x = x_t.size
    return float(0.5 * m_x * np.log(gamma_xy_l / (2.0 * np.pi)) - 0.5 * gamma_xy_l * float(r @ r))


def predict(posterior: PosteriorSamples, train_x: np.ndarray, x_t: np.ndarray,
            cfg: PredictionConfig, rng: RngStream) -> PredictiveResult:
    """Importance-weighted mixture prediction of the output vector for x_t."""
    if len(posterior) == 0:
        raise ValueError("posterior has no retained samples")
    x_t = np.asarray(x_t, dtype=float)
    train_x = np.asarray(train_x, dtype=float)
    num = len(posterior) if cfg.num_samples is None else min(cfg.num_samples, len(posterior))
    # most recent samples are the best converged
    sample_idx = range(len(posterior) - num, len(posterior))

    nn = nearest_neighbors(train_x, x_t, cfg.j_neighbors)
    log_betas = np.empty(num)
    mus = None
    gamma_sum = 0.0
    for out, l in enumerate(sample_idx):
        st = posterior.states[l]
        w_t = st.w[nn].mean(axis=0)
        z_t, s_t = sample_test_code(w_t, st.gamma_s, rng)
        alpha_t = 0.5 * (z_t + 1.0) * s_t
        if mus is None:
            mus = np.empty((num, st.dy.shape[0]))
        mus[out] = st.dy @ alpha_t
        log_betas[out] = log_beta(x_t, z_t, s_t, st.dx, st.gamma_xy)
        gamma_sum += st.gamma_xy

    finite = np.isfinite(log_betas)
    if cfg.mean_variant == "normalized-mixture":
        if not finite.any():
            raise NoLikelihoodSupport("all importance weights vanished in log domain")
        shift = log_betas[finite].max()
        weights = np.where(finite, np.exp(log_betas - shift), 0.0)
        y_hat = (weights @ mus) / weights.sum()
    else:  # paper-literal: raw beta sum over L * sum of noise precisions
        betas = np.where(finite, np.exp(log_betas), 0.0)
        if betas.sum() == 0.0:
            raise NoLikelihoodSupport("all importance weights underflowed to zero")
        y_hat = (betas @ mus) / (num * gamma_sum)

    # ESS computed from shifted weights so it is underflow-proof
    shift = log_betas[finite].max()
    wts = np.exp(log_betas[finite] - shift)
    ess = float(wts.sum() ** 2 / np.sum(wts**2))
    return PredictiveResult(y_hat=y_hat, log_beta=log_betas, effective_sample_size=ess)
