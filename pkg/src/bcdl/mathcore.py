"""Seedable random streams and the small linear-algebra kernels the samplers use.

Everything here is deterministic given an RngStream: the same seed (and
substream path) always reproduces the same draw sequence, and independent
substreams can be derived from a root seed by index.
"""

from __future__ import annotations

import numpy as np


class NotPositiveDefinite(Exception):
    """Cholesky failed; the caller should add jitter or reject the matrix."""


class RngStream:
    """A named, reproducible random stream.

    Built on PCG64 seeded through a SeedSequence so that ``substream(i)``
    yields streams that are mutually independent and fully determined by
    ``(seed, path)``.
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def substream(self, index: int) -> "RngStream":
        """Derive the index-th independent child stream."""
        return RngStream(self.seed, self.path + (int(index),))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def cholesky(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T == m.

    Raises NotPositiveDefinite when m is not (numerically) positive
    definite, and ValueError when m is not square/symmetric.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-8, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def sample_mvn(mean: np.ndarray, chol_cov: np.ndarray, rng: RngStream) -> np.ndarray:
    """Draw mean + chol_cov @ eps with eps i.i.d. standard normal."""
    mean = np.asarray(mean, dtype=float)
    chol_cov = np.asarray(chol_cov, dtype=float)
    if chol_cov.shape != (mean.size, mean.size):
        raise ValueError(
            f"dimension mismatch: mean has {mean.size} entries, "
            f"chol_cov has shape {chol_cov.shape}"
        )
    return mean + chol_cov @ rng.gen.standard_normal(mean.size)


def sample_gamma(shape: float, rate: float, rng: RngStream) -> float:
    """Gamma draw under the rate convention: density ~ g**(shape-1) * exp(-rate*g).

    Mean is shape/rate.
    """
    if not shape > 0 or not rate > 0:
        raise ValueError(f"shape and rate must be positive, got ({shape}, {rate})")
    return float(rng.gen.gamma(shape, 1.0 / rate))


def sample_bernoulli_pm1(p_plus: float, rng: RngStream) -> float:
    """Return +1 with probability p_plus, else -1."""
    if not 0.0 <= p_plus <= 1.0:
        raise ValueError(f"p_plus must lie in [0, 1], got {p_plus}")
    return 1.0 if rng.gen.random() < p_plus else -1.0


def sigmoid(t):
    """Numerically stable logistic function, elementwise."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    if out.ndim == 0:
        return float(out)
    return out


def log_sigmoid(t):
    """log(sigmoid(t)) without underflow: -log(1 + exp(-t))."""
    t = np.asarray(t, dtype=float)
    out = -np.logaddexp(0.0, -t)
    if out.ndim == 0:
        return float(out)
    return out


def log_gamma_pdf(g: float, shape: float, rate: float) -> float:
    """Log density of Gamma(shape, rate) at g (rate convention)."""
    from scipy.special import gammaln

    if g <= 0:
        return -np.inf
    return float(shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(g) - rate * g)


def log_normal_pdf(x, mean, precision) -> float:
    """Sum of log N(x; mean, precision**-1) over all entries of x."""
    x = np.asarray(x, dtype=float)
    mean = np.asarray(mean, dtype=float)
    n = x.size
    return float(0.5 * n * np.log(precision / (2.0 * np.pi)) - 0.5 * precision * np.sum((x - mean) ** 2))
