"""Pose-similarity Gram matrix over training outputs.

The Gram entry for a pair of pose vectors is exp(-||y_i - y_j|| / eta): an
exponential kernel on the UNSQUARED Euclidean distance, while the automatic
bandwidth averages SQUARED pairwise distances. Both forms are deliberate and
implemented verbatim; see auto_eta and build_gram. One practical consequence
is that the Gram's structure depends on the absolute scale of the pose
features (large-scale poses give a nearly-constant, ill-conditioned Gram,
which is why jitter escalation is built in).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mathcore import NotPositiveDefinite, cholesky

BASE_JITTER_PER_N = 1e-10
MAX_JITTER = 1e-2


class DegenerateBandwidth(Exception):
    """All pose columns coincide; the automatic bandwidth would be zero."""


class IllConditionedGram(Exception):
    """Jitter escalation exceeded the allowed ceiling without a valid Cholesky."""


@dataclass(frozen=True)
class KernelSpec:
    """Exponential kernel with an explicit bandwidth or 'auto' (mean squared distance)."""

    kind: str = "exponential"
    eta: float | str = "auto"

    def __post_init__(self):
        if self.kind != "exponential":
            raise ValueError(f"unsupported kernel kind: {self.kind!r}")
        if self.eta != "auto" and not float(self.eta) > 0:
            raise ValueError(f"eta must be positive or 'auto', got {self.eta!r}")


@dataclass
class KernelGram:
    """N x N kernel matrix with its jittered Cholesky factor and inverse cached.

    sigma holds the raw kernel values (unit diagonal); chol and inv factor
    sigma + jitter_applied * I, which is the covariance every consumer of
    this object actually uses (see sigma_eff).
    """

    sigma: np.ndarray
    chol: np.ndarray
    inv: np.ndarray
    jitter_applied: float
    eta: float
    _logdet: float = field(init=False)

    def __post_init__(self):
        self._logdet = float(2.0 * np.sum(np.log(np.diag(self.chol))))

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def sigma_eff(self) -> np.ndarray:
        """The jittered matrix the factorizations correspond to."""
        return self.sigma + self.jitter_applied * np.eye(self.n)

    @property
    def logdet(self) -> float:
        """log det of sigma_eff."""
        return self._logdet

    def quad_form(self, v: np.ndarray) -> np.ndarray:
        """v.T @ sigma_eff^{-1} @ v for a vector, or per-column for a matrix."""
        from scipy.linalg import solve_triangular

        u = solve_triangular(self.chol, v, lower=True)
        return np.sum(u * u, axis=0)


def pairwise_sq_dists(y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the columns of y."""
    y = np.asarray(y, dtype=float)
    sq = np.sum(y * y, axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (y.T @ y)
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def auto_eta(y: np.ndarray) -> float:
    """Bandwidth: 2 * sum_{i<j} ||y_i - y_j||^2 / (N(N-1)), the mean squared distance."""
    y = np.asarray(y, dtype=float)
    n = y.shape[1]
    if n < 2:
        raise ValueError(f"need at least two pose columns to set a bandwidth, got {n}")
    d2 = pairwise_sq_dists(y)
    eta = 2.0 * float(np.sum(np.triu(d2, 1))) / (n * (n - 1))
    if eta <= 0.0:
        raise DegenerateBandwidth("all pose columns are identical; bandwidth would be zero")
    return eta


def kernel_matrix(y: np.ndarray, spec: KernelSpec) -> tuple[np.ndarray, float]:
    """Raw kernel matrix exp(-||y_i - y_j|| / eta) and the resolved bandwidth."""
    y = np.asarray(y, dtype=float)
    eta = auto_eta(y) if spec.eta == "auto" else float(spec.eta)
    if eta <= 0:
        raise DegenerateBandwidth(f"bandwidth must be positive, got {eta}")
    sigma = np.exp(-np.sqrt(pairwise_sq_dists(y)) / eta)
    sigma = 0.5 * (sigma + sigma.T)  # exact symmetry despite fp noise
    np.fill_diagonal(sigma, 1.0)
    return sigma, eta


def build_gram(y: np.ndarray, spec: KernelSpec) -> KernelGram:
    """Gram with entries exp(-||y_i - y_j|| / eta), Cholesky/inverse cached.

    Jitter starts at 1e-10 * N and escalates tenfold until the Cholesky
    succeeds; above 1e-2 the matrix is declared ill conditioned.
    """
    sigma, eta = kernel_matrix(y, spec)
    n = sigma.shape[0]
    jitter = BASE_JITTER_PER_N * n
    eye = np.eye(n)
    while True:
        try:
            chol = cholesky(sigma + jitter * eye)
            break
        except NotPositiveDefinite:
            jitter *= 10.0
            if jitter > MAX_JITTER:
                raise IllConditionedGram(
                    f"Cholesky still failing at jitter {jitter:.1e} (> {MAX_JITTER:.0e})"
                ) from None
    from scipy.linalg import cho_solve

    inv = cho_solve((chol, True), eye)
    return KernelGram(sigma=sigma, chol=chol, inv=inv, jitter_applied=jitter, eta=eta)
