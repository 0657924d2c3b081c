"""Hierarchical coupled dictionary model: types, joint log density, generative sampling.

Model summary (column i is one sample, atom k is one dictionary column):

    w_k      ~ N(0, Sigma_w)          Sigma_w built from pose similarity (kernel module)
    z_ki     ~ +1 w.p. sigmoid(w_ik), encoded in {-1, +1}
    s_ki     ~ N(0, 1/gamma_s)
    alpha_ki = (z_ki + 1)/2 * s_ki    spike-and-slab code
    x_i      ~ N(Dx alpha_i, I/gamma_xy)
    y_i      ~ N(Dy alpha_i, I/gamma_xy)
    Dx_jk    ~ N(0, 1/gamma_x),  Dy_jk ~ N(0, 1/gamma_y)
    gamma_*  ~ Gamma(a, b)            rate convention

W is stored N x K so that entry (i, k) pairs with z_ki.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelGram, KernelSpec, build_gram
from .mathcore import RngStream, log_gamma_pdf, log_sigmoid, sigmoid


@dataclass(frozen=True)
class Dataset:
    """Paired input/output sample matrices, one column per sample."""

    x: np.ndarray  # (M_x, N)
    y: np.ndarray  # (M_y, N)
    angle_units: str = "degrees"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("x and y must be 2-D matrices")
        if x.shape[1] != y.shape[1]:
            raise ValueError(f"x has {x.shape[1]} samples but y has {y.shape[1]}")
        if x.shape[1] < 1:
            raise ValueError("need at least one sample")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("non-finite entries in dataset")

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m_x(self) -> int:
        return self.x.shape[0]

    @property
    def m_y(self) -> int:
        return self.y.shape[0]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.x[:, idx], self.y[:, idx], self.angle_units)


@dataclass(frozen=True)
class HyperParams:
    """Gamma hyper-parameters (shape a_*, rate b_*) for the four precisions."""

    a_s: float = 1e-6
    b_s: float = 1e-6
    a_xy: float = 1e-6
    b_xy: float = 1e-6
    a_x: float = 1e-6
    b_x: float = 1e-6
    a_y: float = 1e-6
    b_y: float = 1e-6

    def __post_init__(self):
        for name in ("a_s", "b_s", "a_xy", "b_xy", "a_x", "b_x", "a_y", "b_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def uniform(cls, value: float) -> "HyperParams":
        """All eight hyper-parameters set to the same value."""
        return cls(*([float(value)] * 8))


@dataclass(frozen=True)
class ModelConfig:
    dict_size: int
    hyper: HyperParams = field(default_factory=HyperParams)
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if self.dict_size < 1:
            raise ValueError("dict_size must be >= 1")


@dataclass
class LatentState:
    """One full assignment of the latent variables; what a Gibbs sweep mutates."""

    z: np.ndarray  # (K, N) in {-1, +1}
    s: np.ndarray  # (K, N)
    w: np.ndarray  # (N, K); column k is w_k
    dx: np.ndarray  # (M_x, K)
    dy: np.ndarray  # (M_y, K)
    gamma_s: float
    gamma_xy: float
    gamma_x: float
    gamma_y: float

    def validate(self):
        k, n = self.z.shape
        if self.s.shape != (k, n) or self.w.shape != (n, k):
            raise ValueError("z, s, w dimensions are inconsistent")
        if self.dx.shape[1] != k or self.dy.shape[1] != k:
            raise ValueError("dictionary atom counts disagree with the code")
        if not np.all(np.abs(self.z) == 1.0):
            raise ValueError("z entries must be -1 or +1")
        for name in ("gamma_s", "gamma_xy", "gamma_x", "gamma_y"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        return self

    def copy(self) -> "LatentState":
        return LatentState(
            self.z.copy(), self.s.copy(), self.w.copy(), self.dx.copy(), self.dy.copy(),
            self.gamma_s, self.gamma_xy, self.gamma_x, self.gamma_y,
        )

    @property
    def k(self) -> int:
        return self.z.shape[0]

    @property
    def code(self) -> np.ndarray:
        """The full sparse code matrix A, (K, N)."""
        return 0.5 * (self.z + 1.0) * self.s


def sparse_code(z_col: np.ndarray, s_col: np.ndarray) -> np.ndarray:
    """alpha_k = (z_k + 1)/2 * s_k; exactly zero wherever z_k is -1."""
    z_col = np.asarray(z_col, dtype=float)
    s_col = np.asarray(s_col, dtype=float)
    if z_col.shape != s_col.shape:
        raise ValueError(f"length mismatch: {z_col.shape} vs {s_col.shape}")
    return 0.5 * (z_col + 1.0) * s_col


def reconstruct(d: np.ndarray, z: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Columns d @ sparse_code(z_i, s_i) for every sample i."""
    d = np.asarray(d, dtype=float)
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    if z.shape != s.shape:
        raise ValueError(f"z and s must share a shape, got {z.shape} vs {s.shape}")
    if d.shape[1] != z.shape[0]:
        raise ValueError(f"d has {d.shape[1]} atoms but the code has {z.shape[0]} rows")
    return d @ (0.5 * (z + 1.0) * s)


def joint_log_density(
    state: LatentState, data: Dataset, cfg: ModelConfig, sigma_w: KernelGram
) -> float:
    """Sum of the log densities of every factor in the hierarchy.

    Uses sigma_w's cached Cholesky for the W prior (its jittered matrix is
    the covariance actually used throughout inference).
    """
    h = cfg.hyper
    k, n = state.z.shape
    m_x, m_y = data.m_x, data.m_y
    log2pi = np.log(2.0 * np.pi)

    # W prior: sum_k log N(w_k; 0, sigma_eff)
    quad = state.w.T @ sigma_w.inv @ state.w
    lp = -0.5 * k * (n * log2pi + sigma_w.logdet) - 0.5 * float(np.trace(quad))

    # logistic z prior: entry (k, i) pairs z_ki with w_ik
    lp += float(np.sum(log_sigmoid(state.z * state.w.T)))

    # slab prior on S and its Gamma hyper-prior
    lp += 0.5 * k * n * (np.log(state.gamma_s) - log2pi) - 0.5 * state.gamma_s * float(np.sum(state.s**2))
    lp += log_gamma_pdf(state.gamma_s, h.a_s, h.b_s)

    # data likelihoods under the shared noise precision
    code = state.code
    rx = data.x - state.dx @ code
    ry = data.y - state.dy @ code
    lp += 0.5 * n * (m_x + m_y) * (np.log(state.gamma_xy) - log2pi)
    lp += -0.5 * state.gamma_xy * (float(np.sum(rx**2)) + float(np.sum(ry**2)))
    lp += log_gamma_pdf(state.gamma_xy, h.a_xy, h.b_xy)

    # dictionary priors and their Gamma hyper-priors
    lp += 0.5 * m_x * k * (np.log(state.gamma_x) - log2pi) - 0.5 * state.gamma_x * float(np.sum(state.dx**2))
    lp += log_gamma_pdf(state.gamma_x, h.a_x, h.b_x)
    lp += 0.5 * m_y * k * (np.log(state.gamma_y) - log2pi) - 0.5 * state.gamma_y * float(np.sum(state.dy**2))
    lp += log_gamma_pdf(state.gamma_y, h.a_y, h.b_y)
    return float(lp)


def ancestral_sample(
    cfg: ModelConfig,
    n: int,
    m_x: int,
    m_y: int,
    rng: RngStream,
    y_for_kernel: np.ndarray | None = None,
    gram: KernelGram | None = None,
    fixed_gammas: dict | None = None,
) -> tuple[Dataset, LatentState]:
    """Generate a dataset by running the generative cascade top down.

    The prior covariance of W needs a pose set before any poses exist, so by
    default a standard-normal surrogate pose matrix seeds the Gram; passing
    y_for_kernel (or a prebuilt gram) overrides that. Inference always builds
    its Gram from the observed training outputs, so the surrogate only ever
    shapes generation. fixed_gammas pins any of gamma_s/gamma_xy/gamma_x/gamma_y
    instead of drawing them from their priors (e.g. a huge gamma_xy for
    noiseless data).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = cfg.hyper
    k = cfg.dict_size
    fixed = fixed_gammas or {}

    if gram is None:
        if y_for_kernel is None:
            y_for_kernel = rng.substream(0).gen.standard_normal((m_y, n))
        gram = build_gram(np.asarray(y_for_kernel, dtype=float), cfg.kernel)
    if gram.n != n:
        raise ValueError(f"gram is {gram.n} x {gram.n} but n = {n}")

    g = rng.substream(1).gen
    gamma_s = float(fixed.get("gamma_s", g.gamma(h.a_s, 1.0 / h.b_s)))
    gamma_xy = float(fixed.get("gamma_xy", g.gamma(h.a_xy, 1.0 / h.b_xy)))
    gamma_x = float(fixed.get("gamma_x", g.gamma(h.a_x, 1.0 / h.b_x)))
    gamma_y = float(fixed.get("gamma_y", g.gamma(h.a_y, 1.0 / h.b_y)))

    dx = g.normal(0.0, 1.0 / np.sqrt(gamma_x), size=(m_x, k))
    dy = g.normal(0.0, 1.0 / np.sqrt(gamma_y), size=(m_y, k))
    w = gram.chol @ g.standard_normal((n, k))
    z = np.where(g.random((k, n)) < sigmoid(w.T), 1.0, -1.0)
    s = g.normal(0.0, 1.0 / np.sqrt(gamma_s), size=(k, n))

    code = 0.5 * (z + 1.0) * s
    x = dx @ code + g.normal(0.0, 1.0 / np.sqrt(gamma_xy), size=(m_x, n))
    y = dy @ code + g.normal(0.0, 1.0 / np.sqrt(gamma_xy), size=(m_y, n))

    state = LatentState(z=z, s=s, w=w, dx=dx, dy=dy, gamma_s=gamma_s,
                        gamma_xy=gamma_xy, gamma_x=gamma_x, gamma_y=gamma_y).validate()
    return Dataset(x=x, y=y), state
