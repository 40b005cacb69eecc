"""TVP-VAR with stochastic volatility: specification, simulation and MCMC.

Model, for t = s+1..T::

    y_t = c_t + B_{1,t} y_{t-1} + ... + B_{s,t} y_{t-s} + e_t,   e_t ~ N(0, Omega_t)
    Omega_t = A_t^{-1} Sigma_t Sigma_t' A_t^{-T},  Sigma_t = diag(exp(h_t / 2))

with beta_t (stacked rows of [c_t, B_{1,t}, ..., B_{s,t}]), alpha_t (free
lower-triangular entries of A_t, row by row) and h_t all following random
walks with diagonal innovation covariances Sigma_beta, Sigma_alpha, Sigma_h.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..dataio import TimeSeriesPanel, month_index, month_label
from ..errors import NumericalError, ValidationError
from . import _kernels

log = logging.getLogger(__name__)

# Omori, Chib, Shephard and Nakajima (2007): 10-component normal mixture
# approximating the log chi-square(1) distribution.
MIXTURE_PROBS = np.array([0.00609, 0.04775, 0.13057, 0.20674, 0.22715,
                          0.18842, 0.12047, 0.05591, 0.01575, 0.00115])
MIXTURE_MEANS = np.array([1.92677, 1.34744, 0.73504, 0.02266, -0.85173,
                          -1.97278, -3.46788, -5.55246, -8.68384, -14.65000])
MIXTURE_VARS = np.array([0.11265, 0.17788, 0.26768, 0.40611, 0.62699,
                         0.98583, 1.57469, 2.54498, 4.16591, 7.33342])


@dataclass(frozen=True)
class PriorSet:
    """Initial-state normals and inverse-gamma (shape, scale) innovation priors.

    Means and variances may be scalars (broadcast, variance times identity),
    vectors, or full covariance matrices.
    """

    mean_beta0: float | Sequence[float] = 0.0
    cov_beta0: float | Sequence = 10.0
    mean_alpha0: float | Sequence[float] = 0.0
    cov_alpha0: float | Sequence = 10.0
    mean_h0: float | Sequence[float] = 0.0
    cov_h0: float | Sequence = 10.0
    beta_shape: float = 20.0
    beta_scale: float = 1e-4
    alpha_shape: float = 2.0
    alpha_scale: float = 1e-4
    h_shape: float = 2.0
    h_scale: float = 1e-4

    def __post_init__(self):
        for name in ("beta", "alpha", "h"):
            if not (getattr(self, f"{name}_shape") > 0 and getattr(self, f"{name}_scale") > 0):
                raise ValidationError(f"inverse-gamma prior for {name} needs positive shape and scale")

    def initial(self, block: str, dim: int) -> tuple[np.ndarray, np.ndarray]:
        mean = np.broadcast_to(np.asarray(getattr(self, f"mean_{block}0"), float), (dim,)).copy()
        cov = np.asarray(getattr(self, f"cov_{block}0"), float)
        if cov.ndim == 0:
            cov = float(cov) * np.eye(dim)
        elif cov.ndim == 1:
            cov = np.diag(np.broadcast_to(cov, (dim,)))
        if cov.shape != (dim, dim):
            raise ValidationError(f"prior covariance for {block} has shape {cov.shape}, expected {(dim, dim)}")
        if dim and (not np.allclose(cov, cov.T) or np.linalg.eigvalsh(cov).min() <= 0):
            raise ValidationError(f"prior covariance for {block} is not symmetric positive definite")
        return mean, cov


@dataclass(frozen=True)
class McmcConfig:
    draws: int = 11000
    burn_in: int = 1000
    seed: int = 20240101
    thin: int = 1
    store_paths: bool = False

    def __post_init__(self):
        if self.draws <= 0 or self.burn_in < 0 or self.thin <= 0:
            raise ValidationError("draws and thin must be positive, burn_in nonnegative")
        if self.draws <= self.burn_in:
            raise ValidationError(f"draws ({self.draws}) must exceed burn_in ({self.burn_in})")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    @property
    def retained(self) -> int:
        return len(range(self.burn_in, self.draws, self.thin))


@dataclass(frozen=True)
class TvpVarSpec:
    k: int
    lags: int = 1
    horizon_T: int | None = None
    priors: PriorSet = field(default_factory=PriorSet)
    mcmc: McmcConfig = field(default_factory=McmcConfig)

    def __post_init__(self):
        if self.k < 1 or self.lags < 1:
            raise ValidationError("need k >= 1 and lags >= 1")
        if self.horizon_T is not None and self.horizon_T <= self.lags + 10:
            raise ValidationError(f"sample length {self.horizon_T} must exceed lags + 10")

    @property
    def n_regressors(self) -> int:
        return 1 + self.k * self.lags

    @property
    def n_beta(self) -> int:
        return self.k * self.n_regressors

    @property
    def n_alpha(self) -> int:
        return self.k * (self.k - 1) // 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TvpVarSpec":
        def arr(v):
            return tuple(map(arr, v)) if isinstance(v, list) else v

        priors = PriorSet(**{k: arr(v) for k, v in d["priors"].items()})
        return cls(k=d["k"], lags=d["lags"], horizon_T=d.get("horizon_T"), priors=priors,
                   mcmc=McmcConfig(**d["mcmc"]))


def alpha_to_matrix(alpha: np.ndarray, k: int) -> np.ndarray:
    """Unit lower-triangular A from its free entries; works on (..., na) arrays."""
    alpha = np.asarray(alpha, float)
    A = np.zeros(alpha.shape[:-1] + (k, k))
    A[..., range(k), range(k)] = 1.0
    rows, cols = np.tril_indices(k, -1)
    # tril_indices orders row by row, matching the alpha layout
    A[..., rows, cols] = alpha
    return A


def beta_to_matrices(beta: np.ndarray, k: int, lags: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a coefficient vector (..., k*(1+k*lags)) into intercepts and B_1..B_s.

    Returns (c (..., k), B (..., lags, k, k)).
    """
    beta = np.asarray(beta, float)
    r = 1 + k * lags
    rows = beta.reshape(beta.shape[:-1] + (k, r))
    c = rows[..., 0]
    B = rows[..., 1:].reshape(beta.shape[:-1] + (k, lags, k))
    return c, np.moveaxis(B, -2, -3)


def matrices_to_beta(c: np.ndarray, B: np.ndarray) -> np.ndarray:
    c = np.asarray(c, float)
    B = np.asarray(B, float)
    if B.ndim == 2:
        B = B[None]
    lags, k, _ = B.shape
    rows = np.concatenate([c.reshape(k, 1), np.moveaxis(B, 0, 1).reshape(k, lags * k)], axis=1)
    return rows.reshape(-1)


def lag_matrix(y: np.ndarray, lags: int) -> np.ndarray:
    """Regressors [1, y_{t-1}, ..., y_{t-s}] for t = s..T-1."""
    T, k = y.shape
    cols = [np.ones((T - lags, 1))]
    for l in range(1, lags + 1):
        cols.append(y[lags - l:T - l])
    return np.hstack(cols)


@dataclass
class Simulation:
    panel: TimeSeriesPanel
    beta: np.ndarray
    alpha: np.ndarray
    h: np.ndarray


def _path(value, T: int, dim: int, innov, rng: np.random.Generator, name: str) -> np.ndarray:
    v = np.asarray(value, float)
    if v.ndim == 2:
        if v.shape != (T, dim):
            raise ValidationError(f"{name} path has shape {v.shape}, expected {(T, dim)}")
        return v.copy()
    v = np.broadcast_to(v, (dim,)).astype(float)
    q = np.asarray(innov, float)
    if q.ndim == 2:
        if q.shape != (dim, dim):
            raise ValidationError(f"{name} innovation covariance has shape {q.shape}")
        w, V = np.linalg.eigh((q + q.T) / 2)
        if dim and w.min() < -1e-12 * max(1.0, abs(w).max()):
            raise ValidationError(f"{name} innovation covariance is not positive semidefinite")
        chol_q = V * np.sqrt(np.maximum(w, 0.0))
    else:
        q = np.broadcast_to(q, (dim,))
        if np.any(q < 0):
            raise ValidationError(f"{name} innovation variances must be nonnegative")
        chol_q = np.diag(np.sqrt(q))
    steps = rng.standard_normal((T - 1, dim)) @ chol_q.T
    return np.vstack([v, v + np.cumsum(steps, axis=0)]) if T > 1 else v[None]


def simulate_dgp(
    k: int,
    T: int,
    lags: int = 1,
    beta=0.0,
    alpha=0.0,
    h=0.0,
    var_beta=0.0,
    var_alpha=0.0,
    var_h=0.0,
    seed: int = 0,
    presample: int = 50,
    start: str = "2000-01",
    columns: Sequence[str] | None = None,
) -> Simulation:
    """Generate data from the TVP-VAR-SV model.

    ``beta``, ``alpha`` and ``h`` are either full (T, dim) paths or starting
    values that then evolve as random walks with the given innovation variances
    (scalars, diagonal vectors or full covariance matrices). ``presample`` rows
    are generated with the first-period parameters and discarded.
    """
    spec = TvpVarSpec(k=k, lags=lags)
    if T < 2:
        raise ValidationError("T must be at least 2")
    rng = np.random.default_rng(seed)
    beta_p = _path(beta, T, spec.n_beta, var_beta, rng, "beta")
    alpha_p = _path(alpha, T, spec.n_alpha, var_alpha, rng, "alpha")
    h_p = _path(h, T, k, var_h, rng, "h")
    c, B = beta_to_matrices(beta_p, k, lags)
    A = alpha_to_matrix(alpha_p, k)
    total = T + presample
    eps = rng.standard_normal((total, k))
    y = np.zeros((total + lags, k))
    for row in range(total):
        t = max(row - presample, 0)
        e = np.linalg.solve(A[t], np.exp(h_p[t] / 2) * eps[row])
        val = c[t] + e
        for l in range(lags):
            val = val + B[t, l] @ y[row + lags - 1 - l]
        y[row + lags] = val
    data = y[lags + presample:]
    first = month_index(start)
    dates = tuple(month_label(first + i) for i in range(T))
    cols = tuple(columns) if columns else tuple(f"y{i + 1}" for i in range(k))
    return Simulation(TimeSeriesPanel(dates, cols, data), beta_p, alpha_p, h_p)


@dataclass
class TvpVarPosterior:
    """Posterior of a TVP-VAR-SV fit.

    Path arrays are indexed by estimation period t = s+1..T (``dates``).
    ``innovation_draws`` has one column per diagonal element of Sigma_beta,
    Sigma_alpha and Sigma_h, in that order. These are standard deviations; the
    inverse-gamma priors apply to their squares. Full path draws are only kept when
    the sampler ran with ``store_paths``.
    """

    spec: TvpVarSpec
    dates: tuple[str, ...]
    columns: tuple[str, ...]
    beta_mean: np.ndarray
    beta_sd: np.ndarray
    alpha_mean: np.ndarray
    alpha_sd: np.ndarray
    h_mean: np.ndarray
    h_sd: np.ndarray
    innovation_draws: np.ndarray
    beta_draws: np.ndarray | None = None
    alpha_draws: np.ndarray | None = None
    h_draws: np.ndarray | None = None
    summary: list = field(default_factory=list)

    @property
    def n_periods(self) -> int:
        return self.beta_mean.shape[0]

    @property
    def innovation_names(self) -> list[str]:
        s = self.spec
        return ([f"(Sigma_beta)_{i + 1}" for i in range(s.n_beta)]
                + [f"(Sigma_alpha)_{i + 1}" for i in range(s.n_alpha)]
                + [f"(Sigma_h)_{i + 1}" for i in range(s.k)])

    def innovation_block(self, block: str) -> np.ndarray:
        s = self.spec
        bounds = {"beta": (0, s.n_beta), "alpha": (s.n_beta, s.n_beta + s.n_alpha),
                  "h": (s.n_beta + s.n_alpha, s.n_beta + s.n_alpha + s.k)}[block]
        return self.innovation_draws[:, bounds[0]:bounds[1]]

    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Posterior-mean intercepts (n, k) and lag matrices (n, s, k, k)."""
        return beta_to_matrices(self.beta_mean, self.spec.k, self.spec.lags)

    def contemporaneous(self) -> np.ndarray:
        """Posterior-mean A_t, shape (n, k, k)."""
        return alpha_to_matrix(self.alpha_mean, self.spec.k)

    def volatility(self) -> np.ndarray:
        """sigma_{i,t} = exp(h_{i,t} / 2) at posterior-mean h, shape (n, k)."""
        return np.exp(self.h_mean / 2)

    def covariance(self) -> np.ndarray:
        """Omega_t from posterior-mean alpha and h, shape (n, k, k)."""
        Ainv = np.linalg.inv(self.contemporaneous())
        S = self.volatility()
        L = Ainv * S[:, None, :]
        return L @ np.swapaxes(L, -1, -2)


def _stream_seed(seed: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, zlib.crc32(label.encode())])


def model_seed(seed: int, label: str) -> int:
    """Derive an independent reproducible seed for a named sub-model."""
    return int(_stream_seed(seed, label).generate_state(2, np.uint32).view(np.uint64)[0])


def _ols_start(y: np.ndarray, X: np.ndarray, k: int):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    cov = resid.T @ resid / max(y.shape[0] - X.shape[1], 1)
    cov = (cov + cov.T) / 2 + 1e-12 * np.trace(cov) / k * np.eye(k)
    L = np.linalg.cholesky(cov)
    d = np.diag(L)
    unit = L / d
    A = np.linalg.inv(unit)
    alpha = A[np.tril_indices(k, -1)]
    return coef.T.reshape(-1), alpha, np.log(d**2)


def _draw_variances(path: np.ndarray, shape: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    d = np.diff(path, axis=0)
    a = shape + d.shape[0] / 2.0
    b = scale + 0.5 * np.sum(d * d, axis=0)
    return b / rng.gamma(a, 1.0, size=b.shape)


def _draw_mixture(ystar: np.ndarray, h: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    resid = (ystar - h)[..., None] - MIXTURE_MEANS
    logw = np.log(MIXTURE_PROBS) - 0.5 * np.log(MIXTURE_VARS) - 0.5 * resid**2 / MIXTURE_VARS
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    cw = np.cumsum(w, axis=-1)
    u = rng.random(ystar.shape)[..., None] * cw[..., -1:]
    return np.minimum((u > cw).sum(axis=-1), MIXTURE_PROBS.size - 1)


def estimate_mcmc(panel: TimeSeriesPanel | np.ndarray, spec: TvpVarSpec, progress: bool = False) -> TvpVarPosterior:
    """Gibbs sampler for the TVP-VAR-SV model.

    Each sweep draws the coefficient path and the contemporaneous path by
    forward filtering / backward sampling, the log-volatility path through the
    10-component mixture representation of log chi-square(1), and finally the
    diagonal random-walk innovation variances from their inverse-gamma
    conditionals. Draws before ``burn_in`` are discarded.
    """
    if isinstance(panel, TimeSeriesPanel):
        data, dates, columns = panel.values, panel.dates, panel.columns
    else:
        data = np.asarray(panel, float)
        dates = tuple(month_label(24000 + i) for i in range(data.shape[0]))
        columns = tuple(f"y{i + 1}" for i in range(data.shape[1]))
    if data.ndim != 2 or data.shape[1] != spec.k:
        raise ValidationError(f"panel has {data.shape[1] if data.ndim == 2 else '?'} columns, spec expects k={spec.k}")
    T = data.shape[0]
    s, k = spec.lags, spec.k
    if T <= s + 10:
        raise ValidationError(f"insufficient sample: T={T} must exceed lags + 10 = {s + 10}")
    if not np.all(np.isfinite(data)):
        raise ValidationError("panel contains non-finite values")

    cfg = spec.mcmc
    pri = spec.priors
    rng = np.random.Generator(np.random.PCG64(_stream_seed(cfg.seed, "tvpvar-gibbs")))

    Y = np.ascontiguousarray(data[s:])
    X = np.ascontiguousarray(lag_matrix(data, s))
    n = Y.shape[0]
    mb, na = spec.n_beta, spec.n_alpha

    b0_mean, b0_cov = pri.initial("beta", mb)
    a0_mean, a0_cov = pri.initial("alpha", na)
    h0_mean, h0_cov = pri.initial("h", k)

    beta_init, alpha_init, h_init = _ols_start(Y, X, k)
    beta = np.tile(beta_init, (n, 1))
    alpha = np.tile(alpha_init, (n, 1))
    h = np.tile(h_init, (n, 1))
    q_beta = np.full(mb, pri.beta_scale / max(pri.beta_shape - 1, 1.0))
    q_alpha = np.full(na, pri.alpha_scale / max(pri.alpha_shape - 1, 1.0))
    q_h = np.full(k, pri.h_scale / max(pri.h_shape - 1, 1.0))

    keep = cfg.retained
    innov = np.empty((keep, mb + na + k))
    sums = {name: np.zeros((n, d)) for name, d in (("beta", mb), ("alpha", na), ("h", k))}
    sq = {name: np.zeros((n, d)) for name, d in (("beta", mb), ("alpha", na), ("h", k))}
    paths = None
    if cfg.store_paths:
        paths = {"beta": np.empty((keep, n, mb)), "alpha": np.empty((keep, n, na)), "h": np.empty((keep, n, k))}
    eye_k = np.broadcast_to(np.eye(k), (n, k, k)).copy()

    slot = 0
    for it in range(cfg.draws):
        A = alpha_to_matrix(alpha, k) if na else eye_k
        Z, H = _kernels.build_beta_system(Y, X, A, h)
        beta, status = _kernels.ffbs(Y, Z, H, q_beta, b0_mean, b0_cov, rng.standard_normal((n, mb)))
        if status >= 0:
            raise NumericalError(f"covariance not positive definite at t={status}", iteration=it, block="beta")

        resid = Y - np.einsum("tij,tj->ti", Z, beta)
        if na:
            ya, Za, Ha = _kernels.build_alpha_system(resid, h)
            alpha, status = _kernels.ffbs(ya, Za, Ha, q_alpha, a0_mean, a0_cov, rng.standard_normal((n, na)))
            if status >= 0:
                raise NumericalError(f"covariance not positive definite at t={status}", iteration=it, block="alpha")
            A = alpha_to_matrix(alpha, k)
            struct = np.einsum("tij,tj->ti", A, resid)
        else:
            struct = resid

        e2 = struct**2
        ystar = np.log(e2 + 1e-6 * e2.mean(axis=0) + 1e-300)
        comp = _draw_mixture(ystar, h, rng)
        Hh = np.zeros((n, k, k))
        Hh[:, range(k), range(k)] = MIXTURE_VARS[comp]
        h, status = _kernels.ffbs(np.ascontiguousarray(ystar - MIXTURE_MEANS[comp]), eye_k, Hh, q_h,
                                  h0_mean, h0_cov, rng.standard_normal((n, k)))
        if status >= 0:
            raise NumericalError(f"covariance not positive definite at t={status}", iteration=it, block="h")

        q_beta = _draw_variances(beta, pri.beta_shape, pri.beta_scale, rng)
        if na:
            q_alpha = _draw_variances(alpha, pri.alpha_shape, pri.alpha_scale, rng)
        q_h = _draw_variances(h, pri.h_shape, pri.h_scale, rng)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            # stored as standard deviations: the diagonal of Sigma_beta etc.
            innov[slot] = np.sqrt(np.concatenate([q_beta, q_alpha, q_h]))
            for name, val in (("beta", beta), ("alpha", alpha), ("h", h)):
                sums[name] += val
                sq[name] += val * val
                if paths is not None:
                    paths[name][slot] = val
            slot += 1
        if progress and (it + 1) % 1000 == 0:
            log.info("iteration %d / %d", it + 1, cfg.draws)

    means = {name: sums[name] / keep for name in sums}
    sds = {name: np.sqrt(np.maximum(sq[name] / keep - means[name] ** 2, 0.0)) for name in sums}
    post = TvpVarPosterior(
        spec=spec,
        dates=tuple(dates[s:]),
        columns=tuple(columns),
        beta_mean=means["beta"], beta_sd=sds["beta"],
        alpha_mean=means["alpha"], alpha_sd=sds["alpha"],
        h_mean=means["h"], h_sd=sds["h"],
        innovation_draws=innov,
        beta_draws=paths["beta"] if paths else None,
        alpha_draws=paths["alpha"] if paths else None,
        h_draws=paths["h"] if paths else None,
    )
    from .diagnostics import posterior_summary

    post.summary = posterior_summary(post)
    return post


def var_ols(panel: TimeSeriesPanel | np.ndarray, lags: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant-coefficient VAR by OLS: (intercepts (k,), B (lags, k, k), residual covariance)."""
    data = panel.values if isinstance(panel, TimeSeriesPanel) else np.asarray(panel, float)
    T, k = data.shape
    Y = data[lags:]
    X = lag_matrix(data, lags)
    if Y.shape[0] <= X.shape[1]:
        raise ValidationError("too few observations for the VAR order")
    coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
    resid = Y - X @ coef
    cov = resid.T @ resid / (Y.shape[0] - X.shape[1])
    c, B = beta_to_matrices(coef.T.reshape(-1), k, lags)
    return c, B, cov


__all__ = [
    "PriorSet", "McmcConfig", "TvpVarSpec", "TvpVarPosterior", "Simulation",
    "simulate_dgp", "estimate_mcmc", "alpha_to_matrix", "beta_to_matrices",
    "matrices_to_beta", "lag_matrix", "model_seed", "var_ols",
]
