import numpy as np

from finres.tvpvar import TvpVarPosterior, TvpVarSpec, matrices_to_beta


def month_labels(n, start_year=2000):
    return tuple(f"{start_year + i // 12}-{i % 12 + 1:02d}" for i in range(n))


def constant_posterior(B, alpha=None, h=None, n=10, c=None, columns=None):
    """Posterior whose means hold the given parameters fixed over n dates."""
    B = np.asarray(B, float)
    if B.ndim == 2:
        B = B[None]
    s, k, _ = B.shape
    spec = TvpVarSpec(k=k, lags=s)
    c = np.zeros(k) if c is None else np.asarray(c, float)
    beta = np.tile(matrices_to_beta(c, B), (n, 1))
    alpha = np.zeros(spec.n_alpha) if alpha is None else np.asarray(alpha, float)
    h = np.zeros(k) if h is None else np.asarray(h, float)
    alpha = np.tile(alpha, (n, 1)) if alpha.ndim == 1 else alpha
    h = np.tile(h, (n, 1)) if h.ndim == 1 else h
    return TvpVarPosterior(
        spec=spec,
        dates=month_labels(n),
        columns=tuple(columns or (f"y{i + 1}" for i in range(k))),
        beta_mean=beta, beta_sd=np.zeros_like(beta),
        alpha_mean=alpha, alpha_sd=np.zeros_like(alpha),
        h_mean=h, h_sd=np.zeros_like(h),
        innovation_draws=np.zeros((4, spec.n_beta + spec.n_alpha + k)),
    )


def random_stable(rng, k, lags=1, radius=0.9):
    """Lag matrices whose companion spectral radius is at most ``radius``."""
    from finres.irf import companion_matrix

    B = rng.standard_normal((lags, k, k))
    rho = np.abs(np.linalg.eigvals(companion_matrix(B))).max()
    if rho == 0:
        return B
    # scaling B_l by a**l scales every companion eigenvalue by a
    a = radius * rng.uniform(0.3, 1.0) / rho
    return B * a ** np.arange(1, lags + 1)[:, None, None]
