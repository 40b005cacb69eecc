from .archive import load_posterior, save_posterior
from .diagnostics import (
    DiagnosticsRow,
    geweke_cd,
    inefficiency_factor,
    posterior_summary,
    spectral_variance,
    write_summary_csv,
)
from .model import (
    McmcConfig,
    PriorSet,
    Simulation,
    TvpVarPosterior,
    TvpVarSpec,
    alpha_to_matrix,
    beta_to_matrices,
    estimate_mcmc,
    lag_matrix,
    matrices_to_beta,
    model_seed,
    simulate_dgp,
    var_ols,
)
