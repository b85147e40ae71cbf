from .conditionals import (cond_sigma2, gee_cond_w, gee_cond_z, grrn_cond_lambda,
                           grrn_cond_mu, grrn_cond_tau, grrn_cond_w, grrn_cond_z,
                           gtt_cond_w, gtt_cond_z, gttn_cond_mu, gttn_cond_mu_tau,
                           gttn_cond_tau, gttn_cond_w, gttn_cond_z)
from .gibbs import (ModelKind, NumericalError, RunConfig, RunTrace, gibbs_sweep,
                    init_state, run_gibbs)
from .npnmf import npnmf_step, run_npnmf

__all__ = [
    "ModelKind", "NumericalError", "RunConfig", "RunTrace", "cond_sigma2",
    "gee_cond_w", "gee_cond_z", "gibbs_sweep", "grrn_cond_lambda", "grrn_cond_mu",
    "grrn_cond_tau", "grrn_cond_w", "grrn_cond_z", "gtt_cond_w", "gtt_cond_z",
    "gttn_cond_mu", "gttn_cond_mu_tau", "gttn_cond_tau", "gttn_cond_w",
    "gttn_cond_z", "init_state", "npnmf_step", "run_gibbs", "run_npnmf",
]
