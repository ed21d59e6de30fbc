"""Ball-Majumdar potential, analytic-estimate certificates, and a
pseudo-spectral solver for non-isothermal Q-tensor flow."""
from .partition import (SphereQuadrature, build_quadrature, default_quadrature, logZ_grad,
                        logZ_hess, partition_Z)
from .bm_potential import (ConvergenceError, DomainError, EigenFrame, PotentialEval, Spectrum,
                           df_dQ, eigendecomp_sym3, f_of_Q, fbm_eval, hess_contract,
                           primal_entropy_oracle, solve_mu)

__version__ = "0.1.0"
