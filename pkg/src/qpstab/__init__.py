"""Stability certificates and Liapunov functions for quasipolynomial ODE systems."""

__version__ = "0.1.0"

from .certificate import (
    CertificateConfig,
    Classification,
    DiagonalScaling,
    StabilityCertificate,
    classify,
    search_certificate,
    symmetrized_form,
    verify_certificate,
)
from .dynamics import (
    IntegratorConfig,
    MonitorConfig,
    TrajectoryRecord,
    conservation_check,
    integrate,
    monitor_liapunov,
)
from .equilibrium import Equilibrium, EquilibriumConfig, find_equilibrium, residual
from .kernels import BACKEND
from .liapunov import (
    LiapunovEvaluation,
    chain_rule_Wdot,
    evaluate_W,
    evaluate_Wdot,
    gradient_W,
    positivity_oracle,
)
from .model import (
    ExtendedExponentMatrix,
    QPSystem,
    extend_exponent_matrix,
    from_lotka_volterra,
    interaction_matrix,
    quasimonomial_jacobian,
    quasimonomials,
    shifted_vector_field,
    validate_system,
    vector_field,
)
