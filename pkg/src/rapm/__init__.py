"""Regularized accelerated proximal method (R-APM) for simple bilevel problems.

Minimize an upper-level smooth convex ``f`` over the minimizers of a
lower-level composite ``h + omega``.  The package provides the solver and
baselines, analytically solvable test problems, trace certificates and a
small benchmark CLI (``rapm``).
"""

from .bench import (
    CertReport,
    RateReport,
    Reference,
    certify_lemma_chain,
    certify_budget_bounds,
    certify_rate_envelopes,
    compute_reference,
    estimate_rate,
    evaluate_trace,
    iteration_budget,
    write_trace_csv,
)
from .numerics import dot, matvec, norm1, norm2, spectral_norm_sq
from .oracles import (
    F_eta_value,
    GroundTruth,
    ProblemSpec,
    SmoothOracle,
    f_eta_value,
    grad_f_eta,
    lipschitz_L_eta,
    q_map,
    validate_problem,
)
from .problems import (
    load_regression_csv,
    make_sparse_regression,
    make_weak_sharp_box,
    random_weak_sharp_box,
    verify_weak_sharpness,
)
from .prox import Box, L1Ball, L1Norm, Zero, certify_prox, project_l1_ball, prox
from .solvers import (
    BudgetScaled,
    Fixed,
    IterateTrace,
    MaxStep,
    Scaled,
    SolverConfig,
    WeakSharp,
    airg_solve,
    bigsam_solve,
    fista_lower_solve,
    momentum_next,
    rapm_solve,
    rpm_solve,
    select_eta,
    solve,
)

__version__ = "0.1.0"
