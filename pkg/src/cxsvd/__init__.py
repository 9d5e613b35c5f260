"""Reverse-mode differentiation of complex matrix programs through the SVD."""

from .errors import (
    ConfigError, ConvergenceFailure, CxsvdError, DegenerateSpectrum, DivergenceDetected,
    NonFiniteInput, NonRealLoss, NotSquare, ShapeMismatch, SingularSInverse,
)
from .fd_oracle import (
    LOSS_NAMES, LossSpec, catalogue, dot_test, make_loss, project_gauge_invariant,
    wirtinger_grad_matrix, wirtinger_grad_scalar,
)
from .harness import RunConfig, rel_error, run_gradcheck, run_optimize, tape_gradient
from .matrix_core import (
    SpectrumPolicy, adjoint, diag_part, hadamard, load_matrix, offdiag_part, real_inner,
    save_matrix, seeded_random,
)
from .svd_engine import GaugeTransform, SvdFactors, apply_gauge, spectral_gap, svd
from .svd_grad import (
    SvdCotangents, VjpOptions, build_gap_matrix, gauge_residual, svd_jvp_square, svd_vjp,
    svd_vjp_rect, svd_vjp_square, svd_vjp_square_variant,
)
from .tape import Tape, backward

__version__ = "0.1.0"
