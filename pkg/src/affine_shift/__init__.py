"""Shift-based Greeks for the affine diffusion dX = sqrt(alpha X) dW + (beta X + b) dt."""
from .core import AffineParams, BoundaryClass, MultiParams, char_fn, classify_boundary, growth, mean
from .density import NoncentralChiSquareRep, expectation_via_density, transition_density, transition_rep
from .errors import (
    AffineError,
    CoefficientIdentityError,
    DomainError,
    FellerViolation,
    NonRealError,
    NumericalError,
    QuadratureError,
    ResourceError,
    UnsupportedError,
)
from .greeks import (
    Density,
    GreekResult,
    Inversion,
    MonteCarlo,
    TensorFunction,
    dbeta_shift,
    delta_combined,
    delta_shift,
    fd_oracle,
    ibp_shift,
    multi_combined,
    multi_delta,
    multi_ibp,
)
from .simulate import MCConfig, mc_expectation, sample_exact, sample_path_euler
from .transforms import QuadratureConfig, expectation_via_inversion, parse_test_function

__version__ = "0.1.0"
