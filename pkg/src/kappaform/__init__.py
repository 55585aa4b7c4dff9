"""Radial operators, vector spherical harmonics and the kappa-family of
extensions of the l = 1 transverse Laplacian, with the associated
quadratic forms and Fock-space algebra."""

__version__ = "0.1.0"

from .errors import DomainError, GridMismatchError, SphericalIndexError, TransversalityError
from .radial import (
    RadialFunction,
    RadialGrid,
    apply_tl,
    apply_tl_inverse,
    inner_angle,
    inner_plain,
    tl_inverse_kernel,
)
from .sphere import (
    AngularPoint,
    AngularQuadrature,
    SphericalIndex,
    VshKind,
    angular_laplacian_action,
    angular_laplacian_matrix,
    eval_vsh,
    eval_ylm,
    vsh,
    vsh_gram,
    ylm,
)
from .extension import (
    FREE,
    ExtensionParam,
    SpectralCoefficients,
    SpectralFamily,
    apply_t1_kappa,
    check_boundary_condition,
    discrete_norm,
    discrete_residual,
    eigen_residual,
    eval_p_free,
    eval_p_kappa,
    eval_q,
    forward_transform,
    inverse_transform,
    phase_shift,
)
from .fieldops import (
    LongitudinalField,
    SampledVectorField,
    TransverseField,
    decompose,
    divergence_residual,
    make_singular_test_field,
    project_transverse,
    read_field,
    reconstruct,
    sample_longitudinal,
    write_field,
)
from .quadform import QuadFormResult, form_q, form_q_kappa_limit, form_q_kappa_spectral, sqrt_kernel_matrix
from .fock import (
    FockCoefficients,
    Mode,
    ModeState,
    ModeSystem,
    apply_annihilate,
    apply_create,
    apply_hamiltonian,
    build_n_particle,
    commutator_defect,
    eigen_check,
    vacuum_state,
)

__all__ = [
    "AngularPoint",
    "AngularQuadrature",
    "DomainError",
    "ExtensionParam",
    "FREE",
    "FockCoefficients",
    "GridMismatchError",
    "LongitudinalField",
    "Mode",
    "ModeState",
    "ModeSystem",
    "QuadFormResult",
    "RadialFunction",
    "RadialGrid",
    "SampledVectorField",
    "SpectralCoefficients",
    "SpectralFamily",
    "SphericalIndex",
    "SphericalIndexError",
    "TransversalityError",
    "TransverseField",
    "VshKind",
    "angular_laplacian_action",
    "angular_laplacian_matrix",
    "apply_annihilate",
    "apply_create",
    "apply_hamiltonian",
    "apply_t1_kappa",
    "apply_tl",
    "apply_tl_inverse",
    "build_n_particle",
    "check_boundary_condition",
    "commutator_defect",
    "decompose",
    "discrete_norm",
    "discrete_residual",
    "divergence_residual",
    "eigen_check",
    "eigen_residual",
    "eval_p_free",
    "eval_p_kappa",
    "eval_q",
    "eval_vsh",
    "eval_ylm",
    "form_q",
    "form_q_kappa_limit",
    "form_q_kappa_spectral",
    "forward_transform",
    "inner_angle",
    "inner_plain",
    "inverse_transform",
    "make_singular_test_field",
    "phase_shift",
    "project_transverse",
    "read_field",
    "reconstruct",
    "sample_longitudinal",
    "sqrt_kernel_matrix",
    "tl_inverse_kernel",
    "vacuum_state",
    "vsh",
    "vsh_gram",
    "write_field",
    "ylm",
]
