"""Finite models of basic-form complexes of Riemannian foliations.

The package assembles d, the transversal star, the basic codifferential,
the twisted pair and the basic Dirac operator as matrices over spectral
bases, and checks spectral statements about them numerically.
"""
__version__ = "0.1.0"

from .complex import (
    BasicOneForm,
    ConditioningError,
    ConsistencyError,
    GradedOperator,
    ModelDefinitionError,
    NilpotencyError,
    NonPositiveWeightError,
    NotClosedError,
    ReducedBasicComplex,
    UnsupportedModelError,
    assemble_codifferential,
    assemble_d,
    assemble_dirac,
    assemble_form_action,
    assemble_hodge_star,
    assemble_laplacian,
    assemble_signature_operator,
    assemble_twisted_duality_differential,
    assemble_twisted_pair,
    gram_matrix,
    orthonormal_change_of_basis,
)
from .models import (
    BUILTIN_MODELS,
    BasicFunction,
    CurvatureData,
    ModelDescriptor,
    build_carriere_model,
    build_circle_fibration_model,
    build_hopf_de_rham_model,
    build_hopf_spinor_model,
    build_model,
    build_sphere_base_model,
    build_torus_base_model,
    deform_complex,
    exp_of,
    fourier_mode,
    harmonic_sum,
    load_synthetic_model,
    model_curvature_data,
)
from .spectral import (
    BettiTable,
    Spectrum,
    betti_table,
    compare_spectra,
    compute_spectrum,
    spectrum_of,
)
from .lab import (
    ExperimentConfig,
    Report,
    check_basic_harmonic,
    check_conjugation,
    deform_bundle_like_metric,
    run_duality_experiment,
    run_estimate_experiment,
    run_experiment,
    run_invariance_experiment,
    run_validation_suite,
)
