"""Data-driven bilinear Koopman lifting and stabilizing-gain synthesis.

Workflow: build a monomial dictionary, fit the lifted bilinear model from
unforced snapshot pairs (EDMD), check the sampled accessibility-rank
certificate, synthesize a gain under the stabilization LMI, and validate
the closed loop on the Van der Pol and Henon benchmarks.
"""

from .controllability import (
    AccessibilityReport,
    BracketChain,
    accessibility_matrix,
    bracket_chain,
    controllability_report,
)
from .dictionary import Dictionary, build_dictionary, evaluate, evaluate_batch, jacobian
from .edmd import (
    KoopmanApproximation,
    LiftedBilinearModel,
    SnapshotData,
    assemble_model,
    build_gram_matrices,
    fit_koopman,
    fit_lifted_B,
    fit_lifted_model,
    fit_projection_C,
    real_block_A,
    real_eigen_transform,
)
from .errors import BlowupError, FitError, FormatError, KoopctlError, SynthesisError
from .synthesis import (
    EllipsoidCertificate,
    SynthesisConfig,
    SynthesisResult,
    build_stabilization_lmi,
    extract_gain,
    petersen_check,
    solve_detmax,
    verify_clf,
)
from .systems import (
    Henon,
    HenonParams,
    Trajectory,
    VanDerPol,
    VanDerPolParams,
    closed_loop_simulate,
    generate_training_data,
    henon_step,
    invariant_measure_histogram,
    vdp_step,
)

__all__ = [
    "AccessibilityReport",
    "BlowupError",
    "BracketChain",
    "Dictionary",
    "EllipsoidCertificate",
    "FitError",
    "FormatError",
    "Henon",
    "HenonParams",
    "KoopctlError",
    "KoopmanApproximation",
    "LiftedBilinearModel",
    "SnapshotData",
    "SynthesisConfig",
    "SynthesisResult",
    "SynthesisError",
    "Trajectory",
    "VanDerPol",
    "VanDerPolParams",
    "accessibility_matrix",
    "assemble_model",
    "bracket_chain",
    "build_dictionary",
    "build_gram_matrices",
    "build_stabilization_lmi",
    "closed_loop_simulate",
    "controllability_report",
    "evaluate",
    "evaluate_batch",
    "extract_gain",
    "fit_koopman",
    "fit_lifted_B",
    "fit_lifted_model",
    "fit_projection_C",
    "generate_training_data",
    "henon_step",
    "invariant_measure_histogram",
    "jacobian",
    "petersen_check",
    "real_block_A",
    "real_eigen_transform",
    "solve_detmax",
    "vdp_step",
    "verify_clf",
]
