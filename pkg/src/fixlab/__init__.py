"""fixlab: distance-structure classification and fixed-point diagnostics.

Numerical laboratory for generalized distances (symmetric, triangular,
reflexive triangular, partial-metric-like), comparison functions, gauge
contractions, Picard iteration, and sequence witnesses.  Heavy scans run
on numba kernels when available, with a pure numpy fallback
(FIXLAB_NUMBA=0 forces the fallback).
"""

from . import backend, defaults
from .expr import (
    EvaluationError,
    ExprError,
    MissingBindingError,
    ParseError,
    UnknownVariableError,
    compile_program,
    evaluate,
    parse,
    to_source,
)
from .gauge import (
    GAUGES,
    ContractionReport,
    MapError,
    SelfMapSpec,
    analytic_map,
    gauge_matrices,
    gauge_table,
    gauge_value,
    tabulated_map,
    verify_contraction,
)
from .phi import (
    ComparisonFunction,
    LimsupEstimate,
    PhiError,
    check_asymptotic_normal,
    check_nearly_right_admissible,
    check_normal,
    comparison_function,
    estimate_L_plus,
)
from .picard import (
    FixedPointSets,
    PicardTrace,
    TheoremVerdict,
    brute_force_fixed_points,
    check_d_asymptotic,
    default_starts,
    descent_profile,
    detect_0d_cauchy,
    find_0d_limit,
    iterate,
    run_theorem_harness,
)
from .seqlab import (
    SemiCauchyProfile,
    SequenceError,
    SequencePrefix,
    WitnessReport,
    WitnessRow,
    lemma1_witness,
    lemma2_check,
    load_sequence_file,
    semi_cauchy_profile,
    sequence_from_points,
    sequence_from_table,
)
from .space import (
    AxiomId,
    AxiomReport,
    DistanceStructure,
    SpaceError,
    StructureClass,
    analytic_space,
    check_axiom,
    classify_structure,
    tabulated_space,
)
from .verdicts import Verdict, to_jsonable

__version__ = "0.1.0"

__all__ = [
    "AxiomId",
    "AxiomReport",
    "ComparisonFunction",
    "ContractionReport",
    "DistanceStructure",
    "EvaluationError",
    "ExprError",
    "FixedPointSets",
    "GAUGES",
    "LimsupEstimate",
    "MapError",
    "MissingBindingError",
    "ParseError",
    "PhiError",
    "PicardTrace",
    "SelfMapSpec",
    "SemiCauchyProfile",
    "SequenceError",
    "SequencePrefix",
    "SpaceError",
    "StructureClass",
    "TheoremVerdict",
    "UnknownVariableError",
    "Verdict",
    "WitnessReport",
    "WitnessRow",
    "analytic_map",
    "analytic_space",
    "backend",
    "brute_force_fixed_points",
    "check_asymptotic_normal",
    "check_axiom",
    "check_d_asymptotic",
    "check_nearly_right_admissible",
    "check_normal",
    "classify_structure",
    "comparison_function",
    "compile_program",
    "default_starts",
    "defaults",
    "descent_profile",
    "detect_0d_cauchy",
    "estimate_L_plus",
    "evaluate",
    "find_0d_limit",
    "gauge_matrices",
    "gauge_table",
    "gauge_value",
    "iterate",
    "lemma1_witness",
    "lemma2_check",
    "load_sequence_file",
    "parse",
    "run_theorem_harness",
    "semi_cauchy_profile",
    "sequence_from_points",
    "sequence_from_table",
    "tabulated_map",
    "tabulated_space",
    "to_jsonable",
    "to_source",
    "verify_contraction",
]
