from .correlation import random_correlation
from .dgp import DGP_NAMES, DgpError, DgpSpec, fig1_effect_modifier, generate, random_clusters
from .harness import (
    COMPARISONS,
    CSV_COLUMNS,
    KINDS,
    STUDIES,
    Method,
    SimReport,
    SimulationError,
    run_method,
    run_study,
    study_methods,
)

__all__ = [
    "COMPARISONS", "CSV_COLUMNS", "DGP_NAMES", "DgpError", "DgpSpec", "KINDS", "Method",
    "STUDIES", "SimReport", "SimulationError", "fig1_effect_modifier", "generate",
    "random_clusters", "random_correlation", "run_method", "run_study", "study_methods",
]
