"""Randomization-test engine and test procedures."""

from .comparison import (
    ComparisonStatistic,
    StatisticError,
    comparison_statistic,
    edge_level_contrast,
    lin_t,
    neyman_t,
    shifted_ks,
    variance_ratio,
)
from .engine import (
    TestResult,
    evaluate_randomizations,
    randomization_pvalue,
    result_from_statistics,
    tiebreak_pvalue,
)
from .procedures import (
    HetGrid,
    ImbalancePvalue,
    TestSetupError,
    bonferroni,
    difference_in_means,
    global_specs,
    imbalance_data,
    spillover_specs,
    test_global,
    test_heterogeneity,
    test_imbalance,
    test_residualized,
    test_spillover,
)
