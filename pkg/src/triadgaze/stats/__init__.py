"""Statistical procedures applied to weekly gaze aggregates."""

from .inference import (
    TestResult,
    anova_oneway,
    levene,
    paired_t,
    pooled_t,
    shapiro_wilk,
    tukey_hsd,
    two_proportion_z,
)
from .profile import ParticipantProfile, sample_profile
from .regression import Coefficient, RegressionResult, ols_regress

__all__ = [
    "Coefficient",
    "ParticipantProfile",
    "RegressionResult",
    "TestResult",
    "anova_oneway",
    "levene",
    "ols_regress",
    "paired_t",
    "pooled_t",
    "sample_profile",
    "shapiro_wilk",
    "tukey_hsd",
    "two_proportion_z",
]
