from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import InputError

# Cohort-level reference values used to z-score covariates in the simulator.
REFERENCE = {
    "ados_css": (7.3, 2.0),
    "adir_social": (18.3, 6.9),
    "adir_comm": (16.6, 4.7),
    "adir_rrb": (3.6, 0.8),
    "adir_dev": (3.4, 0.7),
    "das_verbal": (91.8, 25.9),
    "das_nonverbal": (95.2, 15.7),
    "das_spatial": (94.2, 16.0),
    "das_gca": (93.1, 19.6),
}
CUTOFFS = {"ados_css": 4, "adir_social": 10, "adir_comm": 8, "adir_rrb": 3, "adir_dev": 1}
MIN_GCA = 70.0


@dataclass(frozen=True)
class ParticipantProfile:
    ados_css: float
    adir_social: float
    adir_comm: float
    adir_rrb: float
    adir_dev: float
    das_verbal: float
    das_nonverbal: float
    das_spatial: float
    das_gca: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InputError(f"{f.name} is not finite")
        if self.das_gca < MIN_GCA:
            raise InputError(f"DAS-II GCA {self.das_gca} below inclusion threshold {MIN_GCA}")

    @classmethod
    def covariates(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def zscores(self) -> dict[str, float]:
        return {k: (v - REFERENCE[k][0]) / REFERENCE[k][1] for k, v in self.as_dict().items()}


def sample_profile(rng: np.random.Generator) -> ParticipantProfile:
    """Draw a plausible profile around the cohort reference values."""
    def draw(name, lo, hi, integer=True):
        m, s = REFERENCE[name]
        v = float(np.clip(rng.normal(m, s), lo, hi))
        return float(round(v)) if integer else v

    verbal = draw("das_verbal", 55, 145)
    nonverbal = draw("das_nonverbal", 55, 145)
    spatial = draw("das_spatial", 55, 145)
    while True:
        gca = round((verbal + nonverbal + spatial) / 3.0 + rng.normal(0.0, 6.0))
        if gca >= MIN_GCA:
            break
        verbal, nonverbal, spatial = (min(145.0, v + 5.0) for v in (verbal, nonverbal, spatial))
    return ParticipantProfile(
        ados_css=draw("ados_css", 1, 10),
        adir_social=draw("adir_social", 0, 30),
        adir_comm=draw("adir_comm", 0, 26),
        adir_rrb=draw("adir_rrb", 0, 12),
        adir_dev=draw("adir_dev", 0, 5),
        das_verbal=verbal,
        das_nonverbal=nonverbal,
        das_spatial=spatial,
        das_gca=float(gca),
    )
