"""Exception hierarchy.

``InputError`` subclasses describe bad or unusable input (CLI exit code 1);
``InvariantViolation`` marks a broken internal guarantee (exit code 2).
"""


class TriadGazeError(Exception):
    pass


class InputError(TriadGazeError, ValueError):
    pass


class InvariantViolation(TriadGazeError, AssertionError):
    pass


class AmbiguousRoles(InputError):
    """More faces than roles and no policy to resolve them."""


class InvalidObservation(InputError):
    pass


class UnorderedInput(InputError):
    pass


class EmptyWeek(InputError):
    def __init__(self, weeks):
        self.weeks = sorted(weeks)
        super().__init__(f"no sessions for week(s) {self.weeks}")


class ClockMismatch(InputError):
    pass


class DegenerateInput(InputError):
    """Zero variance or too few observations for a statistic to be defined."""


class RankDeficient(InputError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {self.columns}")


class SchemaError(InputError):
    pass
