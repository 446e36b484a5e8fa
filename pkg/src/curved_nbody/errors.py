"""Exception hierarchy shared by all modules."""


class CurvedNBodyError(Exception):
    """Base class for library errors."""


class InvalidArgumentError(CurvedNBodyError, ValueError):
    pass


class UnsupportedMetricError(CurvedNBodyError, ValueError):
    pass


class SingularityError(CurvedNBodyError):
    """A pair of bodies hit a zero denominator (collision or antipodal)."""

    def __init__(self, i, j, denominator, kind=None, trajectory=None):
        self.pair = (i, j)
        self.denominator = denominator
        self.kind = kind
        # Partial trajectory up to the failure, when raised by the integrator.
        self.trajectory = trajectory
        what = f" ({kind})" if kind else ""
        super().__init__(
            f"singular pair ({i}, {j}){what}: denominator {denominator:.3e}"
        )


class StiffnessError(CurvedNBodyError):
    def __init__(self, message, trajectory=None):
        self.trajectory = trajectory
        super().__init__(message)


class ConfigError(CurvedNBodyError, ValueError):
    """Bad run configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
