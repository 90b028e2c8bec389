"""Exception and warning types shared across the package."""


class InvalidParameterError(ValueError):
    """A parameter or parameter combination violates a documented invariant."""


class NonPhysicalInputError(ValueError):
    """Input series cannot have been produced by a valid pair-interval process."""


class ConvergenceError(RuntimeError):
    """A truncated series did not converge within the allowed number of terms."""


class NoBunchingError(ValueError):
    """Correlation curve carries no excess above 1; nothing to fit."""


class TailNotFlatError(ValueError):
    """Delay window too short for the curve tail to be usable as a normaliser."""


class DeadTimeSaturationWarning(UserWarning):
    """Photon flux times dead time is large; counting losses are not negligible."""


class DegenerateInputWarning(UserWarning):
    """Input is technically valid but statistically empty (e.g. zero counts)."""
