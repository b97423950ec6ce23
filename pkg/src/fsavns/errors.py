"""Exception hierarchy shared across the solver."""


class FsavError(Exception):
    """Base class for all solver errors."""


class InvalidField(FsavError):
    """A field contains non-finite values or violates a representation invariant."""


class GridMismatch(FsavError):
    """Two fields that must live on the same grid do not."""


class MeanNotZero(FsavError):
    """A field that must be mean-zero (for the Poisson solve) is not."""


class DomainMismatch(FsavError):
    """An operation requires a specific domain (e.g. the 2pi-periodic square)."""


class ModeOutOfRange(FsavError):
    """A requested Fourier mode lies outside the resolvable band."""


class BlowUp(FsavError):
    """The solution left the finite/bounded regime.

    Attributes t and step record when the blow-up was detected.
    """

    def __init__(self, t, step, message=None):
        self.t = t
        self.step = step
        super().__init__(message or f"solution blew up at t={t:g} (step {step})")


class DenominatorNonpositive(FsavError):
    """The scalar-update denominator became nonpositive.

    Unreachable for a correct implementation (the quadratic term is
    nonpositive by construction); raised only to flag a bug.
    """


class DivergenceViolation(FsavError):
    """A velocity field that must be discretely divergence-free is not."""


class InternalInvariantViolation(FsavError):
    """A per-step invariant (denominator margin, finiteness) failed."""


class ConfigError(FsavError):
    """Invalid run configuration; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonIntegralHorizon(ConfigError):
    """T/k is not an integer and step shortening is disallowed."""


class ParseError(FsavError):
    """Malformed time-series file; carries the offending row index."""

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class CorruptCheckpoint(FsavError):
    """Checkpoint file failed magic/version/length validation."""


class InsufficientData(FsavError):
    """A statistic was requested over a window longer than the series."""


class NonUniformSampling(FsavError):
    """An operation requires a uniformly sampled time series."""
