"""Exception hierarchy shared by all modules."""


class IVBiasError(Exception):
    """Base class for every error raised by this package."""


class CalibrationInfeasible(IVBiasError):
    """A calibration target cannot be reached inside the coefficient bracket."""


class DegenerateLaw(IVBiasError):
    """A conditioning event of the observational law has zero probability."""


class UndefinedEstimand(IVBiasError):
    """An estimand or target is undefined (zero denominator, log of nonpositive value)."""


class WeakInstrument(IVBiasError):
    """The instrument-exposure association is below the weak-instrument floor."""


class IncompatibleLaw(IVBiasError):
    """The observed law cannot have been generated by any IV model."""


class ParseError(IVBiasError):
    """A data record could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyData(IVBiasError):
    """An input source contains no records."""


class DegenerateSample(IVBiasError):
    """A conditioning cell of the sample is empty."""


class NoRoot(IVBiasError):
    """No sign change of an estimating function was found."""


class MultipleRoots(IVBiasError):
    """An estimating function has more than one root in the search bracket."""

    def __init__(self, roots, default):
        self.roots = list(roots)
        self.default = default
        super().__init__(
            f"{len(self.roots)} roots found: {', '.join(f'{r:.6g}' for r in self.roots)}; "
            f"default {default:.6g}"
        )


class EmptyGrid(IVBiasError):
    """A scenario grid specification expands to no rows."""
