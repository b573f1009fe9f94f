class CptLawError(Exception):
    """Base class for errors raised by :mod:`cpt_law`."""


class DataError(CptLawError, ValueError):
    """Malformed or inconsistent input data (files, series, manifests)."""


class FormatVersionError(DataError):
    """A serialized document declares a format version newer than supported."""

    def __init__(self, kind: str, found: int, supported: int):
        super().__init__(f"{kind} version {found} is newer than supported version {supported}")
        self.kind = kind
        self.found = found
        self.supported = supported


class CollinearityError(DataError):
    """OOD regressors are too close to collinear for a stable least-squares fit."""


class LawEvaluationError(CptLawError, ValueError):
    """The law cannot be evaluated at the requested point (e.g. zero forward area)."""


class NumericalError(CptLawError, ArithmeticError):
    """A numerical procedure failed to produce a finite answer."""


class FitDivergenceError(NumericalError):
    """Every multi-start minimisation ended with a non-finite objective."""
