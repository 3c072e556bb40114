"""
Exception hierarchy for capture-interval analysis
"""


class CaptureAnalysisError(Exception):
    """Base class for every error raised by the package"""


class MapDomainError(CaptureAnalysisError, ValueError):
    """Point lies outside the map's domain [a, b]"""


class MapValidationError(CaptureAnalysisError):
    """Map family failed its range, unimodality or Schwarzian grid checks"""


class NonDifferentiableError(CaptureAnalysisError):
    """Derivative requested where the map has a kink"""


class SingularSchwarzianError(CaptureAnalysisError):
    """Schwarzian derivative requested where f'(x) = 0"""


class NumericalError(CaptureAnalysisError):
    """Base class for numerical failures (CLI exit code 3)"""


class PolishDivergenceError(NumericalError):
    """Orbit polish left the seed's monotone neighbourhood"""


class BracketError(NumericalError):
    """Residual has equal signs at both ends of a bracket"""


class WrongPeriodError(NumericalError):
    """Root found has a minimal period that properly divides the requested one"""


class PartnerNotFoundError(NumericalError):
    """No saddle partner or companion point exists where one is required"""


class CaptureOverlapError(NumericalError):
    """Two capture intervals intersect"""


class RefineEscapeError(NumericalError):
    """Refined root left its monotone bracket"""


class DuplicateRootError(NumericalError):
    """Two refined roots collided (tangency)"""


class ExtremaOrderError(NumericalError):
    """Extremum kinds stopped alternating along the sorted table"""


class NoInflectionError(NumericalError):
    """Second derivative of the iterate does not change sign on a segment"""


class InconsistentCaseError(NumericalError):
    """A single target crossing was found without a matching extremum"""


class ZeroSlopeError(NumericalError):
    """Tangent map along a back-pull chain is too flat to invert"""


class NoAttractorError(CaptureAnalysisError):
    """No stable periodic orbit was detected (CLI exit code 2)"""


class VerificationError(CaptureAnalysisError):
    """Analytic result disagreed with the brute-force oracle (CLI exit code 4)"""
