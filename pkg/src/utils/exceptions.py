from typing import Optional, Sequence, Tuple


class SpiralError(Exception):
    """
    Base class for every error raised by the toolkit
    """


class GeometryError(SpiralError):
    """
    Invalid spiral data: monotonicity or width violated, no coil crossing,
    evaluation outside the admissible Fermi window, singular denominators
    """


class QuadratureError(SpiralError):
    def __init__(self, message: str, interval: Optional[Tuple[float, float]] = None):
        if interval is not None:
            message = f"{message} (worst subinterval [{interval[0]:.6g}, {interval[1]:.6g}])"
        super().__init__(message)
        self.interval = interval


class BoundError(SpiralError):
    pass


class CertificateError(SpiralError):
    pass


class SolverError(SpiralError):
    def __init__(self, message: str, residuals: Sequence[float] = ()):
        if len(residuals):
            message = f"{message}; best residuals: " + ", ".join(
                f"{r:.3e}" for r in residuals
            )
        super().__init__(message)
        self.residuals = list(residuals)


class ConfigError(SpiralError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ReportError(ConfigError):
    """
    Malformed report document, names the offending field
    """
