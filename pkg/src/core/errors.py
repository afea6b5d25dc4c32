"""
异常类型
Exception hierarchy shared by the synthesis engine, the dataset pipeline and the CLI.
"""

from typing import Optional


class SynthError(Exception):
    """Base class for every error raised by the synthesizer."""


class ConfigError(SynthError):
    """Malformed configuration file, environment variable or parameter range."""


class GridError(SynthError):
    """The requested grid cannot host the scheme (too few points, order too high)."""


class SimulationDivergedError(SynthError):
    def __init__(self, step: int, peak: float, threshold: float):
        self.step = step
        self.peak = peak
        self.threshold = threshold
        super().__init__(
            f"simulation diverged at step {step}: max|w| = {peak:.3e} exceeds {threshold:.3e}"
        )


class ConvergenceError(SynthError):
    def __init__(self, step: int, excitation: str, residual: float, iterations: int):
        self.step = step
        self.excitation = excitation
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{excitation} coupling did not converge at step {step} "
            f"after {iterations} iterations (residual {residual:.3e})"
        )


class SingularSystemError(SynthError):
    def __init__(self, step: Optional[int], condition: float):
        self.step = step
        self.condition = condition
        where = f"at step {step}" if step is not None else "during factorization"
        super().__init__(f"singular system matrix {where} (condition estimate {condition:.3e})")


class UnvoicedError(SynthError):
    """No periodicity could be detected in the analysed signal."""
