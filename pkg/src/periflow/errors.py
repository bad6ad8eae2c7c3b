"""Exception types shared across the package."""


class PeriflowError(Exception):
    """Base class for all package errors."""


class ConfigError(PeriflowError):
    """Invalid or incomplete run configuration."""


class GeometryError(PeriflowError):
    """Channel/body geometry violates a construction requirement."""


class MeshError(PeriflowError):
    """Quadrature mesh too coarse or inconsistent."""


class BasisError(PeriflowError):
    """Galerkin mode set invalid: too many modes requested or rank-deficient."""


class ResolutionError(PeriflowError):
    """Spatial grid cannot resolve the requested temporal harmonics."""


class ResonantOrNonUnique(PeriflowError):
    """I - M is numerically singular: the linear T-periodic problem has no
    unique periodic solution (resonance of the undamped subsystem)."""

    def __init__(self, sigma_min, scale, message=None):
        self.sigma_min = float(sigma_min)
        self.scale = float(scale)
        super().__init__(
            message
            or f"singular periodicity system: sigma_min(I-M)={sigma_min:.3e} "
            f"below threshold {scale:.3e}"
        )


class NoConvergence(PeriflowError):
    """Fixed-point iteration hit the iteration cap before reaching tolerance."""

    def __init__(self, history, message=None):
        self.history = list(history)
        super().__init__(
            message or f"no convergence after {len(self.history)} iterations "
            f"(last distance {self.history[-1]:.3e})"
        )


class StageError(PeriflowError):
    """Wraps an error from one stage of the end-to-end pipeline."""

    def __init__(self, stage, original):
        self.stage = stage
        self.original = original
        super().__init__(f"stage '{stage}' failed: {original}")
