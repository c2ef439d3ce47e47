"""Closed-form denoiser for Gaussian data; the package's numeric oracle."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..schedule import NoiseSchedule
from .base import Backend, Codec


def analytic_eps(mu0, sigma0: float, schedule: NoiseSchedule, z_t, t: int) -> np.ndarray:
    """Exact residual denoiser for data ~ N(mu0, sigma0^2 I).

    eps = sqrt(1 - abar_t) * (z_t - sqrt(abar_t) * mu0) / (abar_t * sigma0^2 + (1 - abar_t))

    This is -sqrt(1 - abar_t) times the score of the marginal p_t, the unique
    minimizer of the denoising objective for this data distribution.
    """
    if sigma0 < 0:
        raise ParameterError(f"sigma0 must be >= 0, got {sigma0}")
    z_t = np.asarray(z_t, dtype=np.float64)
    mu0 = np.asarray(mu0, dtype=np.float64)
    ab = schedule.abar(t)
    if t == 0:
        # marginal equals the data law; residual of a clean sample is zero
        return np.zeros_like(z_t)
    var = ab * sigma0**2 + (1.0 - ab)
    return np.sqrt(1.0 - ab) * (z_t - np.sqrt(ab) * mu0) / var


class AnalyticGaussianBackend(Backend):
    """Backend whose denoiser is analytic_eps; conditioning is ignored."""

    name = "analytic"

    def __init__(
        self,
        mu0,
        sigma0: float,
        schedule: NoiseSchedule,
        codec: Codec | None = None,
        n_tokens: int = 8,
        d_c: int = 16,
    ):
        super().__init__(codec=codec, n_tokens=n_tokens, d_c=d_c)
        if sigma0 < 0:
            raise ParameterError(f"sigma0 must be >= 0, got {sigma0}")
        self.mu0 = np.asarray(mu0, dtype=np.float64)
        self.sigma0 = float(sigma0)
        self.schedule = schedule

    def predict_eps(self, z, t, conditioning=None):
        return analytic_eps(self.mu0, self.sigma0, self.schedule, z, t)
