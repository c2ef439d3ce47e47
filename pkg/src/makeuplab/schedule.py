"""Diffusion-time arithmetic: schedules, deterministic stepping, inversion.

Timestep convention: integer t in [0, T], where t = 0 is clean data with
abar(0) = 1, and abar(t) for t >= 1 is the cumulative product of the first t
alphas. All formulas below are written in terms of abar(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BackendError, NumericError, ParameterError, ShapeMismatchError


class BackendFailure(BackendError):
    """Backend call failed during a multi-step loop; carries the step index."""

    def __init__(self, step_index: int, t: int, cause: Exception):
        super().__init__(f"backend failed at step {step_index} (t={t}): {cause}")
        self.step_index = step_index
        self.t = t


@dataclass(frozen=True)
class NoiseSchedule:
    """Variance schedule tables: beta, alpha = 1 - beta, and their running product."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alphabar: np.ndarray

    def abar(self, t: int) -> float:
        """Cumulative signal level at integer time t; abar(0) = 1."""
        if not 0 <= t <= self.T:
            raise ParameterError(f"timestep {t} outside [0, {self.T}]")
        return 1.0 if t == 0 else float(self.alphabar[t - 1])

    def beta_at(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise ParameterError(f"timestep {t} outside [1, {self.T}]")
        return float(self.beta[t - 1])


def build_schedule(
    T: int,
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    kind: str = "linear",
) -> NoiseSchedule:
    """Construct a noise schedule with T steps.

    kind "linear" spaces beta evenly between the endpoints; "scaled_linear"
    spaces sqrt(beta) evenly (the convention of common latent diffusion bases).
    """
    if T < 2:
        raise ParameterError(f"T must be >= 2, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ParameterError(
            f"betas must satisfy 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    if kind == "linear":
        beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    elif kind == "scaled_linear":
        beta = np.linspace(beta_start**0.5, beta_end**0.5, T, dtype=np.float64) ** 2
    else:
        raise ParameterError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    alphabar = np.cumprod(alpha)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alphabar=alphabar)


DEFAULT_SCHEDULE = build_schedule(1000, 1e-4, 0.02, "linear")


@dataclass
class LatentState:
    """A latent array together with its timestep and conditioning reference."""

    z: np.ndarray
    t: int
    conditioning: object = None


@dataclass
class InversionTrace:
    """Endpoint of an early-stopped inversion run.

    eps_at_tstar is the denoiser output evaluated at (z_tstar, t_star,
    conditioning); re-noising reuses this cached value instead of calling the
    backend again.
    """

    z_tstar: np.ndarray
    t_star: int
    eps_at_tstar: np.ndarray
    conditioning: object = None
    per_step_latents: Optional[list] = field(default=None)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{what}: {a.shape} vs {b.shape}")


def tweedie_denoise(schedule: NoiseSchedule, z_t: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    """Denoised estimate zhat0(t) = (z_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)."""
    z_t = np.asarray(z_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(z_t, eps, "z_t vs eps")
    ab = schedule.abar(t)
    return (z_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)


def ddim_step(
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    t: int,
    eps: np.ndarray,
    eta: float = 0.0,
    noise: Optional[np.ndarray] = None,
    t_prev: Optional[int] = None,
) -> np.ndarray:
    """One reverse update from time t to t_prev (default t - 1).

    z_prev = sqrt(abar_prev) * zhat0(t)
           + sqrt(1 - abar_prev - eta^2 * btilde^2) * eps
           + eta * btilde * noise
    with btilde = ((1 - abar_prev) / (1 - abar_t)) * beta_t.
    """
    if t < 1:
        raise ParameterError(f"ddim_step needs t >= 1, got {t}")
    if t_prev is None:
        t_prev = t - 1
    if not 0 <= t_prev < t:
        raise ParameterError(f"t_prev {t_prev} must lie in [0, {t})")
    z_t = np.asarray(z_t, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(z_t, eps, "z_t vs eps")

    ab_t = schedule.abar(t)
    ab_prev = schedule.abar(t_prev)
    zhat0 = tweedie_denoise(schedule, z_t, t, eps)

    if eta == 0.0:
        return np.sqrt(ab_prev) * zhat0 + np.sqrt(1.0 - ab_prev) * eps

    if noise is None:
        raise ParameterError("eta > 0 requires a noise array")
    noise = np.asarray(noise, dtype=np.float64)
    _check_same_shape(z_t, noise, "z_t vs noise")
    btilde = (1.0 - ab_prev) / (1.0 - ab_t) * schedule.beta_at(t)
    radicand = 1.0 - ab_prev - (eta * btilde) ** 2
    if radicand < 0.0:
        raise NumericError(f"negative radicand {radicand:.3e} for eta={eta}, t={t}")
    return np.sqrt(ab_prev) * zhat0 + np.sqrt(radicand) * eps + eta * btilde * noise


def ddim_invert_step(
    schedule: NoiseSchedule,
    z_prev: np.ndarray,
    t: int,
    eps: np.ndarray,
    t_prev: Optional[int] = None,
) -> np.ndarray:
    """Exact algebraic inverse of the deterministic ddim_step: t_prev -> t.

    z_t = a * z_prev - b * eps with
    a = sqrt(abar_t / abar_prev),
    b = sqrt(abar_t) * (sqrt(1/abar_prev - 1) - sqrt(1/abar_t - 1)).
    The caller supplies eps evaluated at (z_prev, t, c) per the linearization
    assumption.
    """
    if t < 1:
        raise ParameterError(f"ddim_invert_step needs t >= 1, got {t}")
    if t_prev is None:
        t_prev = t - 1
    if not 0 <= t_prev < t:
        raise ParameterError(f"t_prev {t_prev} must lie in [0, {t})")
    z_prev = np.asarray(z_prev, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(z_prev, eps, "z_prev vs eps")

    ab_t = schedule.abar(t)
    ab_prev = schedule.abar(t_prev)
    a = np.sqrt(ab_t) / np.sqrt(ab_prev)
    b = np.sqrt(ab_t) * (np.sqrt(1.0 / ab_prev - 1.0) - np.sqrt(1.0 / ab_t - 1.0))
    return a * z_prev - b * eps


def renoise(schedule: NoiseSchedule, z0_new: np.ndarray, trace: InversionTrace) -> np.ndarray:
    """Push an edited clean latent back to the trace's stop time.

    ztilde = sqrt(abar_tstar) * z0_new + sqrt(1 - abar_tstar) * trace.eps_at_tstar.
    """
    z0_new = np.asarray(z0_new, dtype=np.float64)
    _check_same_shape(z0_new, trace.z_tstar, "z0_new vs trace latent")
    ab = schedule.abar(trace.t_star)
    return np.sqrt(ab) * z0_new + np.sqrt(1.0 - ab) * np.asarray(trace.eps_at_tstar, dtype=np.float64)


def timestep_grid(t_star: int, num_steps: int) -> np.ndarray:
    """Uniform integer grid 0 = g[0] < ... < g[num_steps] = t_star."""
    if num_steps < 1:
        raise ParameterError(f"num_steps must be >= 1, got {num_steps}")
    if num_steps > t_star:
        raise ParameterError(f"num_steps {num_steps} exceeds t_star {t_star}")
    grid = np.rint(np.linspace(0, t_star, num_steps + 1)).astype(int)
    return grid


def invert_to(
    backend,
    schedule: NoiseSchedule,
    z0: np.ndarray,
    t_star: int,
    num_steps: int,
    conditioning=None,
    keep_per_step: bool = False,
) -> InversionTrace:
    """Run deterministic inversion from clean z0 up to t_star over a uniform grid.

    Each step re-evaluates the denoiser at the previous latent and the target
    grid time; the endpoint eps(z_tstar, t_star, c) is evaluated once more and
    cached on the trace for later re-noising.
    """
    if not 0 < t_star <= schedule.T:
        raise ParameterError(f"t_star {t_star} outside (0, {schedule.T}]")
    grid = timestep_grid(t_star, num_steps)
    z = np.asarray(z0, dtype=np.float64)
    per_step = [z.copy()] if keep_per_step else None
    for i in range(num_steps):
        t_from, t_to = int(grid[i]), int(grid[i + 1])
        try:
            eps = backend.predict_eps(z, t_to, conditioning)
        except Exception as e:
            raise BackendFailure(i, t_to, e) from e
        z = ddim_invert_step(schedule, z, t_to, eps, t_prev=t_from)
        if keep_per_step:
            per_step.append(z.copy())
    try:
        eps_star = backend.predict_eps(z, t_star, conditioning)
    except Exception as e:
        raise BackendFailure(num_steps, t_star, e) from e
    return InversionTrace(
        z_tstar=z,
        t_star=t_star,
        eps_at_tstar=np.asarray(eps_star, dtype=np.float64),
        conditioning=conditioning,
        per_step_latents=per_step,
    )


def ddim_sample(
    backend,
    schedule: NoiseSchedule,
    z: np.ndarray,
    t_start: int,
    num_steps: int,
    conditioning=None,
    grid: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Deterministic reverse sampling from time t_start down to 0."""
    if grid is None:
        grid = timestep_grid(t_start, num_steps)
    z = np.asarray(z, dtype=np.float64)
    for i in range(len(grid) - 1, 0, -1):
        t_hi, t_lo = int(grid[i]), int(grid[i - 1])
        eps = backend.predict_eps(z, t_hi, conditioning)
        z = ddim_step(schedule, z, t_hi, eps, t_prev=t_lo)
    return z
