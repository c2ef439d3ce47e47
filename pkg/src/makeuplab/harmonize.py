"""Reverse-sampling refinements: concept-composed attention and
interpolation-guided stepping."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, ShapeMismatchError
from .schedule import NoiseSchedule, ddim_step, tweedie_denoise

_WEIGHTED = re.compile(r"^\((?P<text>.+):(?P<w>[-+]?\d*\.?\d+)\)$|^(?P<text2>.+):(?P<w2>[-+]?\d*\.?\d+)$")


def parse_weighted_prompt(entry: str) -> Tuple[str, float]:
    """Split "(glossy lips:1.6)" or "glossy lips:1.6" into (text, weight).

    Entries without a trailing numeric weight get weight 1.0.
    """
    entry = entry.strip()
    if not entry:
        raise ParameterError("empty concept entry")
    m = _WEIGHTED.match(entry)
    if m:
        text = m.group("text") or m.group("text2")
        weight = float(m.group("w") or m.group("w2"))
        return text.strip(), weight
    return entry, 1.0


@dataclass(frozen=True)
class ConceptPrompt:
    """One makeup concept; negative weights act as negative prompts."""

    text: str
    alpha: float = 1.0

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ParameterError("concept text must be nonempty")
        if not np.isfinite(self.alpha):
            raise ParameterError(f"concept weight must be finite, got {self.alpha}")

    @classmethod
    def parse(cls, entry: str) -> "ConceptPrompt":
        text, weight = parse_weighted_prompt(entry)
        return cls(text=text, alpha=weight)


@dataclass(frozen=True)
class CompositionConfig:
    """Main prompt (shared with inversion) plus M weighted concepts."""

    main_prompt: str = "a photo of a woman"
    concepts: Tuple[ConceptPrompt, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))

    @classmethod
    def from_entries(cls, main_prompt: str, entries: Sequence[str]) -> "CompositionConfig":
        return cls(main_prompt=main_prompt, concepts=tuple(ConceptPrompt.parse(e) for e in entries))


@dataclass(frozen=True)
class GuidanceConfig:
    """Interpolation guidance: strength lam on the first apply_steps reverse steps."""

    lam: float = 0.15
    apply_steps: int = 2

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.apply_steps < 0:
            raise ParameterError(f"apply_steps must be >= 0, got {self.apply_steps}")


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by the row max."""
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _attn(Q: np.ndarray, K: np.ndarray, V: np.ndarray, d: int) -> np.ndarray:
    if Q.shape[-1] != K.shape[-1]:
        raise ShapeMismatchError(f"Q width {Q.shape[-1]} vs K width {K.shape[-1]}")
    if K.shape[0] != V.shape[0]:
        raise ShapeMismatchError(f"K rows {K.shape[0]} vs V rows {V.shape[0]}")
    return softmax_rows(Q @ K.T / np.sqrt(d)) @ V


def compose_cross_attention(
    Q: np.ndarray,
    main_kv: Tuple[np.ndarray, np.ndarray],
    concept_kvs: Sequence[Tuple[np.ndarray, np.ndarray, float]],
    d: int,
) -> np.ndarray:
    """Main attention output plus the averaged weighted concept streams.

    Q_new = attn(Q, K_main, V_main) + (1/M) * sum_s alpha_s * attn(Q, K_s, V_s).
    M counts every configured concept, zero-weighted ones included; a
    zero-weight term is skipped rather than multiplied so that the all-zero
    case stays bitwise identical to plain attention.
    """
    K_main, V_main = main_kv
    out = _attn(np.asarray(Q, dtype=np.float64), K_main, V_main, d)
    M = len(concept_kvs)
    if M == 0:
        return out
    acc = None
    for K_s, V_s, alpha in concept_kvs:
        if alpha == 0.0:
            continue
        term = alpha * _attn(Q, K_s, V_s, d)
        acc = term if acc is None else acc + term
    if acc is None:
        return out
    return out + acc / M


def interp_guided_estimate(z0_hat: np.ndarray, z0_prime: np.ndarray, lam: float) -> np.ndarray:
    """Convex blend (1 - lam) * z0_hat + lam * z0_prime.

    Also the exact minimizer of |z - z0_hat|^2 + (lam/(1-lam)) |z - z0_prime|^2
    for lam < 1.
    """
    z0_hat = np.asarray(z0_hat, dtype=np.float64)
    z0_prime = np.asarray(z0_prime, dtype=np.float64)
    if z0_hat.shape != z0_prime.shape:
        raise ShapeMismatchError(f"{z0_hat.shape} vs {z0_prime.shape}")
    return (1.0 - lam) * z0_hat + lam * z0_prime


def guided_reverse_step(
    backend,
    schedule: NoiseSchedule,
    z_t: np.ndarray,
    t: int,
    conditioning,
    z0_prime: Optional[np.ndarray],
    guidance: GuidanceConfig,
    step_index: int,
    t_prev: Optional[int] = None,
) -> np.ndarray:
    """One deterministic reverse step, with the clean-estimate target blended
    toward z0_prime on the first apply_steps steps.

    Only the clean estimate is replaced; eps itself is never altered, so the
    update keeps the schedule-core stepping identities.
    """
    if t_prev is None:
        t_prev = t - 1
    eps = np.asarray(backend.predict_eps(z_t, t, conditioning), dtype=np.float64)
    guided = (
        z0_prime is not None
        and guidance.lam > 0.0
        and step_index < guidance.apply_steps
    )
    if not guided:
        return ddim_step(schedule, z_t, t, eps, t_prev=t_prev)
    zhat0 = tweedie_denoise(schedule, z_t, t, eps)
    ztilde0 = interp_guided_estimate(zhat0, z0_prime, guidance.lam)
    ab_prev = schedule.abar(t_prev)
    return np.sqrt(ab_prev) * ztilde0 + np.sqrt(1.0 - ab_prev) * eps
