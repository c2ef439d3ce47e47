"""A tiny deterministic cross-attention denoiser with real hook points.

Small enough to run thousands of calls per second, structured enough to
exercise prompt conditioning and per-layer attention composition.
"""

from __future__ import annotations

import copy
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ParameterError, ShapeMismatchError
from ..harmonize import compose_cross_attention, softmax_rows
from .base import Backend, Codec, Conditioning, hash_text_encode


def toy_text_encode(prompt: str, n_tokens: int = 8, d_c: int = 16) -> Conditioning:
    """Deterministic hash-seeded token vectors; same prompt, same bits."""
    return hash_text_encode(prompt, n_tokens, d_c)


class ToyAttnBackend(Backend):
    """Per-pixel MLP with n_layers cross-attention blocks over the context.

    eps(z, t, c) = (h_L @ W_out) * eps_scale where h_0 = X @ W_in + temb(t)
    and h_{l+1} = h_l + attn(h_l @ W_Q[l], c @ W_K[l], c @ W_V[l]).
    eps_scale keeps the field a mild contraction so coarse-grid inversion
    round trips stay well-conditioned.
    """

    name = "toy"

    def __init__(
        self,
        channels: int = 3,
        d_model: int = 16,
        d_attn: int = 16,
        n_layers: int = 2,
        n_tokens: int = 8,
        d_c: int = 16,
        eps_scale: float = 0.1,
        t_scale: float = 1000.0,
        seed: int = 0,
        codec: Codec | None = None,
    ):
        super().__init__(codec=codec, n_tokens=n_tokens, d_c=d_c)
        if channels < 1 or d_model < 2 or n_layers < 1:
            raise ParameterError("toy backend dims must be positive")
        self.channels = channels
        self.d_model = d_model
        self.d_attn = d_attn
        self.n_layers = n_layers
        self.eps_scale = float(eps_scale)
        self.t_scale = float(t_scale)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.W_in = rng.standard_normal((channels, d_model)) / np.sqrt(channels)
        self.W_Q = [rng.standard_normal((d_model, d_attn)) / np.sqrt(d_model) for _ in range(n_layers)]
        self.W_K = [rng.standard_normal((d_c, d_attn)) / np.sqrt(d_c) for _ in range(n_layers)]
        self.W_V = [rng.standard_normal((d_c, d_model)) / np.sqrt(d_c) for _ in range(n_layers)]
        self.W_out = rng.standard_normal((d_model, channels)) / np.sqrt(d_model)
        self._null_ctx = Conditioning(context=np.zeros((n_tokens, d_c)), raw_prompt="")
        self._concepts: Optional[List[Tuple[Conditioning, float]]] = None

    def _temb(self, t: int) -> np.ndarray:
        # frequencies stay low so eps varies smoothly across coarse t-grids
        half = self.d_model // 2
        freqs = 4.0 * (10000.0 ** (-np.arange(half) / half))
        ang = (t / self.t_scale) * freqs
        emb = np.concatenate([np.sin(ang), np.cos(ang)])
        if emb.size < self.d_model:
            emb = np.concatenate([emb, np.zeros(self.d_model - emb.size)])
        return emb

    def predict_eps(self, z, t, conditioning=None):
        z = np.asarray(z, dtype=np.float64)
        if z.shape[-1] != self.channels:
            raise ShapeMismatchError(f"latent channels {z.shape[-1]} != configured {self.channels}")
        cond = conditioning if conditioning is not None else self._null_ctx
        ctx = cond.context
        if ctx.shape[1] != self.d_c:
            raise ShapeMismatchError(f"context width {ctx.shape[1]} != configured {self.d_c}")

        X = z.reshape(-1, self.channels)
        h = X @ self.W_in + self._temb(int(t))
        for l in range(self.n_layers):
            Q = h @ self.W_Q[l]
            K = ctx @ self.W_K[l]
            V = ctx @ self.W_V[l]
            if self._concepts is None:
                h = h + softmax_rows(Q @ K.T / np.sqrt(self.d_attn)) @ V
            else:
                concept_kvs = [
                    (c.context @ self.W_K[l], c.context @ self.W_V[l], alpha)
                    for c, alpha in self._concepts
                ]
                h = h + compose_cross_attention(Q, (K, V), concept_kvs, self.d_attn)
        eps = (h @ self.W_out) * self.eps_scale
        return eps.reshape(z.shape)

    def with_composition(self, concept_conditionings: Sequence[Tuple[Conditioning, float]]):
        """Clone sharing weights, with concept K/V streams mixed into every layer."""
        clone = copy.copy(self)
        clone._concepts = list(concept_conditionings)
        return clone
