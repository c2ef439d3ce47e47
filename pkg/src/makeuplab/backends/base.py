"""Backend abstraction: codec, denoiser, text encoder, attention hooks."""

from __future__ import annotations

import abc
import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import CompositionUnsupportedError, ParameterError, ShapeMismatchError


@dataclass(frozen=True)
class Conditioning:
    """Encoded prompt: N token vectors of width d_c, plus guidance scale."""

    context: np.ndarray
    guidance_scale: float = 0.0
    raw_prompt: str = ""

    def __post_init__(self):
        ctx = np.asarray(self.context, dtype=np.float64)
        if ctx.ndim != 2 or ctx.shape[0] < 1:
            raise ParameterError(f"context must be (N >= 1, d_c), got shape {ctx.shape}")
        if not np.all(np.isfinite(ctx)):
            raise ParameterError("context contains non-finite entries")
        if self.guidance_scale < 0:
            raise ParameterError(f"guidance_scale must be >= 0, got {self.guidance_scale}")
        object.__setattr__(self, "context", ctx)


class Codec(abc.ABC):
    """Image <-> latent transform pair. Images are float arrays in [0, 1]."""

    #: worst-case |decode(encode(x)) - x| on bundled fixtures
    roundtrip_tol: float = 0.0

    @abc.abstractmethod
    def encode(self, image: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def decode(self, latent: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def latent_shape(self, image_shape: tuple) -> tuple: ...


class IdentityCodec(Codec):
    """Latent space is pixel space; decode clamps back into image gamut."""

    roundtrip_tol = 0.0

    def encode(self, image):
        return np.asarray(image, dtype=np.float64).copy()

    def decode(self, latent):
        return np.clip(np.asarray(latent, dtype=np.float64), 0.0, 1.0)

    def latent_shape(self, image_shape):
        return tuple(image_shape)


class PoolingCodec(Codec):
    """2x average-pool encoder with replicate unpooling.

    encode(decode(v)) = v exactly; decode(encode(x)) = x only for images
    constant on each 2x2 block, which the bundled block-aligned fixtures are.
    """

    roundtrip_tol = 1e-12

    def __init__(self, factor: int = 2):
        if factor < 1:
            raise ParameterError(f"pool factor must be >= 1, got {factor}")
        self.factor = factor

    def encode(self, image):
        img = np.asarray(image, dtype=np.float64)
        f = self.factor
        h, w = img.shape[0], img.shape[1]
        if h % f or w % f:
            raise ShapeMismatchError(f"image dims {img.shape[:2]} not divisible by {f}")
        return img.reshape(h // f, f, w // f, f, -1).mean(axis=(1, 3))

    def decode(self, latent):
        lat = np.asarray(latent, dtype=np.float64)
        up = np.repeat(np.repeat(lat, self.factor, axis=0), self.factor, axis=1)
        return np.clip(up, 0.0, 1.0)

    def latent_shape(self, image_shape):
        h, w = image_shape[0], image_shape[1]
        f = self.factor
        if h % f or w % f:
            raise ShapeMismatchError(f"image dims {(h, w)} not divisible by {f}")
        return (h // f, w // f) + tuple(image_shape[2:])


def hash_text_encode(prompt: str, n_tokens: int, d_c: int) -> Conditioning:
    """Deterministic token vectors seeded by token content.

    Whitespace tokens beyond n_tokens are dropped; short prompts are padded
    with position-seeded pad vectors so the context shape is always fixed.
    """
    if not prompt or not prompt.strip():
        raise ParameterError("prompt must be nonempty")
    tokens = prompt.lower().split()[:n_tokens]
    rows = []
    for i in range(n_tokens):
        key = f"tok:{tokens[i]}" if i < len(tokens) else f"pad:{i}"
        seed = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")
        rng = np.random.default_rng(seed)
        rows.append(rng.standard_normal(d_c) / np.sqrt(d_c))
    return Conditioning(context=np.stack(rows), raw_prompt=prompt)


class Backend(abc.ABC):
    """Denoiser plus codec plus text encoder, immutable after construction."""

    name: str = "backend"

    def __init__(self, codec: Codec | None = None, n_tokens: int = 8, d_c: int = 16):
        self.codec = codec if codec is not None else IdentityCodec()
        self.n_tokens = n_tokens
        self.d_c = d_c

    @abc.abstractmethod
    def predict_eps(self, z, t: int, conditioning: Conditioning | None = None) -> np.ndarray: ...

    def encode_text(self, prompt: str) -> Conditioning:
        return hash_text_encode(prompt, self.n_tokens, self.d_c)

    def with_composition(self, concept_conditionings) -> "Backend":
        """Return a clone whose attention layers mix in concept K/V streams."""
        raise CompositionUnsupportedError(f"backend {self.name!r} has no attention hooks")

    @property
    def supports_composition(self) -> bool:
        return type(self).with_composition is not Backend.with_composition


@dataclass
class LatencyRecorder:
    """Wraps a backend to time each denoiser call; everything else delegates."""

    inner: Backend
    latencies_ms: list = field(default_factory=list)

    def predict_eps(self, z, t, conditioning=None):
        start = time.perf_counter()
        try:
            return self.inner.predict_eps(z, t, conditioning)
        finally:
            self.latencies_ms.append((time.perf_counter() - start) * 1e3)

    def __getattr__(self, name):
        return getattr(self.inner, name)
