"""Pluggable denoiser backends: analytic oracle, toy attention net, remote adapter."""

from .analytic import AnalyticGaussianBackend, analytic_eps
from .base import (
    Backend,
    Codec,
    Conditioning,
    IdentityCodec,
    LatencyRecorder,
    PoolingCodec,
    hash_text_encode,
)
from .remote import RemoteBackend, RemoteConfig, decode_array, encode_array
from .toy import ToyAttnBackend, toy_text_encode

__all__ = [
    "AnalyticGaussianBackend",
    "Backend",
    "Codec",
    "Conditioning",
    "IdentityCodec",
    "LatencyRecorder",
    "PoolingCodec",
    "RemoteBackend",
    "RemoteConfig",
    "ToyAttnBackend",
    "analytic_eps",
    "decode_array",
    "encode_array",
    "hash_text_encode",
    "toy_text_encode",
]
