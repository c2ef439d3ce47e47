"""HTTP adapter to an external epsilon-denoiser service.

Wire format: JSON envelope; arrays travel as base64 row-major float32 with an
explicit shape. One POST per denoiser call, no server-side state assumed.
"""

from __future__ import annotations

import base64
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from ..errors import RemoteError, ShapeMismatchError
from .base import Backend, Codec, Conditioning


def encode_array(arr: np.ndarray) -> dict:
    arr32 = np.ascontiguousarray(arr, dtype=np.float32)
    return {
        "data": base64.b64encode(arr32.tobytes()).decode("ascii"),
        "shape": list(arr32.shape),
        "dtype": "float32",
    }


def decode_array(obj) -> np.ndarray:
    if not isinstance(obj, dict) or not {"data", "shape", "dtype"} <= set(obj):
        raise RemoteError("array payload must carry data/shape/dtype", retryable=False)
    if obj["dtype"] != "float32":
        raise RemoteError(f"unsupported wire dtype {obj['dtype']!r}", retryable=False)
    try:
        raw = base64.b64decode(obj["data"], validate=True)
    except Exception as e:
        raise RemoteError(f"bad base64 payload: {e}", retryable=False) from e
    if len(raw) % 4:
        raise RemoteError(f"payload length {len(raw)} is not a whole number of float32s", retryable=False)
    flat = np.frombuffer(raw, dtype=np.float32)
    shape = tuple(int(s) for s in obj["shape"])
    if flat.size != int(np.prod(shape)):
        raise RemoteError(f"payload holds {flat.size} floats, shape {shape} wants {np.prod(shape)}", retryable=False)
    return flat.reshape(shape).astype(np.float64)


@dataclass(frozen=True)
class RemoteConfig:
    url: str
    timeout: float = 10.0
    max_retries: int = 0
    retry_backoff: float = 0.05
    max_inflight: int = 8


class RemoteBackend(Backend):
    """Stateless per call; concurrent requests capped by a semaphore."""

    name = "remote"

    def __init__(
        self,
        config: RemoteConfig,
        codec: Codec | None = None,
        n_tokens: int = 8,
        d_c: int = 16,
        session: requests.Session | None = None,
    ):
        super().__init__(codec=codec, n_tokens=n_tokens, d_c=d_c)
        self.config = config
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(config.max_inflight)

    def _post_once(self, payload: dict) -> dict:
        try:
            with self._gate:
                resp = self._session.post(self.config.url, json=payload, timeout=self.config.timeout)
        except requests.Timeout as e:
            raise RemoteError(f"denoiser call timed out after {self.config.timeout}s", retryable=True) from e
        except requests.ConnectionError as e:
            raise RemoteError(f"denoiser endpoint unreachable: {e}", retryable=True) from e
        except requests.RequestException as e:
            raise RemoteError(f"transport failure: {e}", retryable=False) from e
        if resp.status_code >= 500:
            raise RemoteError(f"server error {resp.status_code}", retryable=True)
        if resp.status_code != 200:
            raise RemoteError(f"denoiser rejected request: {resp.status_code} {resp.text[:200]}", retryable=False)
        try:
            return resp.json()
        except ValueError as e:
            raise RemoteError(f"non-JSON response: {e}", retryable=False) from e

    def predict_eps(self, z, t, conditioning=None):
        z = np.asarray(z, dtype=np.float64)
        if conditioning is None:
            conditioning = Conditioning(context=np.zeros((self.n_tokens, self.d_c)))
        payload = {
            "z": encode_array(z),
            "t": int(t),
            "context": encode_array(conditioning.context),
            "guidance_scale": float(conditioning.guidance_scale),
        }
        attempt = 0
        while True:
            try:
                body = self._post_once(payload)
                break
            except RemoteError as e:
                if e.retryable and attempt < self.config.max_retries:
                    attempt += 1
                    time.sleep(self.config.retry_backoff * attempt)
                    continue
                raise
        if "eps" not in body:
            raise RemoteError("response missing 'eps' field", retryable=False)
        eps = decode_array(body["eps"])
        if eps.shape != z.shape:
            raise ShapeMismatchError(f"server returned eps shape {eps.shape}, expected {z.shape}")
        return eps
