"""Codecs, text conditioning, toy attention backend, latency wrapper, and
the remote denoiser adapter against scripted transport behavior."""

import json
import time

import numpy as np
import pytest
import requests

from makeuplab.backends.analytic import AnalyticGaussianBackend
from makeuplab.backends.base import (
    Backend,
    Conditioning,
    IdentityCodec,
    LatencyRecorder,
    PoolingCodec,
    hash_text_encode,
)
from makeuplab.backends.remote import (
    RemoteBackend,
    RemoteConfig,
    decode_array,
    encode_array,
)
from makeuplab.backends.toy import ToyAttnBackend, toy_text_encode
from makeuplab.errors import (
    CompositionUnsupportedError,
    ParameterError,
    RemoteError,
    ShapeMismatchError,
)
from makeuplab.fixtures import synthetic_face
from makeuplab.schedule import DEFAULT_SCHEDULE

# ---------------------------------------------------------------------------
# conditioning


def test_conditioning_validation():
    ok = Conditioning(context=np.zeros((4, 8)))
    assert ok.guidance_scale == 0.0  # guidance off unless asked for
    with pytest.raises(ParameterError):
        Conditioning(context=np.zeros(8))
    with pytest.raises(ParameterError):
        Conditioning(context=np.full((2, 2), np.nan))
    with pytest.raises(ParameterError):
        Conditioning(context=np.zeros((2, 2)), guidance_scale=-1.0)


def test_hash_text_encode_shape_and_determinism():
    a = hash_text_encode("red lips", 4, 8)
    b = hash_text_encode("red lips", 4, 8)
    assert a.context.shape == (4, 8)
    np.testing.assert_array_equal(a.context, b.context)
    assert a.raw_prompt == "red lips"


def test_hash_text_encode_distinct_prompts_and_case():
    a = hash_text_encode("red lips", 4, 8)
    c = hash_text_encode("blue lids", 4, 8)
    assert np.max(np.abs(a.context - c.context)) > 1e-3
    np.testing.assert_array_equal(
        hash_text_encode("Red LIPS", 4, 8).context, a.context
    )


def test_hash_text_encode_truncates_and_pads():
    short = hash_text_encode("one", 4, 8)
    assert short.context.shape == (4, 8)
    trunc = hash_text_encode("a b c d extra words", 4, 8)
    np.testing.assert_array_equal(trunc.context, hash_text_encode("a b c d", 4, 8).context)
    with pytest.raises(ParameterError):
        hash_text_encode("  ", 4, 8)


def test_toy_text_encode_is_hash_encode():
    np.testing.assert_array_equal(
        toy_text_encode("soft glam").context, hash_text_encode("soft glam", 8, 16).context
    )


# ---------------------------------------------------------------------------
# codecs


def test_identity_codec_roundtrip(rng):
    codec = IdentityCodec()
    img = rng.random((6, 6, 3))
    lat = codec.encode(img)
    np.testing.assert_array_equal(lat, img)
    lat[0, 0, 0] = 99.0
    assert img[0, 0, 0] != 99.0  # encode returned a copy
    np.testing.assert_array_equal(codec.decode(img), img)
    assert codec.decode(np.array([[[2.0, -1.0, 0.5]]]))[0, 0].tolist() == [1.0, 0.0, 0.5]
    assert codec.latent_shape((5, 7, 3)) == (5, 7, 3)


def test_pooling_codec_block_mean_oracle():
    codec = PoolingCodec(2)
    img = np.zeros((4, 4, 1))
    img[:2, :2, 0] = [[0.1, 0.2], [0.3, 0.4]]
    img[:2, 2:, 0] = 0.8
    lat = codec.encode(img)
    assert lat.shape == (2, 2, 1)
    assert lat[0, 0, 0] == pytest.approx(0.25)
    assert lat[0, 1, 0] == pytest.approx(0.8)


def test_pooling_codec_decode_then_encode_exact(rng):
    codec = PoolingCodec(2)
    v = rng.random((5, 6, 3))
    np.testing.assert_array_equal(codec.encode(codec.decode(v)), v)


def test_pooling_codec_fixture_roundtrip_exact():
    image, _ = synthetic_face(64, 64)  # constant on 2x2 blocks by construction
    codec = PoolingCodec(2)
    np.testing.assert_array_equal(codec.decode(codec.encode(image)), image)


def test_pooling_codec_rejects():
    with pytest.raises(ParameterError):
        PoolingCodec(0)
    with pytest.raises(ShapeMismatchError):
        PoolingCodec(2).encode(np.zeros((5, 4, 3)))
    with pytest.raises(ShapeMismatchError):
        PoolingCodec(2).latent_shape((5, 4, 3))
    assert PoolingCodec(2).latent_shape((64, 64, 3)) == (32, 32, 3)


# ---------------------------------------------------------------------------
# toy attention backend


def test_toy_deterministic_across_instances(rng):
    z = rng.standard_normal((5, 5, 3))
    a = ToyAttnBackend().predict_eps(z, 300)
    b = ToyAttnBackend().predict_eps(z, 300)
    np.testing.assert_array_equal(a, b)
    assert a.shape == z.shape


def test_toy_shape_and_context_validation(rng):
    backend = ToyAttnBackend()
    with pytest.raises(ShapeMismatchError):
        backend.predict_eps(rng.standard_normal((4, 4, 2)), 100)
    with pytest.raises(ShapeMismatchError):
        backend.predict_eps(
            rng.standard_normal((4, 4, 3)), 100, Conditioning(context=np.zeros((8, 5)))
        )


def test_toy_none_conditioning_is_null_context(rng):
    backend = ToyAttnBackend()
    z = rng.standard_normal((4, 4, 3))
    null = Conditioning(context=np.zeros((8, 16)), raw_prompt="")
    np.testing.assert_array_equal(
        backend.predict_eps(z, 200), backend.predict_eps(z, 200, null)
    )


def test_toy_prompts_change_output(rng):
    backend = ToyAttnBackend()
    z = rng.standard_normal((4, 4, 3))
    a = backend.predict_eps(z, 200, backend.encode_text("red lips"))
    b = backend.predict_eps(z, 200, backend.encode_text("smoky eyes"))
    assert np.max(np.abs(a - b)) > 1e-8


def test_toy_eps_scale_linear(rng):
    z = rng.standard_normal((4, 4, 3))
    small = ToyAttnBackend(eps_scale=0.1).predict_eps(z, 300)
    large = ToyAttnBackend(eps_scale=0.2).predict_eps(z, 300)
    np.testing.assert_allclose(large, 2.0 * small, atol=1e-12)


def test_toy_composition_clone_isolated(rng):
    backend = ToyAttnBackend()
    z = rng.standard_normal((4, 4, 3))
    cond = backend.encode_text("base look")
    before = backend.predict_eps(z, 250, cond)
    concept = backend.encode_text("glitter")
    clone = backend.with_composition([(concept, 0.8)])
    assert clone.W_in is backend.W_in  # weights shared, not copied
    composed = clone.predict_eps(z, 250, cond)
    assert np.max(np.abs(composed - before)) > 1e-8
    np.testing.assert_array_equal(backend.predict_eps(z, 250, cond), before)


def test_toy_zero_weight_composition_bitwise_plain(rng):
    backend = ToyAttnBackend()
    z = rng.standard_normal((4, 4, 3))
    cond = backend.encode_text("base look")
    clone = backend.with_composition([(backend.encode_text("glitter"), 0.0)])
    np.testing.assert_array_equal(
        clone.predict_eps(z, 250, cond), backend.predict_eps(z, 250, cond)
    )


def test_supports_composition_flags():
    assert ToyAttnBackend().supports_composition
    analytic = AnalyticGaussianBackend(mu0=0.0, sigma0=1.0, schedule=DEFAULT_SCHEDULE)
    assert not analytic.supports_composition
    with pytest.raises(CompositionUnsupportedError):
        analytic.with_composition([])


# ---------------------------------------------------------------------------
# latency recorder


class SleepyBackend(Backend):
    name = "sleepy"

    def predict_eps(self, z, t, conditioning=None):
        time.sleep(0.01)
        return np.zeros_like(np.asarray(z, dtype=np.float64))


def test_latency_recorder_times_calls(rng):
    rec = LatencyRecorder(SleepyBackend())
    z = rng.standard_normal((3, 3))
    for t in (10, 20, 30):
        out = rec.predict_eps(z, t)
    np.testing.assert_array_equal(out, np.zeros((3, 3)))
    assert len(rec.latencies_ms) == 3
    assert all(ms >= 8.0 for ms in rec.latencies_ms)
    assert rec.name == "sleepy"  # delegation via __getattr__


def test_latency_recorder_shared_list(rng):
    rec = LatencyRecorder(SleepyBackend())
    rec2 = LatencyRecorder(SleepyBackend(), rec.latencies_ms)
    rec.predict_eps(np.zeros(2), 5)
    rec2.predict_eps(np.zeros(2), 5)
    assert len(rec.latencies_ms) == 2


# ---------------------------------------------------------------------------
# remote adapter


class FakeResponse:
    def __init__(self, status=200, payload=None, raw_text=None):
        self.status_code = status
        self._payload = payload
        self.text = raw_text if raw_text is not None else json.dumps(payload or {})
        self._raw = raw_text is not None

    def json(self):
        if self._raw:
            raise ValueError("response body is not JSON")
        return self._payload


class ScriptedSession:
    """requests.Session stand-in replaying a fixed response script."""

    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, timeout=None):
        self.calls.append({"url": url, "json": json, "timeout": timeout})
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def make_remote(script, **cfg):
    session = ScriptedSession(script)
    config = RemoteConfig(url="http://denoiser.test/eps", retry_backoff=0.001, **cfg)
    return RemoteBackend(config, session=session), session


def test_wire_array_round_trip(rng):
    x = rng.standard_normal((3, 4, 2)).astype(np.float32).astype(np.float64)
    back = decode_array(encode_array(x))
    np.testing.assert_array_equal(back, x)  # float32-representable: exact
    assert back.dtype == np.float64
    lossy = decode_array(encode_array(np.array([1.0 / 3.0])))
    np.testing.assert_allclose(lossy, 1.0 / 3.0, atol=1e-7)


@pytest.mark.parametrize(
    "obj",
    [
        {"data": "AAAA", "shape": [1]},
        {"data": "AAAA", "shape": [1], "dtype": "float64"},
        {"data": "!!!not-base64!!!", "shape": [1], "dtype": "float32"},
        {"data": "AAAAgD8=", "shape": [3], "dtype": "float32"},
        "not a dict",
    ],
)
def test_decode_array_rejects(obj):
    with pytest.raises(RemoteError) as exc:
        decode_array(obj)
    assert not exc.value.retryable


def test_remote_echo_and_payload(rng):
    z = rng.standard_normal((4, 4, 3))
    backend, session = make_remote([FakeResponse(payload={"eps": encode_array(np.zeros_like(z))})])
    out = backend.predict_eps(z, 123, Conditioning(context=np.ones((8, 16)), guidance_scale=2.5))
    np.testing.assert_array_equal(out, np.zeros_like(z))
    sent = session.calls[0]["json"]
    assert sent["t"] == 123
    assert sent["guidance_scale"] == 2.5
    np.testing.assert_allclose(decode_array(sent["z"]), z, atol=1e-6)
    assert decode_array(sent["context"]).shape == (8, 16)


def test_remote_none_conditioning_sends_null_context():
    backend, session = make_remote([FakeResponse(payload={"eps": encode_array(np.zeros((2, 2)))})])
    backend.predict_eps(np.zeros((2, 2)), 5)
    ctx = decode_array(session.calls[0]["json"]["context"])
    np.testing.assert_array_equal(ctx, np.zeros((8, 16)))
    assert session.calls[0]["json"]["guidance_scale"] == 0.0


def test_remote_wrong_shape_rejected(rng):
    z = rng.standard_normal((4, 4, 3))
    backend, _ = make_remote([FakeResponse(payload={"eps": encode_array(np.zeros((2, 2, 3)))})])
    with pytest.raises(ShapeMismatchError):
        backend.predict_eps(z, 10)


def test_remote_server_error_retryable():
    backend, session = make_remote([FakeResponse(status=503)])
    with pytest.raises(RemoteError) as exc:
        backend.predict_eps(np.zeros((2, 2)), 10)
    assert exc.value.retryable
    assert len(session.calls) == 1  # max_retries defaults to 0


def test_remote_retry_then_succeed():
    ok = FakeResponse(payload={"eps": encode_array(np.zeros((2, 2)))})
    backend, session = make_remote([FakeResponse(status=500), ok], max_retries=1)
    out = backend.predict_eps(np.zeros((2, 2)), 10)
    np.testing.assert_array_equal(out, np.zeros((2, 2)))
    assert len(session.calls) == 2


def test_remote_timeout_retries_then_raises():
    backend, session = make_remote(
        [requests.Timeout(), requests.Timeout(), requests.Timeout()], max_retries=2, timeout=0.5
    )
    with pytest.raises(RemoteError, match="timed out"):
        backend.predict_eps(np.zeros((2, 2)), 10)
    assert len(session.calls) == 3


def test_remote_connection_error_retry_then_succeed():
    ok = FakeResponse(payload={"eps": encode_array(np.zeros((2, 2)))})
    backend, session = make_remote([requests.ConnectionError("down"), ok], max_retries=3)
    backend.predict_eps(np.zeros((2, 2)), 10)
    assert len(session.calls) == 2


def test_remote_client_error_not_retried():
    backend, session = make_remote([FakeResponse(status=400, payload={})], max_retries=5)
    with pytest.raises(RemoteError) as exc:
        backend.predict_eps(np.zeros((2, 2)), 10)
    assert not exc.value.retryable
    assert len(session.calls) == 1


def test_remote_bad_json_body():
    backend, _ = make_remote([FakeResponse(raw_text="<html>oops</html>")])
    with pytest.raises(RemoteError, match="non-JSON"):
        backend.predict_eps(np.zeros((2, 2)), 10)


def test_remote_missing_eps_field():
    backend, _ = make_remote([FakeResponse(payload={"status": "ok"})])
    with pytest.raises(RemoteError, match="eps"):
        backend.predict_eps(np.zeros((2, 2)), 10)
