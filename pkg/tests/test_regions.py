"""Region masks: ingestion, eyeshadow engineering, gradation smoothing."""

import numpy as np
import pytest

from makeuplab.errors import ConfigError, ParameterError
from makeuplab.kernels import NO_EXTERIOR
from makeuplab.regions import (
    DEFAULT_EYESHADOW_KERNEL,
    LabelMap,
    MaskConfig,
    SoftMask,
    StructuringKernel,
    build_eyeshadow_mask,
    derive_masks,
    dilate,
    gradation_smooth,
    labelmap_to_mask,
    parse_mapping_file,
    shift_mask,
)
from test_kernels import bfs_exterior_distance, set_dilate

# ---------------------------------------------------------------------------
# oracles


def oracle_eyeshadow(eye, kernel, iterations, shift):
    """Eyeshadow footprint via explicit set operations: dilate, translate,
    subtract the eye."""
    h, w = eye.shape
    dil = set_dilate(eye, [tuple(o) for o in kernel.offsets()], iterations)
    shifted = np.zeros_like(dil)
    dy, dx = shift
    for y, x in zip(*np.nonzero(dil)):
        ny, nx = y + dy, x + dx
        if 0 <= ny < h and 0 <= nx < w:
            shifted[ny, nx] = True
    return shifted & ~eye


def random_eye_fixture(rng, shape=(40, 48)):
    """A few filled rectangles standing in for eye blobs."""
    grid = np.zeros(shape, dtype=bool)
    for _ in range(int(rng.integers(1, 3))):
        y0 = int(rng.integers(8, shape[0] - 12))
        x0 = int(rng.integers(4, shape[1] - 14))
        grid[y0 : y0 + int(rng.integers(3, 6)), x0 : x0 + int(rng.integers(6, 11))] = True
    return grid


# ---------------------------------------------------------------------------
# label maps and mapping files


def test_labelmap_all_background():
    lm = LabelMap(grid=np.zeros((5, 5), dtype=np.int32))
    assert labelmap_to_mask(lm, "skin").is_empty()


def test_labelmap_lip_block_sum():
    grid = np.zeros((20, 20), dtype=np.int32)
    grid[5:15, 5:15] = 12
    lm = LabelMap(grid=grid)
    assert labelmap_to_mask(lm, "lip").grid.sum() == 100


def test_labelmap_absent_region_is_empty_not_error():
    lm = LabelMap(grid=np.zeros((4, 4), dtype=np.int32))
    assert labelmap_to_mask(lm, "hair").is_empty()


def test_labelmap_unknown_region_rejected():
    lm = LabelMap(grid=np.zeros((4, 4), dtype=np.int32))
    with pytest.raises(ParameterError):
        labelmap_to_mask(lm, "mustache")


def test_labelmap_regions_disjoint():
    grid = np.zeros((10, 10), dtype=np.int32)
    grid[0:3] = 1
    grid[3:6] = 12
    grid[6:9] = 4
    lm = LabelMap(grid=grid)
    total = np.zeros((10, 10))
    for region in ("background", "skin", "lip", "eye"):
        total += labelmap_to_mask(lm, region).grid
    assert total.max() <= 1.0


def test_labelmap_rejects_float_grid():
    with pytest.raises(ParameterError):
        LabelMap(grid=np.zeros((3, 3)))


def test_parse_mapping_file():
    text = """
    # face parser labels
    0 = background
    1 = skin
    12 = lip   # upper
    """
    mapping = parse_mapping_file(text)
    assert mapping == {0: "background", 1: "skin", 12: "lip"}


@pytest.mark.parametrize(
    "text",
    ["1 = chin", "skin = 1", "1 skin", "", "# only comments"],
)
def test_parse_mapping_file_rejects(text):
    with pytest.raises(ConfigError):
        parse_mapping_file(text)


# ---------------------------------------------------------------------------
# kernels and dilation wrappers


def test_kernel_footprints():
    cross = StructuringKernel(shape="cross", size=(3, 3))
    np.testing.assert_array_equal(
        cross.footprint(), np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    )
    box = StructuringKernel(shape="box", size=(2, 2))
    assert box.footprint().all()
    assert (0, 0) in {tuple(o) for o in cross.offsets()}


def test_kernel_validation():
    with pytest.raises(ParameterError):
        StructuringKernel(shape="disk", size=(3, 3))
    with pytest.raises(ParameterError):
        StructuringKernel(shape="box", size=(0, 3))


def test_dilate_zero_iterations_identity():
    soft = SoftMask(grid=np.array([[0.25, 0.0], [1.0, 0.6]]), region="lip")
    out = dilate(soft, DEFAULT_EYESHADOW_KERNEL, iterations=0)
    np.testing.assert_array_equal(out.grid, soft.grid)


def test_dilate_negative_iterations():
    with pytest.raises(ParameterError):
        dilate(SoftMask(grid=np.zeros((3, 3))), DEFAULT_EYESHADOW_KERNEL, iterations=-1)


def test_shift_mask_moves_and_zero_fills():
    m = SoftMask(grid=np.eye(4), region="eye")
    out = shift_mask(m, -1, 2)
    expect = np.zeros((4, 4))
    for i in range(4):
        y, x = i - 1, i + 2
        if 0 <= y < 4 and 0 <= x < 4:
            expect[y, x] = 1.0
    np.testing.assert_array_equal(out.grid, expect)


def test_shift_mask_rejects_oversize():
    with pytest.raises(ParameterError):
        shift_mask(SoftMask(grid=np.zeros((4, 4))), 4, 0)


# ---------------------------------------------------------------------------
# eyeshadow construction


def test_eyeshadow_empty_eye():
    out = build_eyeshadow_mask(SoftMask(grid=np.zeros((10, 10)), region="eye"))
    assert out.is_empty()


def test_eyeshadow_twenty_fixtures_match_oracle(rng):
    kernel = DEFAULT_EYESHADOW_KERNEL
    shift = (-(kernel.size[0] // 2), 0)
    for trial in range(20):
        eye = random_eye_fixture(rng)
        got = build_eyeshadow_mask(SoftMask(grid=eye.astype(float), region="eye"))
        ref = oracle_eyeshadow(eye, kernel, 2, shift)
        np.testing.assert_array_equal(got.grid > 0.5, ref, err_msg=f"fixture {trial}")


def test_eyeshadow_disjoint_from_eye(rng):
    for _ in range(5):
        eye = random_eye_fixture(rng)
        band = build_eyeshadow_mask(SoftMask(grid=eye.astype(float), region="eye"))
        assert not np.any((band.grid > 0) & eye)


def test_eyeshadow_custom_shift_applies():
    eye = np.zeros((20, 20), dtype=bool)
    eye[10:12, 8:12] = True
    down = build_eyeshadow_mask(
        SoftMask(grid=eye.astype(float), region="eye"),
        kernel=StructuringKernel("cross", (3, 3)),
        iterations=1,
        shift=(3, 0),
    )
    ys = np.nonzero(down.grid)[0]
    assert ys.min() >= 12  # band pushed below the eye


# ---------------------------------------------------------------------------
# gradation smoothing


def test_gradation_matches_bfs_profile(rng):
    decay = 0.6
    for _ in range(5):
        support = random_eye_fixture(rng) | (rng.random((40, 48)) < 0.05)
        mask = SoftMask(grid=support.astype(float), region="eyeshadow")
        out = gradation_smooth(mask, decay)
        d = bfs_exterior_distance(support)
        expect = np.where(support, 1.0 - np.exp(-decay * d.astype(np.float64)), 0.0)
        expect[d >= NO_EXTERIOR] = np.where(support, 1.0, 0.0)[d >= NO_EXTERIOR]
        np.testing.assert_allclose(out.grid, expect, atol=1e-15)
        # deeper pixels are never fainter
        order = np.argsort(d[support])
        vals = out.grid[support][order]
        assert np.all(np.diff(vals) >= -1e-15)


def test_gradation_large_decay_approaches_binary():
    support = np.zeros((12, 12))
    support[3:9, 3:9] = 1.0
    out = gradation_smooth(SoftMask(grid=support), decay_rate=50.0)
    np.testing.assert_allclose(out.grid, support, atol=1e-12)


def test_gradation_all_ones_unchanged():
    ones = SoftMask(grid=np.ones((6, 6)))
    np.testing.assert_array_equal(gradation_smooth(ones, 0.3).grid, np.ones((6, 6)))


def test_gradation_support_never_grows(rng):
    support = rng.random((15, 15)) < 0.4
    out = gradation_smooth(SoftMask(grid=support.astype(float)), 0.5)
    assert not np.any((out.grid > 0) & ~support)
    assert np.all(out.grid <= support.astype(float) + 1e-15)


def test_gradation_rejects_bad_decay():
    with pytest.raises(ParameterError):
        gradation_smooth(SoftMask(grid=np.ones((3, 3))), 0.0)


# ---------------------------------------------------------------------------
# derived mask sets


def _face_labelmap():
    grid = np.zeros((32, 32), dtype=np.int32)
    grid[4:28, 4:28] = 1
    grid[10:13, 8:14] = 4
    grid[10:13, 18:24] = 5
    grid[22:25, 12:20] = 12
    return LabelMap(grid=grid)


def test_derive_masks_contents():
    masks = derive_masks(_face_labelmap(), MaskConfig())
    for region in ("background", "skin", "eye", "lip", "eyeshadow", "other"):
        assert region in masks
    assert not masks.get("eyeshadow").is_empty()
    lip = masks.get("lip")
    assert 0 < lip.grid.max() <= 1.0
    assert lip.grid[23, 15] > lip.grid[22, 12]  # interior stronger than corner
    with pytest.raises(ParameterError):
        masks.get("halo")


def test_derive_masks_no_eye_gives_empty_eyeshadow():
    grid = np.zeros((16, 16), dtype=np.int32)
    grid[4:12, 4:12] = 1
    masks = derive_masks(LabelMap(grid=grid), MaskConfig())
    assert masks.get("eyeshadow").is_empty()


def test_derive_masks_matches_goldens():
    # goldens built by tests/data/gen_golden_masks.py from set-op dilation
    # and BFS distances, never from derive_masks itself
    from pathlib import Path

    from makeuplab.fixtures import synthetic_face

    archive = np.load(Path(__file__).parent / "data" / "golden_masks.npz")
    _, labelmap = synthetic_face(64, 64)
    masks = derive_masks(labelmap, MaskConfig())
    assert set(archive.files) == set(masks.masks)
    for region in archive.files:
        np.testing.assert_array_equal(
            masks.get(region).grid, archive[region], err_msg=region
        )
