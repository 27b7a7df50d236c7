import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from dedup_scan import augment
from dedup_scan.augment import FULL8, PAPER6, Transform, apply_transform, compose, inverse
from dedup_scan.errors import InvalidInputError, UnsupportedInputError
from dedup_scan.phash import compute_phash

square = hnp.arrays(
    dtype=np.uint8,
    shape=st.integers(min_value=2, max_value=12).map(lambda n: (n, n, 3)),
    elements=st.integers(min_value=0, max_value=255),
)


def test_mode_contents():
    assert augment.transforms_for_mode("paper6") == PAPER6
    assert augment.transforms_for_mode("full8") == FULL8
    assert len(PAPER6) == 6 and len(FULL8) == 8
    assert PAPER6[0] is Transform.IDENTITY
    with pytest.raises(InvalidInputError):
        augment.transforms_for_mode("paper7")


def test_rot90_is_clockwise():
    img = np.array([[1, 2], [3, 4]], dtype=np.uint8)
    np.testing.assert_array_equal(
        apply_transform(img, Transform.ROT90), np.array([[3, 1], [4, 2]])
    )
    np.testing.assert_array_equal(
        apply_transform(img, Transform.ROT270), np.array([[2, 4], [1, 3]])
    )


def test_flips_on_rectangles():
    img = np.arange(24, dtype=np.uint8).reshape(4, 6)
    np.testing.assert_array_equal(apply_transform(img, Transform.FLIP_H), img[:, ::-1])
    np.testing.assert_array_equal(apply_transform(img, Transform.FLIP_V), img[::-1, :])
    np.testing.assert_array_equal(apply_transform(img, Transform.ROT180), img[::-1, ::-1])


def test_square_only_transforms_reject_rectangles():
    img = np.zeros((4, 6, 3), dtype=np.uint8)
    for t in (Transform.ROT90, Transform.ROT270, Transform.FLIP_DIAG, Transform.FLIP_ANTI):
        with pytest.raises(UnsupportedInputError):
            apply_transform(img, t)


def test_rejects_1d_input():
    with pytest.raises(InvalidInputError):
        apply_transform(np.zeros(8, dtype=np.uint8), Transform.FLIP_H)


@given(square)
def test_composition_table_matches_pixel_action(img):
    for a in FULL8:
        once = apply_transform(img, a)
        for b in FULL8:
            np.testing.assert_array_equal(
                apply_transform(once, b), apply_transform(img, compose(a, b))
            )


@given(square)
def test_inverse_restores_image(img):
    for t in FULL8:
        np.testing.assert_array_equal(
            apply_transform(apply_transform(img, t), inverse(t)), img
        )


def test_group_laws():
    ident = Transform.IDENTITY
    for t in FULL8:
        assert compose(ident, t) is t
        assert compose(t, ident) is t
        assert compose(t, inverse(t)) is ident
    # full8 is closed
    assert all(compose(a, b) in FULL8 for a in FULL8 for b in FULL8)


def test_paper6_not_closed_under_composition():
    # the canonical escape: a quarter turn then a horizontal flip is a
    # diagonal flip, which the six-element set does not contain
    assert compose(Transform.ROT90, Transform.FLIP_H) is Transform.FLIP_DIAG
    assert Transform.FLIP_DIAG not in PAPER6
    # but it is closed under inverses
    assert all(inverse(t) in PAPER6 for t in PAPER6)


def test_soundness_hash_of_transformed_image_is_in_set(make_rgb):
    for size in (33, 64, 97):
        img = make_rgb(size, size)
        aug = augment.augmented_hash_set(img, mode="full8", image_id="i")
        for t in FULL8:
            assert compute_phash(apply_transform(img, t)) == aug.hash_for(t)


def test_paper6_set_is_prefix_of_full8(make_rgb):
    img = make_rgb(48, 48)
    six = augment.augmented_hash_set(img, mode="paper6")
    eight = augment.augmented_hash_set(img, mode="full8")
    assert six.entries == eight.entries[:6]


def test_rectangular_images_cannot_take_rotation_modes():
    # both modes contain quarter turns, so non-square input is rejected
    img = np.zeros((4, 6, 3), dtype=np.uint8)
    with pytest.raises(UnsupportedInputError):
        augment.augmented_hash_set(img, mode="paper6")


def test_accessors(make_rgb):
    img = make_rgb(40, 40)
    aug = augment.augmented_hash_set(img, mode="paper6", image_id="abc")
    assert aug.image_id == "abc"
    assert aug.identity_hash == compute_phash(img)
    assert len(aug.hashes) == 6
    assert aug.hash_for(Transform.IDENTITY) == aug.identity_hash
    with pytest.raises(KeyError):
        aug.hash_for(Transform.FLIP_DIAG)


class TestFastPath:
    def test_gate_passes_here(self):
        assert augment.fast_path_ok() is True

    def test_fast_equals_pixel_path(self, make_rgb):
        mismatches = 0
        for _ in range(60):
            img = make_rgb(72, 72)
            pix = augment.augmented_hash_set(img, mode="full8")
            fast = augment.augmented_hash_set(img, mode="full8", fast=True)
            mismatches += sum(a != b for a, b in zip(pix.hashes, fast.hashes))
        assert mismatches == 0

    def test_disabled_gate_falls_back(self, make_rgb, monkeypatch):
        monkeypatch.setattr(augment, "_FAST_PATH_OK", False)
        img = make_rgb(50, 50)
        pix = augment.augmented_hash_set(img, mode="paper6")
        fallback = augment.augmented_hash_set(img, mode="paper6", fast=True)
        assert pix.hashes == fallback.hashes
