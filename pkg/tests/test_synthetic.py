"""Properties of the deterministic synthetic dataset generator."""

from __future__ import annotations

import numpy as np
import pytest

from fusionsort.errors import ConfigError
from fusionsort.synthetic import (BACKGROUND_LEVEL, class_color,
                                  class_signature, generate_synthetic_dataset)


def test_same_seed_bit_identical():
    a = generate_synthetic_dataset(3, 4, 16, 16, 6, 3)
    b = generate_synthetic_dataset(3, 4, 16, 16, 6, 3)
    for (ca, ra, ma), (cb, rb, mb) in zip(a, b):
        np.testing.assert_array_equal(ca.data, cb.data)
        np.testing.assert_array_equal(ra.data, rb.data)
        np.testing.assert_array_equal(ma.data, mb.data)


def test_different_seed_differs():
    a = generate_synthetic_dataset(3, 1, 16, 16, 6, 3)
    b = generate_synthetic_dataset(4, 1, 16, 16, 6, 3)
    assert not np.array_equal(a[0][2].data, b[0][2].data) or \
        not np.array_equal(a[0][0].data, b[0][0].data)


def test_every_image_has_background_and_foreground():
    data = generate_synthetic_dataset(11, 8, 16, 24, 5, 4)
    for _, _, mask in data:
        classes = set(np.unique(mask.data).tolist())
        assert 0 in classes
        assert classes - {0}


def test_signature_argmax_band():
    # the noise-free class spectrum peaks at round(k * bands / K)
    for bands, num_classes in [(9, 3), (16, 4), (5, 2)]:
        for k in range(1, num_classes):
            sig = class_signature(k, bands, num_classes)
            expect = min(round(k * bands / num_classes), bands - 1)
            assert int(np.argmax(sig)) == expect


def test_background_signature_flat():
    sig = class_signature(0, 7, 3)
    np.testing.assert_array_equal(sig, np.full(7, BACKGROUND_LEVEL))


def test_class_colors_distinct_and_quantized():
    colors = [class_color(k) for k in range(4)]
    for i in range(4):
        levels = colors[i] * 255.0
        np.testing.assert_allclose(levels, np.round(levels), atol=1e-9)
        for j in range(i + 1, 4):
            assert np.abs(colors[i] - colors[j]).max() > 0.05


def test_cube_matches_mask_spectra():
    data = generate_synthetic_dataset(5, 2, 16, 16, 9, 3)
    for cube, _, mask in data:
        for k in np.unique(mask.data):
            sig = class_signature(int(k), 9, 3)
            where = mask.data == k
            observed = cube.data[:, where].mean(axis=1)
            # noise is zero-mean, so the per-class mean tracks the signature
            assert np.abs(observed - sig).max() < 0.05


def test_spectra_linearly_separable():
    # nearest-signature classification recovers the mask almost everywhere
    data = generate_synthetic_dataset(9, 4, 16, 16, 9, 3)
    signatures = np.stack([class_signature(k, 9, 3) for k in range(3)])
    total = wrong = 0
    for cube, _, mask in data:
        pixels = cube.data.reshape(9, -1).T
        d2 = ((pixels[:, None, :] - signatures[None]) ** 2).sum(axis=2)
        pred = np.argmin(d2, axis=1).reshape(mask.data.shape)
        wrong += int((pred != mask.data).sum())
        total += mask.data.size
    assert wrong / total < 0.001


def test_rgb_matches_palette():
    data = generate_synthetic_dataset(2, 1, 16, 16, 5, 3)
    cube, rgb, mask = data[0]
    assert rgb.shape == (1, 3, 16, 16)
    for k in np.unique(mask.data):
        where = mask.data == k
        expect = class_color(int(k))
        got = rgb.data[0][:, where]
        np.testing.assert_allclose(got, expect[:, None] * np.ones_like(got),
                                   atol=1e-12)


def test_validation_errors():
    with pytest.raises(ConfigError):
        generate_synthetic_dataset(0, 1, 16, 16, 5, 1)
    with pytest.raises(ConfigError):
        generate_synthetic_dataset(0, 1, 4, 16, 5, 3)
    with pytest.raises(ConfigError):
        generate_synthetic_dataset(0, 0, 16, 16, 5, 3)
