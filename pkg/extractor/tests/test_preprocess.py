"""Preprocessing pipeline tests."""

import numpy as np
import pytest
from PIL import Image

from featex.preprocess import (
    IMAGENET_MEAN,
    IMAGENET_STD,
    center_crop,
    crop_bottom,
    prepare_image,
    resize_shorter_side,
    standardize,
)


def _img(w, h, color=(120, 30, 200)):
    return Image.new("RGB", (w, h), color)


class TestCropBottom:
    def test_noop_at_zero(self):
        img = _img(50, 40)
        assert crop_bottom(img, 0.0).size == (50, 40)

    def test_drops_fraction(self):
        out = crop_bottom(_img(50, 40), 0.25)
        assert out.size == (50, 30)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            crop_bottom(_img(10, 10), 1.0)

    def test_removes_text_strip(self):
        img = _img(60, 100, (0, 0, 0))
        strip = Image.new("RGB", (60, 10), (255, 255, 255))
        img.paste(strip, (0, 90))
        out = crop_bottom(img, 0.1)
        assert np.asarray(out).max() == 0  # bottom strip gone


class TestResize:
    def test_landscape(self):
        out = resize_shorter_side(_img(512, 256))
        assert out.size == (512, 256)

    def test_portrait(self):
        out = resize_shorter_side(_img(128, 512))
        assert out.size == (256, 1024)

    def test_square(self):
        assert resize_shorter_side(_img(100, 100)).size == (256, 256)


class TestCenterCrop:
    def test_center_crop_exact(self):
        out = center_crop(resize_shorter_side(_img(300, 500)))
        assert out.size == (224, 224)

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            center_crop(_img(100, 100))

    def test_crop_is_centered(self):
        img = _img(228, 228, (0, 0, 0))
        img.putpixel((114, 114), (255, 0, 0))
        out = center_crop(img)
        assert out.getpixel((112, 112)) == (255, 0, 0)


class TestStandardize:
    def test_channel_values(self):
        arr = standardize(_img(4, 4, (255, 0, 0)))
        assert arr.shape == (3, 4, 4)
        np.testing.assert_allclose(
            arr[0, 0, 0], (1.0 - IMAGENET_MEAN[0]) / IMAGENET_STD[0], rtol=1e-6
        )
        np.testing.assert_allclose(
            arr[1, 0, 0], -IMAGENET_MEAN[1] / IMAGENET_STD[1], rtol=1e-6
        )

    def test_prepare_image_shape(self, tmp_path):
        path = tmp_path / "img.png"
        _img(333, 471).save(path)
        arr = prepare_image(path, bottom_crop_fraction=0.1)
        assert arr.shape == (3, 224, 224)
        assert arr.dtype == np.float32
        assert np.isfinite(arr).all()
