from io import BytesIO

import numpy as np
from PIL import Image

from open_oven.thermal_image import (
    IRONBOW_STOPS,
    ThermalImageRenderer,
    false_colour,
)


def test_palette_endpoints():
    rgb = false_colour(np.array([300.0, 350.0, 400.0, 500.0]), 300.0, 400.0)
    assert rgb[0].tolist() == [0, 0, 0]
    assert rgb[2].tolist() == [255, 255, 255]
    assert rgb[3].tolist() == [255, 255, 255]
    assert rgb.dtype == np.uint8
    flat = false_colour(np.full(3, 7.0), 7.0, 7.0)
    assert flat.tolist() == [IRONBOW_STOPS[0].astype(int).tolist()] * 3


def test_render_orientation_and_scale():
    surface = np.zeros((3, 2))
    surface[2, 1] = 1.0
    image = ThermalImageRenderer(pixels_per_cell=4).render_surface(surface)
    assert image.size == (12, 8)
    # hottest cell at high x, high y lands top right
    assert image.getpixel((11, 0)) == (255, 255, 255)
    assert image.getpixel((0, 7)) == (0, 0, 0)


def test_max_side_limits_upscale():
    renderer = ThermalImageRenderer(pixels_per_cell=100, max_side=64)
    assert renderer.render_surface(np.zeros((16, 8))).size == (64, 32)


def test_png_bytes_and_save(tmp_path):
    renderer = ThermalImageRenderer(t_min=290.0, t_max=310.0)
    surface = np.linspace(290.0, 310.0, 12).reshape(4, 3)
    data = renderer.to_png(surface)
    assert data.startswith(b"\x89PNG\r\n\x1a\n")
    assert Image.open(BytesIO(data)).size == (32, 24)
    assert renderer.to_png(surface) == data
    path = renderer.save(tmp_path / "frames" / "f.png", surface)
    assert path.read_bytes() == data
