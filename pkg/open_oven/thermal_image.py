from io import BytesIO
import logging
from pathlib import Path

import numpy as np
from PIL import Image

_LOGGER = logging.getLogger(__name__)

DEFAULT_PIXELS_PER_CELL = 8
DEFAULT_MAX_SIDE_PIXELS = 1024

# Black -> purple -> red -> orange -> yellow -> white.
IRONBOW_STOPS = np.array(
    [
        [0, 0, 0],
        [80, 0, 140],
        [200, 30, 60],
        [250, 120, 0],
        [255, 220, 40],
        [255, 255, 255],
    ],
    dtype=float,
)


def false_colour(values: np.ndarray, t_min: float, t_max: float):
    """RGB uint8 array for values scaled onto the palette."""
    span = t_max - t_min
    if span <= 0:
        scaled = np.zeros_like(values, dtype=float)
    else:
        scaled = np.clip((values - t_min) / span, 0.0, 1.0)
    pos = scaled * (len(IRONBOW_STOPS) - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, len(IRONBOW_STOPS) - 1)
    frac = (pos - lo)[..., None]
    rgb = IRONBOW_STOPS[lo] * (1 - frac) + IRONBOW_STOPS[hi] * frac
    return np.round(rgb).astype(np.uint8)


class ThermalImageRenderer:
    """Thermal-camera style frames of the sensed load surface."""

    def __init__(
        self,
        t_min=None,
        t_max=None,
        pixels_per_cell=DEFAULT_PIXELS_PER_CELL,
        max_side=DEFAULT_MAX_SIDE_PIXELS,
    ) -> None:
        """Initialize the renderer.

        :param t_min: Temperature (K) at the cold end of the palette,
        taken from each frame when None.
        :param t_max: Temperature (K) at the hot end of the palette.
        :param pixels_per_cell: Upscale factor of each surface cell.
        :param max_side: Longest allowed image side in pixels.
        """
        self.t_min = t_min
        self.t_max = t_max
        self.pixels_per_cell = pixels_per_cell
        self.max_side = max_side
        self._buffer = BytesIO()

    def render_surface(self, surface: np.ndarray) -> Image.Image:
        """Image of an (nx, ny) temperature layer, y pointing up."""
        surface = np.asarray(surface, dtype=float)
        t_min = self.t_min if self.t_min is not None else surface.min()
        t_max = self.t_max if self.t_max is not None else surface.max()
        rgb = false_colour(surface.T[::-1], t_min, t_max)
        image = Image.fromarray(rgb)
        width, height = image.size
        scale = self.pixels_per_cell
        if max(width, height) * scale > self.max_side:
            scale = max(self.max_side // max(width, height), 1)
        if scale > 1:
            image = image.resize(
                (width * scale, height * scale), Image.Resampling.NEAREST
            )
        return image

    def to_png(self, surface: np.ndarray) -> bytes:
        """PNG bytes of a rendered surface."""
        self._buffer.seek(0)
        self._buffer.truncate(0)
        self.render_surface(surface).save(
            self._buffer, format="PNG", optimize=True
        )
        return self._buffer.getvalue()

    def save(self, path, surface: np.ndarray) -> Path:
        """Write a surface frame as a PNG file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = self.to_png(surface)
        path.write_bytes(data)
        _LOGGER.debug("Thermal frame %s: %d bytes", path, len(data))
        return path
