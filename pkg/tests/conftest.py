from dataclasses import replace

import numpy as np
import pytest

from open_oven.emsolve import PowerMap
from open_oven.materials import BUNDLED_MATERIALS, MaterialTable
from open_oven.modes import CavitySpec
from open_oven.scene import Block, Box, Probe, Scene, YeeGridSpec

OVEN = dict(a=25.5e-3, b=25.5e-3, l_d=100e-3, l_air=10e-3, eps_r=6.0)


@pytest.fixture
def materials():
    return MaterialTable(dict(BUNDLED_MATERIALS))


@pytest.fixture
def oven():
    return CavitySpec(**OVEN)


def make_small_scene(sample="solder-sample", **overrides):
    """10 x 10 x 10 mm cavity, 4 x 4 x 0.5 mm sample on the filler."""
    cavity = CavitySpec(a=10e-3, b=10e-3, l_d=9e-3, l_air=1e-3, eps_r=6.0)
    region = Box(3e-3, 7e-3, 3e-3, 7e-3, 9e-3, 9.5e-3)
    scene = Scene(
        cavity=cavity,
        blocks=[
            Block(Box(0.0, 10e-3, 0.0, 10e-3, 0.0, 9e-3), "filler"),
            Block(region, sample),
        ],
        sample_region=region,
        probe=Probe(5e-3, 5e-3, 2e-3),
    )
    return replace(scene, **overrides) if overrides else scene


SMALL_GRID = YeeGridSpec(
    dx=1e-3, dy=1e-3, dz=0.5e-3, nx=10, ny=10, nz=20
)


@pytest.fixture
def small_scene():
    return make_small_scene()


@pytest.fixture
def small_grid():
    return SMALL_GRID


SMALL_LOAD = (slice(3, 7), slice(3, 7), slice(18, 19))


def sigma_solver(medium, freq):
    """Stand-in EM solve: sample dissipation proportional to sigma."""
    q = np.zeros(SMALL_GRID.shape)
    q[SMALL_LOAD] = medium.sigma[SMALL_LOAD]
    return PowerMap(
        q=q,
        cell_volume=SMALL_GRID.cell_volume,
        freq=freq,
    ).per_watt()


@pytest.fixture
def stub_solver():
    return sigma_solver


SMALL_HEAT_YAML = """\
scenario: heat
seed: 3
scene:
  cavity: {a: 10.0e-3, b: 10.0e-3, l_d: 9.0e-3, l_air: 1.0e-3}
  sample: {material: solder-sample, side: 4.0e-3}
drive:
  frequency: 10.4e+9
power_schedule:
  breakpoints: [[0, 2.0], [4, 2.0]]
  hold: true
output:
  snapshot_interval: 2
"""
