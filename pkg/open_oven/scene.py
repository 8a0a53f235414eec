"""Oven geometry and its voxelization onto the Yee grid."""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .const import (
    C0,
    DEFAULT_CELL_BUDGET,
    DEFAULT_CELLS_PER_WAVELENGTH,
    DEFAULT_H_CONV,
    GRID_SNAP_TOL,
    T_REF,
)
from .errors import GridTooLarge
from .materials import MaterialTable
from .modes import CavitySpec

_LOGGER = logging.getLogger(__name__)

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [x0, x1] x [y0, y1] x [z0, z1] in meters."""

    x0: float
    x1: float
    y0: float
    y1: float
    z0: float
    z1: float

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        """Per-axis (low, high) pairs."""
        return ((self.x0, self.x1), (self.y0, self.y1), (self.z0, self.z1))

    @property
    def extents(self) -> tuple[float, float, float]:
        """Edge lengths along x, y, z."""
        return (self.x1 - self.x0, self.y1 - self.y0, self.z1 - self.z0)

    @property
    def volume(self) -> float:
        """Box volume (m^3), zero for degenerate boxes."""
        ex, ey, ez = self.extents
        return max(ex, 0.0) * max(ey, 0.0) * max(ez, 0.0)

    def inside(self, other: "Box", tol: float = 1e-9) -> bool:
        """True when this box lies within other."""
        return all(
            lo >= olo - tol and hi <= ohi + tol
            for (lo, hi), (olo, ohi) in zip(self.bounds, other.bounds)
        )

    def axis_masks(self, centers) -> tuple[np.ndarray, ...]:
        """Per-axis boolean masks of cell centers inside the box."""
        return tuple(
            (c >= lo - _TOL) & (c <= hi + _TOL)
            for c, (lo, hi) in zip(centers, self.bounds)
        )


@dataclass(frozen=True)
class Block:
    """A box of one material; later blocks override earlier ones."""

    box: Box
    material: str


@dataclass(frozen=True)
class Probe:
    """Coupling probe on the shorted z = 0 wall."""

    x: float
    y: float
    length: float


@dataclass
class Scene:
    """Cavity, filler, sample stack, probe and ambient conditions."""

    cavity: CavitySpec
    blocks: list[Block]
    sample_region: Box
    probe: Probe
    ambient_T: float = T_REF
    h_conv: float = DEFAULT_H_CONV
    h_faces: dict[str, float] = field(default_factory=dict)
    contact_conductance: float = 0.0
    substrate_cte: float = 2.6e-6
    open_end: bool = True

    def __post_init__(self) -> None:
        """Check containment, probe placement and face names."""
        whole = self.cavity_box
        for block in self.blocks:
            if not block.box.inside(whole):
                raise ValueError(
                    f"block of {block.material} lies outside the cavity"
                )
        if self.sample_region.volume <= 0:
            raise ValueError("sample_region must have positive volume")
        if not self.sample_region.inside(whole):
            raise ValueError("sample_region lies outside the cavity")
        if not (0 < self.probe.x < self.cavity.a):
            raise ValueError("probe x must be inside the end wall")
        if not (0 < self.probe.y < self.cavity.b):
            raise ValueError("probe y must be inside the end wall")
        if not (0 < self.probe.length < self.cavity.length):
            raise ValueError("probe length must be inside the cavity")
        unknown = set(self.h_faces) - set(FACES)
        if unknown:
            raise ValueError(f"unknown faces in h_faces: {sorted(unknown)}")

    @property
    def cavity_box(self) -> Box:
        """The full cavity volume, shorted wall at z = 0."""
        c = self.cavity
        return Box(0.0, c.a, 0.0, c.b, 0.0, c.length)

    @property
    def material_names(self) -> list[str]:
        """Materials referenced by the blocks, in first-use order."""
        names = []
        for block in self.blocks:
            if block.material not in names:
                names.append(block.material)
        return names

    def face_coefficients(self) -> dict[str, float]:
        """Film coefficient per load face.

        The face resting on the dielectric (z-) uses the contact
        conductance; every other face uses h_conv unless overridden.
        """
        faces = {face: self.h_conv for face in FACES}
        faces["z-"] = self.contact_conductance
        faces.update(self.h_faces)
        return faces


def reference_scene(
    sample_material: str = "solder-sample",
    sample_side: float = 15e-3,
    sample_thickness: float = 0.5e-3,
    sample_offset: float = 0.0,
    probe_length: float = 4e-3,
) -> Scene:
    """The 25.5 x 25.5 x 110 mm oven with the sample on the filler face."""
    cavity = CavitySpec(a=25.5e-3, b=25.5e-3, l_d=100e-3, l_air=10e-3,
                        eps_r=6.0)
    half = sample_side / 2
    z0 = cavity.l_d + sample_offset
    sample = Box(
        cavity.a / 2 - half, cavity.a / 2 + half,
        cavity.b / 2 - half, cavity.b / 2 + half,
        z0, z0 + sample_thickness,
    )
    filler = Box(0.0, cavity.a, 0.0, cavity.b, 0.0, cavity.l_d)
    return Scene(
        cavity=cavity,
        blocks=[Block(filler, "filler"), Block(sample, sample_material)],
        sample_region=sample,
        probe=Probe(cavity.a / 2, cavity.b / 2, probe_length),
    )


@dataclass(frozen=True)
class YeeGridSpec:
    """Uniform tensor-product grid exactly tiling the cavity."""

    dx: float
    dy: float
    dz: float
    nx: int
    ny: int
    nz: int
    cells_per_wavelength: float = DEFAULT_CELLS_PER_WAVELENGTH

    @property
    def shape(self) -> tuple[int, int, int]:
        """Cell counts (nx, ny, nz)."""
        return (self.nx, self.ny, self.nz)

    @property
    def spacing(self) -> tuple[float, float, float]:
        """Cell sizes (dx, dy, dz)."""
        return (self.dx, self.dy, self.dz)

    @property
    def n_cells(self) -> int:
        """Total cell count."""
        return self.nx * self.ny * self.nz

    @property
    def cell_volume(self) -> float:
        """Volume of one cell (m^3)."""
        return self.dx * self.dy * self.dz

    def edges(self, axis: int) -> np.ndarray:
        """Node coordinates along one axis."""
        n, d = self.shape[axis], self.spacing[axis]
        return np.arange(n + 1) * d

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n, d = self.shape[axis], self.spacing[axis]
        return (np.arange(n) + 0.5) * d

    @property
    def all_centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates for x, y, z."""
        return tuple(self.centers(axis) for axis in range(3))


def _snapped_count(size: float, faces, n_min: int, even: bool):
    """Smallest count in [n_min, 2 n_min] putting every face on a node."""
    for n in range(n_min, 2 * n_min + 1, 2 if even else 1):
        h = size / n
        if all(abs(f / h - round(f / h)) < GRID_SNAP_TOL for f in faces):
            return n
    return None


def auto_grid(
    scene: Scene,
    materials: MaterialTable,
    f_max: float,
    cells_per_wavelength: float = DEFAULT_CELLS_PER_WAVELENGTH,
    cell_budget: int = DEFAULT_CELL_BUDGET,
) -> YeeGridSpec:
    """Choose a grid resolving the densest material at f_max.

    Cells are no larger than lambda_min / cells_per_wavelength and small
    enough that every block spans at least two cells along each axis.
    Transverse counts are kept even so a centered probe sits on a node.
    Each count is then raised, by at most a factor of two, until every
    block and sample face lies on a grid plane; faces that cannot be
    snapped that way are left to the staircase.
    """
    if cells_per_wavelength < 10:
        raise ValueError("cells_per_wavelength must be >= 10")
    if f_max <= 0:
        raise ValueError("f_max must be > 0")
    eps_max = max(
        [1.0] + [materials[name].eps_r for name in scene.material_names]
    )
    lam_min = C0 / (f_max * math.sqrt(eps_max))
    h_wave = lam_min / cells_per_wavelength
    sizes = scene.cavity_box.extents
    boxes = [block.box for block in scene.blocks] + [scene.sample_region]

    counts = []
    for axis, size in enumerate(sizes):
        h_axis = h_wave
        faces = set()
        for box in boxes:
            extent = box.extents[axis]
            if 0 < extent < size * (1 - 1e-9):
                h_axis = min(h_axis, extent / 2)
            for face in box.bounds[axis]:
                if 1e-9 * size < face < size * (1 - 1e-9):
                    faces.add(face)
        n = max(int(math.ceil(size / h_axis - 1e-9)), 2)
        if axis < 2 and n % 2:
            n += 1
        snapped = _snapped_count(size, sorted(faces), n, axis < 2)
        if snapped is None:
            _LOGGER.warning(
                "Faces at %s m along axis %d do not fit a uniform grid "
                "of %d to %d cells; they are staircased",
                sorted(faces), axis, n, 2 * n,
            )
        else:
            n = snapped
        counts.append(n)

    total = counts[0] * counts[1] * counts[2]
    if total > cell_budget:
        raise GridTooLarge(
            f"grid {counts[0]}x{counts[1]}x{counts[2]} = {total} cells "
            f"exceeds the budget of {cell_budget}"
        )
    grid = YeeGridSpec(
        dx=sizes[0] / counts[0],
        dy=sizes[1] / counts[1],
        dz=sizes[2] / counts[2],
        nx=counts[0],
        ny=counts[1],
        nz=counts[2],
        cells_per_wavelength=cells_per_wavelength,
    )
    _LOGGER.info(
        "Yee grid %dx%dx%d (%d cells), cell %.4g x %.4g x %.4g mm",
        grid.nx, grid.ny, grid.nz, total,
        grid.dx * 1e3, grid.dy * 1e3, grid.dz * 1e3,
    )
    return grid


@dataclass(frozen=True)
class Voxels:
    """Per-cell material indices and the load mask."""

    material_index: np.ndarray
    load_mask: np.ndarray
    materials: MaterialTable

    def cell_property(self, attr: str) -> np.ndarray:
        """Per-cell value of one material attribute."""
        return self.materials.property_array(attr)[self.material_index]

    @property
    def load_slices(self) -> tuple[slice, slice, slice]:
        """Index ranges of the (box-shaped) load mask."""
        slices = []
        for axis in range(3):
            other = tuple(a for a in range(3) if a != axis)
            hit = np.nonzero(self.load_mask.any(axis=other))[0]
            if hit.size == 0:
                return (slice(0, 0),) * 3
            slices.append(slice(int(hit[0]), int(hit[-1]) + 1))
        return tuple(slices)


def voxelize(
    scene: Scene, grid: YeeGridSpec, materials: MaterialTable
) -> Voxels:
    """Assign each cell the material of the last block holding its center."""
    centers = grid.all_centers
    index = np.zeros(grid.shape, dtype=np.int32)
    for block in scene.blocks:
        mx, my, mz = block.box.axis_masks(centers)
        inside = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
        index[inside] = materials.index(block.material)
    mx, my, mz = scene.sample_region.axis_masks(centers)
    load = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
    _LOGGER.debug(
        "Voxelized %d cells, %d in the load", index.size, int(load.sum())
    )
    return Voxels(material_index=index, load_mask=load, materials=materials)


def edge_average(cell: np.ndarray) -> tuple[np.ndarray, ...]:
    """Average a cell array onto Ex, Ey and Ez edges.

    Each edge takes the arithmetic mean of the (up to four) cells that
    share it; cells outside the grid do not count.
    """
    ones = np.ones_like(cell, dtype=float)

    def around(values, axes):
        pad = [(0, 0)] * 3
        for axis in axes:
            pad[axis] = (1, 1)
        padded = np.pad(values, pad)
        total = 0.0
        for s0 in (0, 1):
            for s1 in (0, 1):
                sl = [slice(None)] * 3
                sl[axes[0]] = slice(s0, s0 + values.shape[axes[0]] + 1)
                sl[axes[1]] = slice(s1, s1 + values.shape[axes[1]] + 1)
                total = total + padded[tuple(sl)]
        return total

    out = []
    for axes in ((1, 2), (0, 2), (0, 1)):
        out.append(around(cell.astype(float), axes) / around(ones, axes))
    return tuple(out)
