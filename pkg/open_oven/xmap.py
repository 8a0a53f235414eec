"""Conservative cross-mapping between the Yee grid and the load mesh."""

from dataclasses import dataclass
import logging

import numpy as np
from scipy import sparse

from .errors import DisjointDomains
from .materials import conductivity_from_em, effective_em
from .scene import Box, YeeGridSpec

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class ThermalGrid:
    """Tensor-product load mesh given by its node coordinates."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @classmethod
    def uniform(cls, box: Box, shape) -> "ThermalGrid":
        """Evenly split box into shape = (nx, ny, nz) cells."""
        if any(int(n) < 1 for n in shape):
            raise ValueError("thermal mesh needs at least one cell per axis")
        return cls(
            *(
                np.linspace(lo, hi, int(n) + 1)
                for (lo, hi), n in zip(box.bounds, shape)
            )
        )

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Node arrays for x, y, z."""
        return (self.x, self.y, self.z)

    @property
    def shape(self) -> tuple[int, int, int]:
        """Cell counts."""
        return tuple(len(a) - 1 for a in self.axes)

    @property
    def spacing(self) -> tuple[np.ndarray, ...]:
        """Per-axis cell widths."""
        return tuple(np.diff(a) for a in self.axes)

    @property
    def centers(self) -> tuple[np.ndarray, ...]:
        """Per-axis cell-center coordinates."""
        return tuple(0.5 * (a[1:] + a[:-1]) for a in self.axes)

    @property
    def volumes(self) -> np.ndarray:
        """Cell volumes, shape (nx, ny, nz)."""
        dx, dy, dz = self.spacing
        return dx[:, None, None] * dy[None, :, None] * dz[None, None, :]

    @property
    def box(self) -> Box:
        """Bounding box of the mesh."""
        return Box(
            self.x[0], self.x[-1], self.y[0], self.y[-1],
            self.z[0], self.z[-1],
        )


def overlap_matrix(target: np.ndarray, source: np.ndarray):
    """Sparse 1-D overlap lengths between two sets of intervals.

    Entry (t, s) is the length of [target[t], target[t+1]] intersected
    with [source[s], source[s+1]].
    """
    rows, cols, vals = [], [], []
    for t in range(len(target) - 1):
        lo, hi = target[t], target[t + 1]
        first = max(int(np.searchsorted(source, lo, side="right")) - 1, 0)
        last = min(int(np.searchsorted(source, hi, side="left")),
                   len(source) - 1)
        for s in range(first, last):
            length = min(hi, source[s + 1]) - max(lo, source[s])
            if length > 0:
                rows.append(t)
                cols.append(s)
                vals.append(length)
    return sparse.csr_matrix(
        (vals, (rows, cols)), shape=(len(target) - 1, len(source) - 1)
    )


@dataclass(frozen=True)
class Mapping:
    """Volume-overlap weights between load-mesh and Yee load cells."""

    weights: sparse.csr_matrix
    reverse: sparse.csr_matrix
    thermal_volumes: np.ndarray
    em_volumes: np.ndarray
    thermal_shape: tuple
    em_shape: tuple
    em_slices: tuple

    @property
    def max_weight_error(self) -> float:
        """Largest relative gap between row sums and cell volumes."""
        rows = np.asarray(self.weights.sum(axis=1)).ravel()
        vols = self.thermal_volumes.ravel()
        return float(np.max(np.abs(rows - vols) / vols))


def build_mapping(
    em_grid: YeeGridSpec, thermal_grid: ThermalGrid, load_mask
) -> Mapping:
    """Exact axis-aligned overlap weights for the load region.

    load_mask is the boolean Yee-cell load mask; its (box-shaped) extent
    must tile the same region as thermal_grid.
    """
    mask = np.asarray(load_mask, dtype=bool)
    if not mask.any():
        raise DisjointDomains("load region is empty on the Yee grid")
    if any(n < 1 for n in thermal_grid.shape):
        raise DisjointDomains("load region is empty on the thermal mesh")

    slices = []
    for axis in range(3):
        other = tuple(a for a in range(3) if a != axis)
        hit = np.nonzero(mask.any(axis=other))[0]
        slices.append(slice(int(hit[0]), int(hit[-1]) + 1))
    slices = tuple(slices)

    per_axis = []
    for axis in range(3):
        sl = slices[axis]
        em_nodes = em_grid.edges(axis)[sl.start:sl.stop + 1]
        per_axis.append(overlap_matrix(thermal_grid.axes[axis], em_nodes))
    if any(m.nnz == 0 for m in per_axis):
        raise DisjointDomains("load meshes do not overlap")

    weights = sparse.kron(
        sparse.kron(per_axis[0], per_axis[1]), per_axis[2], format="csr"
    )
    em_shape = tuple(s.stop - s.start for s in slices)
    mapping = Mapping(
        weights=weights,
        reverse=weights.T.tocsr(),
        thermal_volumes=thermal_grid.volumes,
        em_volumes=np.full(em_shape, em_grid.cell_volume),
        thermal_shape=thermal_grid.shape,
        em_shape=em_shape,
        em_slices=slices,
    )
    _LOGGER.info(
        "Cross mapping: %d thermal cells <-> %d Yee cells, %d weights, "
        "max weight error %.3g",
        int(np.prod(thermal_grid.shape)), int(np.prod(em_shape)),
        weights.nnz, mapping.max_weight_error,
    )
    return mapping


def map_power(mapping: Mapping, q_em: np.ndarray) -> np.ndarray:
    """Volumetric source (W/m^3) on the thermal mesh.

    q_em is the full-grid power density; only the load box is read.
    """
    q_local = np.asarray(q_em)[mapping.em_slices].ravel()
    q_t = mapping.weights @ q_local
    return (q_t / mapping.thermal_volumes.ravel()).reshape(
        mapping.thermal_shape
    )


def pull_to_em(mapping: Mapping, values: np.ndarray) -> np.ndarray:
    """Volume-weighted average of thermal-cell values on Yee load cells."""
    v = np.asarray(values, dtype=float).ravel()
    covered = np.asarray(mapping.reverse.sum(axis=1)).ravel()
    out = (mapping.reverse @ v) / covered
    return out.reshape(mapping.em_shape)


def map_dielectric(mapping: Mapping, state, materials, freq: float):
    """Per Yee load cell (eps_r_eff, sigma_eff) from the thermal state.

    state provides per-cell temperature, degree of cure and material
    index on the thermal mesh.
    """
    eps_t = np.empty(state.temperature.shape)
    sigma_t = np.empty(state.temperature.shape)
    for idx in np.unique(state.material_index):
        sel = state.material_index == idx
        eps, tan = effective_em(
            materials[int(idx)], state.temperature[sel], state.alpha[sel]
        )
        eps_t[sel] = eps
        sigma_t[sel] = conductivity_from_em(eps, tan, freq)
    return pull_to_em(mapping, eps_t), pull_to_em(mapping, sigma_t)
