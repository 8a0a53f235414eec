"""Finite-volume heat conduction, cure kinetics and stress on the load."""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np

from .const import MAX_DALPHA_PER_SUBSTEP, T_REF
from .errors import UnstableTimestep
from .materials import MaterialTable
from .scene import Scene
from .xmap import ThermalGrid

_LOGGER = logging.getLogger(__name__)

_FACE_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class EnergyLedger:
    """Cumulative energies (J) crossing the load since t = 0."""

    source: float = 0.0
    exotherm: float = 0.0
    boundary_loss: float = 0.0


@dataclass
class ThermalState:
    """Temperature, degree of cure and stress indicator per load cell."""

    temperature: np.ndarray
    alpha: np.ndarray
    sigma_ind: np.ndarray
    material_index: np.ndarray
    time: float = 0.0
    pending_exotherm: np.ndarray | None = None
    ledger: EnergyLedger = field(default_factory=EnergyLedger)

    def heat_content(self, model: "ThermalModel") -> float:
        """Sum of rho cp T V (J)."""
        return float(np.sum(model.capacity * self.temperature))


@dataclass(frozen=True)
class ThermalModel:
    """Static conductances and capacities of the load mesh."""

    grid: ThermalGrid
    materials: MaterialTable
    material_index: np.ndarray
    capacity: np.ndarray
    conductance: tuple
    boundary: dict
    ambient_T: float

    @classmethod
    def build(
        cls, scene: Scene, grid: ThermalGrid, materials: MaterialTable
    ) -> "ThermalModel":
        """Material lookup at cell centers plus face conductances.

        Internal faces use the harmonic mean of the neighbour
        conductivities; boundary faces put the film coefficient h in
        series with the half-cell conduction resistance.
        """
        centers = grid.centers
        index = np.zeros(grid.shape, dtype=np.int32)
        for block in scene.blocks:
            mx, my, mz = block.box.axis_masks(centers)
            inside = mx[:, None, None] & my[None, :, None] & mz[None, None, :]
            index[inside] = materials.index(block.material)
        k = materials.property_array("conductivity_thermal")[index]
        rho_cp = (
            materials.property_array("density")
            * materials.property_array("heat_capacity")
        )[index]
        volumes = grid.volumes
        widths = [
            d.reshape([-1 if a == axis else 1 for a in range(3)])
            for axis, d in enumerate(grid.spacing)
        ]
        areas = [volumes / w for w in widths]

        conductance = []
        for axis in range(3):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            width = np.broadcast_to(widths[axis], volumes.shape)
            resistance = (
                width[lo] / (2 * k[lo]) + width[hi] / (2 * k[hi])
            )
            conductance.append(areas[axis][lo] / resistance)

        boundary = {}
        for face, h in scene.face_coefficients().items():
            axis = _FACE_AXES[face[0]]
            end = 0 if face[1] == "-" else -1
            sl = [slice(None)] * 3
            sl[axis] = slice(end, None) if end == -1 else slice(0, 1)
            sl = tuple(sl)
            width = np.broadcast_to(widths[axis], volumes.shape)[sl]
            half = width / (2 * k[sl])
            if math.isinf(h):
                g = areas[axis][sl] / half
            elif h <= 0:
                g = np.zeros_like(half)
            else:
                g = areas[axis][sl] / (1.0 / h + half)
            boundary[face] = (sl, g)

        return cls(
            grid=grid,
            materials=materials,
            material_index=index,
            capacity=rho_cp * volumes,
            conductance=tuple(conductance),
            boundary=boundary,
            ambient_T=scene.ambient_T,
        )

    def initial_state(self, temperature: float | None = None):
        """Uniform temperature (ambient by default), uncured, unstressed."""
        t0 = self.ambient_T if temperature is None else temperature
        shape = self.grid.shape
        return ThermalState(
            temperature=np.full(shape, float(t0)),
            alpha=np.zeros(shape),
            sigma_ind=np.zeros(shape),
            material_index=self.material_index,
            pending_exotherm=np.zeros(shape),
        )

    def stable_dt(self) -> float:
        """Largest explicit step keeping every update coefficient >= 0."""
        total = np.zeros(self.grid.shape)
        for axis, g in enumerate(self.conductance):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(None, -1)
            hi[axis] = slice(1, None)
            total[tuple(lo)] += g
            total[tuple(hi)] += g
        for sl, g in self.boundary.values():
            total[sl] += g
        with np.errstate(divide="ignore"):
            bound = np.where(total > 0, self.capacity / total, np.inf)
        return float(bound.min())

    @property
    def curing(self) -> np.ndarray:
        """Mask of cells whose material carries cure kinetics."""
        has_cure = np.array(
            [mat.cure is not None for mat in self.materials.materials.values()]
        )
        return has_cure[self.material_index]


def step_heat(
    model: ThermalModel,
    state: ThermalState,
    q_source: np.ndarray,
    dt: float,
) -> ThermalState:
    """One explicit step of rho cp dT/dt = div(k grad T) + q + exotherm."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    bound = model.stable_dt()
    if dt > bound * (1 + 1e-12):
        raise UnstableTimestep(
            f"dt {dt:.4g} s exceeds the explicit bound {bound:.4g} s"
        )
    t = state.temperature
    q = np.broadcast_to(np.asarray(q_source, dtype=float), t.shape)
    volumes = model.grid.volumes
    flow = np.zeros_like(t)
    for axis, g in enumerate(model.conductance):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        f = g * (t[hi] - t[lo])
        flow[lo] += f
        flow[hi] -= f
    loss = 0.0
    for sl, g in model.boundary.values():
        f = g * (model.ambient_T - t[sl])
        flow[sl] += f
        loss -= float(np.sum(f)) * dt

    pending = state.pending_exotherm
    if pending is None:
        pending = np.zeros_like(t)
    exo = pending * volumes
    gain = (flow + q * volumes) * dt + exo
    ledger = EnergyLedger(
        source=state.ledger.source + float(np.sum(q * volumes)) * dt,
        exotherm=state.ledger.exotherm + float(np.sum(exo)),
        boundary_loss=state.ledger.boundary_loss + loss,
    )
    return replace(
        state,
        temperature=t + gain / model.capacity,
        time=state.time + dt,
        pending_exotherm=np.zeros_like(t),
        ledger=ledger,
    )


def cure_substeps(kinetics, temperature, alpha, dt: float,
                  max_dalpha: float = MAX_DALPHA_PER_SUBSTEP):
    """Yield (h, alpha) after each accepted RK4 sub-step covering dt.

    No cell gains more than max_dalpha in one sub-step: the size comes
    from the current peak rate and is halved while the RK4 increment
    still overshoots.
    """
    a = np.asarray(alpha, dtype=float)
    remaining = dt
    while remaining > 0:
        rate = float(np.max(kinetics.rate(temperature, a), initial=0.0))
        if rate <= 0.0:
            return
        h = min(remaining, max_dalpha / rate)
        while True:
            k1 = kinetics.rate(temperature, a)
            k2 = kinetics.rate(temperature, a + 0.5 * h * k1)
            k3 = kinetics.rate(temperature, a + 0.5 * h * k2)
            k4 = kinetics.rate(temperature, a + h * k3)
            trial = np.clip(
                a + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6, 0.0, 1.0
            )
            if np.max(trial - a) <= max_dalpha * (1.0 + 1e-9):
                break
            h *= 0.5
        a = trial
        remaining -= h
        yield h, a


def step_cure(
    model: ThermalModel,
    state: ThermalState,
    dt: float,
    max_dalpha: float = MAX_DALPHA_PER_SUBSTEP,
) -> ThermalState:
    """Integrate dalpha/dt over dt at frozen temperature (RK4).

    Sub-steps come from cure_substeps. The released heat rho dh dalpha
    is queued for the next step_heat.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    alpha = state.alpha.copy()
    pending = (
        np.zeros_like(alpha)
        if state.pending_exotherm is None
        else state.pending_exotherm.copy()
    )
    substeps = 0
    for idx in np.unique(model.material_index):
        mat = model.materials[int(idx)]
        if mat.cure is None:
            continue
        sel = model.material_index == idx
        a = a_start = alpha[sel]
        for _, a in cure_substeps(
            mat.cure, state.temperature[sel], a_start, dt, max_dalpha
        ):
            substeps += 1
        alpha[sel] = a
        pending[sel] += mat.density * mat.cure.dh * (a - a_start)
    _LOGGER.debug("Cure step %.4g s in %d sub-steps", dt, substeps)
    return replace(state, alpha=alpha, pending_exotherm=pending)


def stress_indicator(
    state: ThermalState, materials: MaterialTable, cte_ref: float
) -> np.ndarray:
    """Scalar thermoelastic mismatch stress (Pa) per cell.

    sigma = E / (1 - nu) * [(cte - cte_ref)(T - T_ref)
                            + shrink * max(0, alpha - alpha_gel)]
    """
    out = np.zeros_like(state.temperature)
    for idx in np.unique(state.material_index):
        mat = materials[int(idx)]
        sel = state.material_index == idx
        strain = (mat.cte - cte_ref) * (state.temperature[sel] - T_REF)
        if mat.cure is not None:
            strain = strain + mat.cure.shrink * np.maximum(
                0.0, state.alpha[sel] - mat.cure.alpha_gel
            )
        out[sel] = mat.modulus / (1.0 - mat.poisson) * strain
    return out


def sensor_average(
    model: ThermalModel,
    state: ThermalState,
    face: str = "top",
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> float:
    """Area-weighted mean temperature of the top (z+) or bottom layer."""
    layer = -1 if face == "top" else 0
    dx, dy, _ = model.grid.spacing
    area = dx[:, None] * dy[None, :]
    temps = state.temperature[:, :, layer]
    value = float(np.sum(area * temps) / np.sum(area))
    if noise_std > 0:
        rng = rng if rng is not None else np.random.default_rng()
        value += float(rng.normal(0.0, noise_std))
    return value


def advance(
    model: ThermalModel,
    state: ThermalState,
    q_source: np.ndarray,
    dt_total: float,
    cte_ref: float,
    safety: float = 0.9,
) -> ThermalState:
    """Cure + heat over dt_total with stable explicit sub-steps."""
    n_sub = max(1, int(math.ceil(dt_total / (safety * model.stable_dt()))))
    dt = dt_total / n_sub
    for _ in range(n_sub):
        state = step_cure(model, state, dt)
        state = step_heat(model, state, q_source, dt)
    state.sigma_ind = stress_indicator(state, model.materials, cte_ref)
    return state
