"""EM / thermal / cure coupling loop and VFM averaging."""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .const import (
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_COURANT,
    DEFAULT_DT_COUPLE,
    DEFAULT_MAX_PERIODS,
    DEFAULT_RESOLVE_THRESHOLD,
    DEFAULT_SNAPSHOT_INTERVAL,
    DEFAULT_U_MAX,
)
from .control import (
    ControllerState,
    PowerSchedule,
    Profile,
    identify_first_order,
    pid_step,
    profile_eval,
    tune_pi,
)
from .emsolve import Medium, PowerMap, run_harmonic_steady
from .errors import GridMismatch
from .materials import MaterialTable
from .scene import Box, Scene, YeeGridSpec, voxelize
from .solve_executor import SolveExecutor, SolveJob
from .thermocure import (
    ThermalModel,
    ThermalState,
    advance,
    sensor_average,
)
from .xmap import ThermalGrid, build_mapping, map_dielectric, map_power

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Drive:
    """Drive frequencies (Hz) and their VFM weights."""

    frequencies: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        """Weights are non-negative and sum to one."""
        if not self.frequencies:
            raise ValueError("drive needs at least one frequency")
        if len(self.weights) != len(self.frequencies):
            raise ValueError("one weight per drive frequency")
        if any(w < 0 for w in self.weights):
            raise ValueError("VFM weights must be >= 0")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("VFM weights must sum to 1")

    @classmethod
    def sfm(cls, freq: float) -> "Drive":
        """Single-frequency drive."""
        return cls((float(freq),), (1.0,))

    @classmethod
    def vfm(cls, freqs, weights=None) -> "Drive":
        """Frequency list, equal weights unless given."""
        freqs = tuple(float(f) for f in freqs)
        if weights is None:
            weights = tuple(1.0 / len(freqs) for _ in freqs)
        return cls(freqs, tuple(float(w) for w in weights))

    @property
    def is_vfm(self) -> bool:
        """More than one frequency."""
        return len(self.frequencies) > 1


@dataclass(frozen=True)
class CouplingPolicy:
    """Macro-step length, lazy re-solve threshold and drive."""

    drive: Drive
    dt_couple: float = DEFAULT_DT_COUPLE
    resolve_threshold: float = DEFAULT_RESOLVE_THRESHOLD
    snapshot_interval: float = DEFAULT_SNAPSHOT_INTERVAL

    def __post_init__(self) -> None:
        """dt_couple > 0 and 0 <= threshold < 1."""
        if self.dt_couple <= 0:
            raise ValueError("dt_couple must be > 0")
        if not 0 <= self.resolve_threshold < 1:
            raise ValueError("resolve_threshold must lie in [0, 1)")


def uniformity(q: np.ndarray, mask: np.ndarray | None = None) -> float:
    """std / mean of q over the masked cells."""
    values = q[mask] if mask is not None else q.ravel()
    mean = float(np.mean(values))
    if mean == 0:
        return 0.0
    return float(np.std(values) / mean)


def vfm_average(maps: list[PowerMap], weights, load_mask=None):
    """Weighted per-voxel mean of per-watt maps, renormalized to 1 W.

    Returns (map, uniformity over the load cells).
    """
    if not maps:
        raise ValueError("no power maps to average")
    if len(weights) != len(maps):
        raise ValueError("one weight per map")
    first = maps[0]
    for other in maps[1:]:
        if (
            other.q.shape != first.q.shape
            or not math.isclose(other.cell_volume, first.cell_volume)
        ):
            raise GridMismatch("power maps live on different grids")
    q = np.zeros_like(first.q)
    for w, pm in zip(weights, maps):
        q = q + w * pm.q
    averaged = PowerMap(
        q=q,
        cell_volume=first.cell_volume,
        freq=float(np.dot(weights, [pm.freq for pm in maps])),
    ).per_watt()
    return averaged, uniformity(averaged.q, load_mask)


@dataclass
class RunRecord:
    """One macro-step row of the run summary."""

    t: float
    target: float | None
    measured: float
    power: float
    t_min: float
    t_max: float
    alpha_mean: float
    sigma_max: float


@dataclass
class RunResult:
    """Time series, final state and solve statistics of a coupled run."""

    records: list[RunRecord]
    state: ThermalState
    em_solves: int
    uniformity: float | None = None
    controller: ControllerState | None = None
    power_maps: list = field(default_factory=list)

    def power_trace(self) -> PowerSchedule:
        """Zero-order-hold schedule replaying the commanded powers."""
        return PowerSchedule(
            tuple((r.t, r.power) for r in self.records[:-1]), hold=True
        )


def default_power_solver(
    scene: Scene,
    grid: YeeGridSpec,
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
    max_periods: int = DEFAULT_MAX_PERIODS,
    courant: float = DEFAULT_COURANT,
):
    """(medium, freq) -> per-watt PowerMap via the FDTD kernel."""

    def solve(medium, freq):
        return run_harmonic_steady(
            scene, grid, medium, freq,
            convergence_tol=convergence_tol, max_periods=max_periods,
            courant=courant,
        )

    return solve


class CoupledRun:
    """Quasi-static EM / thermal / cure coupling on one scene."""

    def __init__(
        self,
        scene: Scene,
        materials: MaterialTable,
        grid: YeeGridSpec,
        thermal_shape,
        policy: CouplingPolicy,
        power_solver=None,
        executor: SolveExecutor | None = None,
        noise_std: float = 0.0,
        seed: int = 0,
        snapshot_callback=None,
    ) -> None:
        """Voxelize, build the load mesh and the cross mapping."""
        self.scene = scene
        self.materials = materials
        self.grid = grid
        self.policy = policy
        self.voxels = voxelize(scene, grid, materials)
        self.mapping_slices = self.voxels.load_slices
        load_box = _slices_box(grid, self.mapping_slices)
        if thermal_shape is None:
            thermal_shape = tuple(
                s.stop - s.start for s in self.mapping_slices
            )
        self.thermal_grid = ThermalGrid.uniform(load_box, thermal_shape)
        self.model = ThermalModel.build(scene, self.thermal_grid, materials)
        self.mapping = build_mapping(
            grid, self.thermal_grid, self.voxels.load_mask
        )
        solver = power_solver or default_power_solver(scene, grid)
        self.executor = executor or SolveExecutor(solver)
        self.noise_std = noise_std
        self.rng = np.random.default_rng(seed)
        self.snapshot_callback = snapshot_callback
        self.em_solves = 0
        self.last_uniformity = None
        self.last_maps: list[PowerMap] = []

    def _dielectric(self, state: ThermalState):
        return [
            map_dielectric(self.mapping, state, self.materials, freq)
            for freq in self.policy.drive.frequencies
        ]

    def _media(self, state: ThermalState):
        media = []
        pushed = self._dielectric(state)
        for freq, (eps, sigma) in zip(self.policy.drive.frequencies, pushed):
            base = Medium.from_voxels(
                self.voxels, freq, self.scene.ambient_T
            )
            media.append(base.with_region(self.mapping_slices, eps, sigma))
        return media, pushed

    def solve_power(self, state: ThermalState):
        """Per-watt source on the load mesh for the current properties."""
        media, pushed = self._media(state)
        jobs = [
            SolveJob(freq=f, medium=m)
            for f, m in zip(self.policy.drive.frequencies, media)
        ]
        maps = self.executor.solve_all(jobs)
        self.em_solves += len(jobs)
        self.last_maps = maps
        if self.policy.drive.is_vfm:
            averaged, self.last_uniformity = vfm_average(
                maps, self.policy.drive.weights, self.voxels.load_mask
            )
            _LOGGER.info(
                "VFM over %d frequencies, load uniformity %.4g",
                len(maps), self.last_uniformity,
            )
        else:
            averaged = maps[0]
            self.last_uniformity = uniformity(
                averaged.q, self.voxels.load_mask
            )
        return map_power(self.mapping, averaged.q), pushed

    def _needs_resolve(self, state: ThermalState, reference) -> bool:
        pushed = self._dielectric(state)
        threshold = self.policy.resolve_threshold
        for (eps, sigma), (eps0, sigma0) in zip(pushed, reference):
            rel_eps = np.max(np.abs(eps - eps0) / eps0)
            with np.errstate(divide="ignore", invalid="ignore"):
                rel_sigma = np.where(
                    sigma0 > 0, np.abs(sigma - sigma0) / sigma0,
                    np.where(sigma > 0, np.inf, 0.0),
                )
            change = max(float(rel_eps), float(np.max(rel_sigma)))
            if change > threshold:
                _LOGGER.info(
                    "Dielectric drift %.4g > %.4g, re-solving EM",
                    change, threshold,
                )
                return True
        return False

    def sense(self, state: ThermalState, noisy: bool = True) -> float:
        """Sensor reading of the top surface."""
        return sensor_average(
            self.model, state,
            noise_std=self.noise_std if noisy else 0.0, rng=self.rng,
        )

    def tune(self, state: ThermalState, q_per_watt, u_max: float,
             duration: float) -> tuple[float, float]:
        """Open-loop step test on the plant, then SIMC PI gains."""
        test_power = 0.5 * u_max
        dt = self.policy.dt_couple
        times, rise = [0.0], [0.0]
        start = self.sense(state, noisy=False)
        trial = state
        for i in range(1, int(math.ceil(duration / dt)) + 1):
            trial = advance(
                self.model, trial, test_power * q_per_watt, dt,
                self.scene.substrate_cte,
            )
            times.append(i * dt)
            rise.append(self.sense(trial, noisy=False) - start)
        gain, tau = identify_first_order(times, rise, test_power)
        return tune_pi(gain, tau)

    def run(
        self,
        t_end: float,
        profile: Profile | None = None,
        schedule: PowerSchedule | None = None,
        controller: ControllerState | None = None,
        tune_duration: float | None = None,
        u_max: float = DEFAULT_U_MAX,
    ) -> RunResult:
        """Advance the coupled system to t_end.

        Closed loop when a profile is given, open loop on the power
        schedule otherwise. A closed-loop run without a controller is
        tuned first from an open-loop step test of tune_duration seconds.
        """
        if (profile is None) == (schedule is None):
            raise ValueError("give exactly one of profile or schedule")
        policy = self.policy
        dt = policy.dt_couple
        n_steps = int(round(t_end / dt))
        snap_every = max(int(round(policy.snapshot_interval / dt)), 1)
        state = self.model.initial_state()
        q_per_watt, reference = self.solve_power(state)
        if profile is not None and controller is None:
            duration = tune_duration or max(profile.duration, 10 * dt)
            kp, ki = self.tune(state, q_per_watt, u_max, duration)
            controller = ControllerState(kp=kp, ki=ki, u_max=u_max)
            _LOGGER.info("Auto-tuned PI: kp %.4g W/K, ki %.4g W/(K s)",
                         kp, ki)
        records = []

        for i in range(n_steps):
            t = i * dt
            if self.snapshot_callback and i % snap_every == 0:
                self.snapshot_callback(t, state)
            measured = self.sense(state)
            target = None
            if profile is not None:
                target = profile_eval(profile, t)
                power, controller = pid_step(controller, target, measured,
                                             dt)
            else:
                power = schedule(t)
            records.append(self._record(t, target, measured, power, state))
            state = advance(
                self.model, state, power * q_per_watt, dt,
                self.scene.substrate_cte,
            )
            if self._needs_resolve(state, reference):
                q_per_watt, reference = self.solve_power(state)

        t = n_steps * dt
        if self.snapshot_callback and n_steps % snap_every == 0:
            self.snapshot_callback(t, state)
        target = profile_eval(profile, t) if profile is not None else None
        last_power = records[-1].power if records else 0.0
        records.append(
            self._record(t, target, self.sense(state), last_power, state)
        )
        _LOGGER.info(
            "Coupled run to %.4g s: %d macro-steps, %d EM solves",
            t, n_steps, self.em_solves,
        )
        return RunResult(
            records=records,
            state=state,
            em_solves=self.em_solves,
            uniformity=self.last_uniformity,
            controller=controller,
            power_maps=self.last_maps,
        )

    def _record(self, t, target, measured, power, state) -> RunRecord:
        curing = self.model.curing
        alpha_mean = (
            float(np.mean(state.alpha[curing])) if curing.any() else 0.0
        )
        return RunRecord(
            t=t,
            target=target,
            measured=measured,
            power=float(power),
            t_min=float(state.temperature.min()),
            t_max=float(state.temperature.max()),
            alpha_mean=alpha_mean,
            sigma_max=float(np.max(np.abs(state.sigma_ind))),
        )


def _slices_box(grid: YeeGridSpec, slices) -> Box:
    bounds = []
    for axis, sl in enumerate(slices):
        nodes = grid.edges(axis)
        bounds.extend((float(nodes[sl.start]), float(nodes[sl.stop])))
    return Box(*bounds)


def run_coupled(
    scene: Scene,
    materials: MaterialTable,
    grid: YeeGridSpec,
    policy: CouplingPolicy,
    t_end: float,
    profile: Profile | None = None,
    schedule: PowerSchedule | None = None,
    controller: ControllerState | None = None,
    thermal_shape=None,
    **kwargs,
) -> RunResult:
    """One-call coupled run; see CoupledRun for the loop."""
    run = CoupledRun(
        scene, materials, grid, thermal_shape, policy, **kwargs
    )
    return run.run(
        t_end, profile=profile, schedule=schedule, controller=controller
    )


def fixed_power(power: float) -> PowerSchedule:
    """Open-loop schedule holding one power level."""
    return PowerSchedule.constant(power)


__all__ = [
    "CoupledRun",
    "CouplingPolicy",
    "Drive",
    "RunRecord",
    "RunResult",
    "default_power_solver",
    "fixed_power",
    "run_coupled",
    "uniformity",
    "vfm_average",
]
