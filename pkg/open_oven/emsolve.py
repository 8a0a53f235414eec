"""Yee-scheme FDTD kernel for the oven cavity.

Layout on an nx x ny x nz cell grid (node (i, j, k) at (i dx, j dy, k dz)):

    Ex (nx, ny+1, nz+1)   Hx (nx+1, ny, nz)
    Ey (nx+1, ny, nz+1)   Hy (nx, ny+1, nz)
    Ez (nx+1, ny+1, nz)   Hz (nx, ny, nz+1)

All side walls and the z = 0 end wall are PEC: tangential E on them is
never updated and stays zero. The z = L face is either PEC (closed box)
or open. On an open face Ex and Ey are updated with the magnetic field
above the grid taken from the free-space impedance, H_t = n x E_t / eta0.
That first-order radiation condition enters the update as a sheet
conductance 1 / (eta0 dz) on the face edges, so the discrete energy can
only decrease through it.
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.signal import find_peaks as _scipy_find_peaks

from .const import (
    BLOWUP_LIMIT,
    C0,
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_COURANT,
    DEFAULT_MAX_PERIODS,
    EPS0,
    ETA0,
    MAX_COURANT,
    MU0,
    RAMP_PERIODS,
    T_REF,
    WINDOW_PERIODS,
)
from .errors import NoConvergence, NumericalBlowup, PeakOverlap
from .materials import conductivity_from_em, effective_em
from .scene import Scene, Voxels, YeeGridSpec, edge_average

_LOGGER = logging.getLogger(__name__)


@dataclass
class Medium:
    """Per-cell relative permittivity and conductivity (S/m)."""

    eps_r: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_voxels(
        cls, voxels: Voxels, freq: float, temperature=T_REF
    ) -> "Medium":
        """Evaluate every material at freq and a uniform temperature."""
        eps_mat, sigma_mat = [], []
        for name in voxels.materials.names:
            eps, tan = effective_em(voxels.materials[name], temperature, 0.0)
            eps_mat.append(eps)
            sigma_mat.append(conductivity_from_em(eps, tan, freq))
        index = voxels.material_index
        return cls(
            eps_r=np.asarray(eps_mat, dtype=float)[index],
            sigma=np.asarray(sigma_mat, dtype=float)[index],
        )

    def with_region(self, slices, eps_r, sigma) -> "Medium":
        """Copy with a box of cells replaced."""
        eps_new = self.eps_r.copy()
        sigma_new = self.sigma.copy()
        eps_new[slices] = eps_r
        sigma_new[slices] = sigma
        return Medium(eps_r=eps_new, sigma=sigma_new)


@dataclass
class ProbeSource:
    """Impressed current on a stack of Ez edges rising from z = 0.

    Adding J to the E update is the soft-source form; the field keeps
    evolving freely at the probe edges.
    """

    i: int
    j: int
    k_stop: int

    @classmethod
    def from_scene(cls, scene: Scene, grid: YeeGridSpec) -> "ProbeSource":
        """Snap the probe to the nearest interior node column."""
        i = int(round(scene.probe.x / grid.dx))
        j = int(round(scene.probe.y / grid.dy))
        i = min(max(i, 1), grid.nx - 1)
        j = min(max(j, 1), grid.ny - 1)
        k_stop = max(1, int(round(scene.probe.length / grid.dz)))
        return cls(i=i, j=j, k_stop=min(k_stop, grid.nz))

    @property
    def index(self):
        """Ez index of the probe edges."""
        return (self.i, self.j, slice(0, self.k_stop))


@dataclass
class FieldState:
    """Staggered fields, update coefficients and the clock."""

    grid: YeeGridSpec
    ex: np.ndarray
    ey: np.ndarray
    ez: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    ca: tuple
    cb: tuple
    eps_edges: tuple
    sigma_edges: tuple
    dt: float
    open_end: bool = True
    time: float = 0.0
    steps: int = 0


def stable_timestep(grid: YeeGridSpec, courant: float = DEFAULT_COURANT):
    """dt = S / (c sqrt(1/dx^2 + 1/dy^2 + 1/dz^2))."""
    if not 0 < courant <= MAX_COURANT:
        raise ValueError(f"Courant factor must lie in (0, {MAX_COURANT}]")
    inv = math.sqrt(
        1 / grid.dx**2 + 1 / grid.dy**2 + 1 / grid.dz**2
    )
    return courant / (C0 * inv)


def sheet_conductance(grid: YeeGridSpec) -> float:
    """Conductance (S/m) of the matched sheet on an open z = L face."""
    return 1.0 / (ETA0 * grid.dz)


def make_field_state(
    grid: YeeGridSpec,
    medium: Medium,
    courant: float = DEFAULT_COURANT,
    open_end: bool = True,
) -> FieldState:
    """Zero fields with semi-implicit lossy update coefficients."""
    dt = stable_timestep(grid, courant)
    nx, ny, nz = grid.shape
    eps_edges = tuple(
        EPS0 * e for e in edge_average(medium.eps_r)
    )
    sigma_edges = edge_average(medium.sigma)
    ca, cb = [], []
    for axis, (eps, sigma) in enumerate(zip(eps_edges, sigma_edges)):
        sigma = sigma.copy()
        if open_end and axis < 2:
            sigma[:, :, -1] += sheet_conductance(grid)
        loss = sigma * dt / (2.0 * eps)
        ca.append((1.0 - loss) / (1.0 + loss))
        cb.append(dt / eps / (1.0 + loss))
    return FieldState(
        grid=grid,
        ex=np.zeros((nx, ny + 1, nz + 1)),
        ey=np.zeros((nx + 1, ny, nz + 1)),
        ez=np.zeros((nx + 1, ny + 1, nz)),
        hx=np.zeros((nx + 1, ny, nz)),
        hy=np.zeros((nx, ny + 1, nz)),
        hz=np.zeros((nx, ny, nz + 1)),
        ca=tuple(ca),
        cb=tuple(cb),
        eps_edges=eps_edges,
        sigma_edges=sigma_edges,
        dt=dt,
        open_end=open_end,
    )


def _h_increments(state: FieldState):
    g = state.grid
    k = state.dt / MU0
    ex, ey, ez = state.ex, state.ey, state.ez
    dhx = -k * (
        (ez[:, 1:, :] - ez[:, :-1, :]) / g.dy
        - (ey[:, :, 1:] - ey[:, :, :-1]) / g.dz
    )
    dhy = -k * (
        (ex[:, :, 1:] - ex[:, :, :-1]) / g.dz
        - (ez[1:, :, :] - ez[:-1, :, :]) / g.dx
    )
    dhz = -k * (
        (ey[1:, :, :] - ey[:-1, :, :]) / g.dx
        - (ex[:, 1:, :] - ex[:, :-1, :]) / g.dy
    )
    return dhx, dhy, dhz


def step(
    state: FieldState,
    source: ProbeSource | None = None,
    current: float = 0.0,
) -> FieldState:
    """Advance one leapfrog step: H to n+1/2, then E to n+1.

    current is the impressed current density (A/m^2) on the probe edges
    at t = (n + 1/2) dt.
    """
    g = state.grid
    dhx, dhy, dhz = _h_increments(state)
    state.hx += dhx
    state.hy += dhy
    state.hz += dhz

    ex, ey, ez = state.ex, state.ey, state.ez
    hx, hy, hz = state.hx, state.hy, state.hz
    (cax, cay, caz), (cbx, cby, cbz) = state.ca, state.cb

    if state.open_end:
        top = (slice(None), slice(1, -1), -1)
        ex[top] = cax[top] * ex[top] + cbx[top] * (
            (hz[:, 1:, -1] - hz[:, :-1, -1]) / g.dy
            + hy[:, 1:-1, -1] / g.dz
        )
        top = (slice(1, -1), slice(None), -1)
        ey[top] = cay[top] * ey[top] + cby[top] * (
            -hx[1:-1, :, -1] / g.dz
            - (hz[1:, :, -1] - hz[:-1, :, -1]) / g.dx
        )

    inner = (slice(None), slice(1, -1), slice(1, -1))
    ex[inner] = cax[inner] * ex[inner] + cbx[inner] * (
        (hz[:, 1:, 1:-1] - hz[:, :-1, 1:-1]) / g.dy
        - (hy[:, 1:-1, 1:] - hy[:, 1:-1, :-1]) / g.dz
    )
    inner = (slice(1, -1), slice(None), slice(1, -1))
    ey[inner] = cay[inner] * ey[inner] + cby[inner] * (
        (hx[1:-1, :, 1:] - hx[1:-1, :, :-1]) / g.dz
        - (hz[1:, :, 1:-1] - hz[:-1, :, 1:-1]) / g.dx
    )
    inner = (slice(1, -1), slice(1, -1), slice(None))
    ez[inner] = caz[inner] * ez[inner] + cbz[inner] * (
        (hy[1:, 1:-1, :] - hy[:-1, 1:-1, :]) / g.dx
        - (hx[1:-1, 1:, :] - hx[1:-1, :-1, :]) / g.dy
    )
    if source is not None and current != 0.0:
        ez[source.index] -= cbz[source.index] * current

    state.steps += 1
    state.time = state.steps * state.dt
    peak = max(
        np.abs(ex).max(initial=0.0),
        np.abs(ey).max(initial=0.0),
        np.abs(ez).max(initial=0.0),
    )
    if not peak <= BLOWUP_LIMIT:
        raise NumericalBlowup(
            f"field magnitude {peak:.3g} after {state.steps} steps"
        )
    return state


def electromagnetic_energy(state: FieldState) -> float:
    """Discrete energy 1/2 eps E^n.E^n + 1/2 mu H^(n-1/2).H^(n+1/2) (J).

    This is the quantity the lossless leapfrog conserves exactly with PEC
    walls, and which decays monotonically when sigma > 0.
    """
    vol = state.grid.cell_volume
    e_part = sum(
        float(np.sum(eps * e * e))
        for eps, e in zip(state.eps_edges, (state.ex, state.ey, state.ez))
    )
    h_part = sum(
        float(np.sum(h * (h + dh)))
        for h, dh in zip(
            (state.hx, state.hy, state.hz), _h_increments(state)
        )
    )
    return 0.5 * vol * (e_part + MU0 * h_part)


def _edges_to_cells(px, py, pz):
    """Split per-edge densities among the cells sharing each edge."""
    counts = [
        _edge_counts(axes, like.shape)
        for axes, like in (((1, 2), px), ((0, 2), py), ((0, 1), pz))
    ]
    wx, wy, wz = px / counts[0], py / counts[1], pz / counts[2]
    cells = (
        wx[:, :-1, :-1] + wx[:, 1:, :-1] + wx[:, :-1, 1:] + wx[:, 1:, 1:]
    )
    cells = cells + (
        wy[:-1, :, :-1] + wy[1:, :, :-1] + wy[:-1, :, 1:] + wy[1:, :, 1:]
    )
    cells = cells + (
        wz[:-1, :-1, :] + wz[1:, :-1, :] + wz[:-1, 1:, :] + wz[1:, 1:, :]
    )
    return cells


def _edge_counts(axes, edge_shape):
    counts = np.full(edge_shape, 4.0)
    for axis in axes:
        sl = [slice(None)] * 3
        sl[axis] = 0
        counts[tuple(sl)] /= 2.0
        sl[axis] = -1
        counts[tuple(sl)] /= 2.0
    return counts


def _cell_field_squared(sx, sy, sz):
    """Cell-centered |E|^2 from per-edge squared components."""
    ax = (sx[:, :-1, :-1] + sx[:, 1:, :-1] + sx[:, :-1, 1:] + sx[:, 1:, 1:])
    ay = (sy[:-1, :, :-1] + sy[1:, :, :-1] + sy[:-1, :, 1:] + sy[1:, :, 1:])
    az = (sz[:-1, :-1, :] + sz[1:, :-1, :] + sz[:-1, 1:, :] + sz[1:, 1:, :])
    return (ax + ay + az) / 4.0


@dataclass
class EnergyLedger:
    """Time-averaged power flows of a CW run (un-normalized, W)."""

    source: float = 0.0
    dissipated: float = 0.0
    radiated: float = 0.0

    @property
    def imbalance(self) -> float:
        """|source - dissipated - radiated| / source."""
        if self.source == 0:
            return 0.0
        return abs(self.source - self.dissipated - self.radiated) / abs(
            self.source
        )


@dataclass
class PowerMap:
    """Per-voxel time-averaged dissipated power density (W/m^3)."""

    q: np.ndarray
    cell_volume: float
    freq: float
    normalized: bool = False
    e_squared: np.ndarray | None = None
    ledger: EnergyLedger = field(default_factory=EnergyLedger)

    @property
    def p_total(self) -> float:
        """Integrated absorbed power (W)."""
        return float(np.sum(self.q) * self.cell_volume)

    def scaled(self, factor: float) -> "PowerMap":
        """Copy with q multiplied by factor."""
        return PowerMap(
            q=self.q * factor,
            cell_volume=self.cell_volume,
            freq=self.freq,
            normalized=False,
            e_squared=self.e_squared,
            ledger=self.ledger,
        )

    def per_watt(self) -> "PowerMap":
        """Copy scaled so p_total is exactly 1 W."""
        total = float(np.sum(self.q))
        if total <= 0:
            return self
        q = self.q / (total * self.cell_volume)
        return PowerMap(
            q=q,
            cell_volume=self.cell_volume,
            freq=self.freq,
            normalized=True,
            e_squared=self.e_squared,
            ledger=self.ledger,
        )


def _raised_cosine(t: float, t_ramp: float) -> float:
    if t >= t_ramp:
        return 1.0
    return 0.5 * (1.0 - math.cos(math.pi * t / t_ramp))


def sheet_power(state: FieldState, e_mid: tuple) -> float:
    """Power (W) taken out by the open-face sheet for centered fields."""
    if not state.open_end:
        return 0.0
    g = state.grid
    ex, ey = e_mid[0][:, :, -1], e_mid[1][:, :, -1]
    return (
        sheet_conductance(g)
        * float(np.sum(ex * ex) + np.sum(ey * ey))
        * g.cell_volume
    )


def run_harmonic_steady(
    scene: Scene,
    grid: YeeGridSpec,
    medium: Medium,
    f_drive: float,
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
    max_periods: int = DEFAULT_MAX_PERIODS,
    amplitude: float = 1.0,
    courant: float = DEFAULT_COURANT,
) -> PowerMap:
    """Drive the probe at f_drive until the dissipation is stationary.

    The drive ramps up with a raised cosine over RAMP_PERIODS periods.
    sigma E^2, with E centered between time levels as the lossy update
    uses it, is averaged over windows of WINDOW_PERIODS whole periods;
    the run stops once the windowed total changes by less than
    convergence_tol between consecutive windows. The returned map is
    normalized to 1 W absorbed.
    """
    if f_drive <= 0:
        raise ValueError("f_drive must be > 0")
    if not np.any(medium.sigma > 0):
        _LOGGER.warning(
            "Scene is lossless at %.6g Hz, dissipation is zero", f_drive
        )
        return PowerMap(
            q=np.zeros(grid.shape), cell_volume=grid.cell_volume,
            freq=f_drive,
        )

    state = make_field_state(grid, medium, courant, scene.open_end)
    source = ProbeSource.from_scene(scene, grid)
    dt = state.dt
    period = 1.0 / f_drive
    steps_per_period = period / dt
    if steps_per_period < 10:
        raise ValueError(
            f"{f_drive:.6g} Hz is under-resolved: {steps_per_period:.1f} "
            "steps per period"
        )
    window = max(int(round(WINDOW_PERIODS * steps_per_period)), 1)
    t_ramp = RAMP_PERIODS * period
    max_steps = int(math.ceil(max_periods * steps_per_period))
    omega = 2.0 * math.pi * f_drive
    edge_vol = grid.cell_volume
    sigma_edges = state.sigma_edges

    previous = None
    windows_done = 0
    while state.steps < max_steps:
        acc = [np.zeros_like(state.ex), np.zeros_like(state.ey),
               np.zeros_like(state.ez)]
        p_source = 0.0
        p_face = 0.0
        for _ in range(window):
            t_half = (state.steps + 0.5) * dt
            current = (
                amplitude * _raised_cosine(t_half, t_ramp)
                * math.sin(omega * t_half)
            )
            before = (state.ex.copy(), state.ey.copy(), state.ez.copy())
            step(state, source, current)
            e_mid = tuple(
                0.5 * (old + new)
                for old, new in zip(before, (state.ex, state.ey, state.ez))
            )
            p_source -= (
                current * float(np.sum(e_mid[2][source.index])) * edge_vol
            )
            for a, e in zip(acc, e_mid):
                a += e * e
            p_face += sheet_power(state, e_mid)
        windows_done += 1
        e2 = [a / window for a in acc]
        dissipation = _edges_to_cells(
            sigma_edges[0] * e2[0],
            sigma_edges[1] * e2[1],
            sigma_edges[2] * e2[2],
        )
        p_window = float(np.sum(dissipation)) * grid.cell_volume
        _LOGGER.debug(
            "window %d at %.4g ns: p_total %.6g W",
            windows_done, state.time * 1e9, p_window,
        )
        ramped = state.time >= t_ramp
        if ramped and previous is not None and previous > 0:
            change = abs(p_window - previous) / previous
            if change < convergence_tol:
                ledger = EnergyLedger(
                    source=p_source / window,
                    dissipated=p_window,
                    radiated=p_face / window,
                )
                _LOGGER.info(
                    "CW %.6g Hz converged after %.0f periods "
                    "(source %.4g W, dissipated %.4g W, radiated %.4g W)",
                    f_drive, state.time / period, ledger.source,
                    ledger.dissipated, ledger.radiated,
                )
                raw = PowerMap(
                    q=dissipation,
                    cell_volume=grid.cell_volume,
                    freq=f_drive,
                    e_squared=_cell_field_squared(*e2),
                    ledger=ledger,
                )
                return raw.per_watt()
        if ramped:
            previous = p_window
    raise NoConvergence(
        f"no stationary dissipation at {f_drive:.6g} Hz after "
        f"{max_periods} periods"
    )


def monitor_points(scene: Scene, grid: YeeGridSpec):
    """Three interior Ez nodes away from the symmetry planes."""
    c = scene.cavity
    picks = (
        (c.a / 6, c.b / 6, 0.3 * c.l_d),
        (c.a / 2, c.b / 6, 0.55 * c.l_d),
        (5 * c.a / 6, c.b / 2, 0.8 * c.l_d),
    )
    points = []
    for x, y, z in picks:
        i = min(max(int(round(x / grid.dx)), 1), grid.nx - 1)
        j = min(max(int(round(y / grid.dy)), 1), grid.ny - 1)
        k = min(max(int(z / grid.dz), 0), grid.nz - 1)
        points.append((i, j, k))
    return points


def run_spectrum(
    scene: Scene,
    grid: YeeGridSpec,
    medium: Medium,
    f_center: float,
    f_span: float,
    n_steps: int,
    amplitude: float = 1.0,
    courant: float = DEFAULT_COURANT,
    resolution: float = 1e6,
) -> list[tuple[float, float]]:
    """Broadband pulse response, magnitude spectrum over the band.

    The probe carries a Gaussian-modulated sinusoid centered on f_center
    whose spectrum stays above 10 % across f_span. Ez is recorded at the
    monitor points; the post-pulse record is Hann windowed, zero padded
    to the requested resolution and transformed. Amplitudes are summed
    over monitors and scaled to a band maximum of 1.
    """
    if f_span <= 0 or f_center - f_span / 2 <= 0:
        raise ValueError("band must lie at positive frequencies")
    state = make_field_state(grid, medium, courant, scene.open_end)
    source = ProbeSource.from_scene(scene, grid)
    dt = state.dt
    if n_steps * dt < 20.0 / f_span:
        raise ValueError(
            f"{n_steps} steps cover {n_steps * dt:.3g} s, "
            f"need at least {20.0 / f_span:.3g} s"
        )
    tau = 2.0 * math.sqrt(math.log(10.0)) / (math.pi * f_span)
    t0 = 4.0 * tau
    pulse_end = int(math.ceil(2.0 * t0 / dt))
    omega = 2.0 * math.pi * f_center
    points = monitor_points(scene, grid)
    record = np.zeros((len(points), n_steps))
    for n in range(n_steps):
        t_half = (n + 0.5) * dt
        current = 0.0
        if n < pulse_end:
            arg = (t_half - t0) / tau
            current = amplitude * math.exp(-arg * arg) * math.sin(
                omega * (t_half - t0)
            )
        step(state, source, current)
        for p, (i, j, k) in enumerate(points):
            record[p, n] = state.ez[i, j, k]

    tail = record[:, min(pulse_end, n_steps - 2):]
    window = np.hanning(tail.shape[1])
    nfft = int(2 ** math.ceil(math.log2(max(1.0 / (resolution * dt),
                                                 tail.shape[1]))))
    freqs = np.fft.rfftfreq(nfft, dt)
    spectra = np.abs(np.fft.rfft(tail * window, n=nfft, axis=1)).sum(axis=0)
    band = (freqs >= f_center - f_span / 2) & (freqs <= f_center + f_span / 2)
    amps = spectra[band]
    peak = float(amps.max(initial=0.0))
    if peak > 0:
        amps = amps / peak
    _LOGGER.info(
        "Spectrum %.6g-%.6g Hz from %d steps, %d bins",
        f_center - f_span / 2, f_center + f_span / 2, n_steps, amps.size,
    )
    return [(float(f), float(a)) for f, a in zip(freqs[band], amps)]


def _parabolic(freqs, amps, i):
    if i <= 0 or i >= len(amps) - 1:
        return float(freqs[i]), float(amps[i])
    y0, y1, y2 = amps[i - 1], amps[i], amps[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(freqs[i]), float(y1)
    shift = 0.5 * (y0 - y2) / denom
    df = freqs[i + 1] - freqs[i]
    return float(freqs[i] + shift * df), float(y1 - 0.25 * (y0 - y2) * shift)


def find_peaks(spectrum, min_relative: float = 0.05):
    """Resonance peaks of a spectrum as (frequency, amplitude) pairs."""
    freqs = np.array([f for f, _ in spectrum])
    amps = np.array([a for _, a in spectrum])
    if amps.size < 3 or amps.max(initial=0.0) <= 0:
        return []
    idx, _ = _scipy_find_peaks(
        amps, height=min_relative * amps.max(),
        prominence=min_relative * amps.max(),
    )
    return [_parabolic(freqs, amps, i) for i in idx]


def estimate_q(spectrum, peak_freq: float) -> float:
    """Q = f_peak / half-power width of the peak nearest peak_freq."""
    freqs = np.array([f for f, _ in spectrum])
    amps = np.array([a for _, a in spectrum])
    i = int(np.argmin(np.abs(freqs - peak_freq)))
    while 0 < i < len(amps) - 1 and (
        amps[i - 1] > amps[i] or amps[i + 1] > amps[i]
    ):
        i = i - 1 if amps[i - 1] > amps[i + 1] else i + 1
    f_peak, a_peak = _parabolic(freqs, amps, i)
    half = a_peak / math.sqrt(2.0)

    def crossing(direction):
        j = i
        while True:
            nxt = j + direction
            if nxt < 0 or nxt >= len(amps):
                raise PeakOverlap(
                    f"half-power point of {f_peak:.6g} Hz lies outside "
                    "the spectrum"
                )
            if amps[nxt] < half:
                frac = (amps[j] - half) / (amps[j] - amps[nxt])
                return freqs[j] + frac * (freqs[nxt] - freqs[j])
            if amps[nxt] > amps[j]:
                raise PeakOverlap(
                    f"peak at {f_peak:.6g} Hz merges with a neighbour "
                    "above half power"
                )
            j = nxt

    width = crossing(+1) - crossing(-1)
    return f_peak / width


def fit_evanescent_decay(power: PowerMap, grid: YeeGridSpec, z0, z1):
    """Decay rate (1/m) of the transverse-max |E|^2 between z0 and z1.

    Returns the negative slope of log(max |E|^2) vs z, i.e. 2 alpha for
    a single evanescent mode.
    """
    if power.e_squared is None:
        raise ValueError("power map carries no |E|^2 field")
    z = grid.centers(2)
    sel = (z >= z0) & (z <= z1)
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than two cell layers")
    profile = power.e_squared[:, :, sel].max(axis=(0, 1))
    slope, _ = np.polyfit(z[sel], np.log(profile), 1)
    return float(-slope)
