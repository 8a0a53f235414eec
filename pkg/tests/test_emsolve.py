import math

import numpy as np
import pytest

from open_oven.const import C0
from open_oven.emsolve import (
    Medium,
    PowerMap,
    ProbeSource,
    _edges_to_cells,
    electromagnetic_energy,
    estimate_q,
    find_peaks,
    fit_evanescent_decay,
    make_field_state,
    run_harmonic_steady,
    run_spectrum,
    stable_timestep,
    step,
)
from open_oven.errors import NumericalBlowup, PeakOverlap
from open_oven.materials import BUNDLED_MATERIALS, Material, MaterialTable
from open_oven.modes import CavitySpec, evanescent_rate, solve_resonances
from open_oven.scene import (
    Block,
    Box,
    Probe,
    Scene,
    YeeGridSpec,
    auto_grid,
    reference_scene,
    voxelize,
)

from .conftest import SMALL_GRID, make_small_scene

CUBE = YeeGridSpec(dx=1e-3, dy=1e-3, dz=1e-3, nx=8, ny=8, nz=8)

# filler-loaded guide with a long air section above the filler
TALL = CavitySpec(a=10e-3, b=10e-3, l_d=9e-3, l_air=10e-3, eps_r=6.0)
TALL_GRID = YeeGridSpec(
    dx=0.5e-3, dy=0.5e-3, dz=0.5e-3, nx=20, ny=20, nz=38
)


def uniform_medium(grid, eps=1.0, sigma=0.0):
    return Medium(
        eps_r=np.full(grid.shape, eps), sigma=np.full(grid.shape, sigma)
    )


def excited_state(grid, medium, seed=1):
    state = make_field_state(grid, medium, open_end=False)
    rng = np.random.default_rng(seed)
    state.ez[1:-1, 1:-1, :] = rng.normal(size=state.ez[1:-1, 1:-1, :].shape)
    return state


def lorentzian(freqs, f0, q):
    return 1.0 / np.sqrt(1.0 + (2.0 * q * (freqs - f0) / f0) ** 2)


def tall_scene(*extra_blocks):
    filler = Block(Box(0.0, 10e-3, 0.0, 10e-3, 0.0, 9e-3), "filler")
    return Scene(
        cavity=TALL,
        blocks=[filler, *extra_blocks],
        sample_region=Box(3e-3, 7e-3, 3e-3, 7e-3, 9e-3, 9.5e-3),
        probe=Probe(5e-3, 5e-3, 2e-3),
    )


def tall_medium(scene, freq, table=None):
    table = table or MaterialTable(dict(BUNDLED_MATERIALS))
    return Medium.from_voxels(voxelize(scene, TALL_GRID, table), freq)


@pytest.fixture(scope="module")
def open_cw():
    """Converged CW solve of the small open scene at 10.4 GHz."""
    scene = make_small_scene()
    table = MaterialTable(dict(BUNDLED_MATERIALS))
    medium = Medium.from_voxels(voxelize(scene, SMALL_GRID, table), 10.4e9)
    pm = run_harmonic_steady(scene, SMALL_GRID, medium, 10.4e9)
    return scene, medium, pm


def test_stable_timestep_formula():
    dt = stable_timestep(CUBE, 0.95)
    assert dt == pytest.approx(0.95 / (C0 * math.sqrt(3.0) / 1e-3))
    with pytest.raises(ValueError):
        stable_timestep(CUBE, 1.2)


def test_field_shapes():
    state = make_field_state(CUBE, uniform_medium(CUBE))
    assert state.ex.shape == (8, 9, 9)
    assert state.ey.shape == (9, 8, 9)
    assert state.ez.shape == (9, 9, 8)
    assert state.hx.shape == (9, 8, 8)
    assert state.hy.shape == (8, 9, 8)
    assert state.hz.shape == (8, 8, 9)


def test_lossless_closed_box_conserves_energy():
    state = excited_state(CUBE, uniform_medium(CUBE))
    start = electromagnetic_energy(state)
    for _ in range(300):
        step(state)
    assert electromagnetic_energy(state) == pytest.approx(start, rel=1e-9)


def test_lossy_box_energy_never_grows():
    state = excited_state(CUBE, uniform_medium(CUBE, sigma=0.05))
    energies = [electromagnetic_energy(state)]
    for _ in range(200):
        step(state)
        energies.append(electromagnetic_energy(state))
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-12 * energies[0])
    assert energies[-1] < energies[0]


def test_pec_walls_stay_zero():
    state = excited_state(CUBE, uniform_medium(CUBE))
    for _ in range(50):
        step(state)
    assert np.all(state.ez[0, :, :] == 0.0)
    assert np.all(state.ez[:, -1, :] == 0.0)
    assert np.all(state.ex[:, :, 0] == 0.0)
    assert np.all(state.ey[:, :, -1] == 0.0)


def test_blowup_is_detected():
    state = make_field_state(CUBE, uniform_medium(CUBE), open_end=False)
    state.ez[4, 4, 4] = 1e31
    with pytest.raises(NumericalBlowup):
        step(state)


def test_medium_from_voxels(materials, small_scene, small_grid):
    voxels = voxelize(small_scene, small_grid, materials)
    medium = Medium.from_voxels(voxels, 10e9)
    assert medium.eps_r[4, 4, 18] == pytest.approx(4.6)
    assert medium.eps_r[4, 4, 19] == pytest.approx(1.0)
    assert medium.sigma[4, 4, 19] == 0.0
    assert medium.sigma[4, 4, 18] > 100 * medium.sigma[4, 4, 10]


def test_probe_snaps_to_center_node(small_scene, small_grid):
    probe = ProbeSource.from_scene(small_scene, small_grid)
    assert (probe.i, probe.j) == (5, 5)
    assert probe.index == (5, 5, slice(0, 4))


def test_edge_to_cell_split_conserves_totals():
    rng = np.random.default_rng(7)
    px = rng.random((4, 6, 7))
    py = rng.random((5, 5, 7))
    pz = rng.random((5, 6, 6))
    cells = _edges_to_cells(px, py, pz)
    assert cells.shape == (4, 5, 6)
    assert cells.sum() == pytest.approx(px.sum() + py.sum() + pz.sum())


def test_power_map_per_watt():
    q = np.zeros((2, 2, 2))
    q[0, 1, 1] = 3.0
    q[1, 0, 0] = 1.0
    pm = PowerMap(q=q, cell_volume=1e-9, freq=10e9).per_watt()
    assert pm.normalized
    assert pm.p_total == pytest.approx(1.0)
    assert pm.scaled(12.0).p_total == pytest.approx(12.0)


def test_lossless_scene_gives_zero_map(small_scene, small_grid):
    medium = uniform_medium(small_grid)
    pm = run_harmonic_steady(small_scene, small_grid, medium, 10e9)
    assert pm.p_total == 0.0
    assert not pm.normalized


def test_spectrum_needs_enough_steps(small_scene, small_grid):
    with pytest.raises(ValueError):
        run_spectrum(small_scene, small_grid, uniform_medium(small_grid),
                     10e9, 1e9, n_steps=100)


def test_find_peaks_and_q_on_lorentzian():
    freqs = np.arange(9.8e9, 10.2e9, 1e6)
    amps = lorentzian(freqs, 10.0e9, 100.0)
    spectrum = list(zip(freqs, amps))
    peaks = find_peaks(spectrum)
    assert len(peaks) == 1
    assert peaks[0][0] == pytest.approx(10.0e9, rel=1e-6)
    assert estimate_q(spectrum, 10.0e9) == pytest.approx(100.0, rel=0.01)


def test_overlapping_peaks_raise():
    freqs = np.arange(9.8e9, 10.3e9, 1e6)
    amps = np.maximum(
        lorentzian(freqs, 10.0e9, 100.0), lorentzian(freqs, 10.06e9, 100.0)
    )
    spectrum = list(zip(freqs, amps))
    assert len(find_peaks(spectrum)) == 2
    with pytest.raises(PeakOverlap):
        estimate_q(spectrum, 10.0e9)


def test_evanescent_fit_recovers_rate():
    grid = YeeGridSpec(dx=1e-3, dy=1e-3, dz=1e-3, nx=4, ny=4, nz=20)
    z = grid.centers(2)
    e2 = np.broadcast_to(np.exp(-900.0 * z), grid.shape).copy()
    pm = PowerMap(q=np.ones(grid.shape), cell_volume=grid.cell_volume,
                  freq=10e9, e_squared=e2)
    assert fit_evanescent_decay(pm, grid, 0.0, 0.02) == pytest.approx(
        900.0, rel=1e-9
    )


def test_evanescent_fit_needs_field():
    pm = PowerMap(q=np.ones(CUBE.shape), cell_volume=CUBE.cell_volume,
                  freq=10e9)
    with pytest.raises(ValueError):
        fit_evanescent_decay(pm, CUBE, 0.0, 8e-3)


def test_open_scene_cw_solve_balances_energy(open_cw):
    _, _, pm = open_cw
    assert pm.normalized
    assert pm.p_total == pytest.approx(1.0)
    assert pm.ledger.source > 0
    assert pm.ledger.radiated > 0
    assert pm.ledger.imbalance < 0.02
    assert np.all(pm.q >= 0)


def test_cw_power_is_quadratic_in_amplitude(open_cw):
    scene, medium, pm = open_cw
    doubled = run_harmonic_steady(
        scene, SMALL_GRID, medium, 10.4e9, amplitude=2.0
    )
    assert doubled.ledger.dissipated == pytest.approx(
        4.0 * pm.ledger.dissipated, rel=1e-10
    )
    np.testing.assert_allclose(
        doubled.q, pm.q, rtol=1e-10, atol=1e-12 * pm.q.max()
    )


def test_cw_map_is_symmetric_in_x_and_y(open_cw):
    _, _, pm = open_cw
    np.testing.assert_allclose(
        pm.q, pm.q.transpose(1, 0, 2), rtol=1e-6, atol=1e-9 * pm.q.max()
    )


@pytest.mark.parametrize("lossless", [True, False])
def test_open_face_never_adds_energy(lossless):
    scene = make_small_scene()
    table = MaterialTable(dict(BUNDLED_MATERIALS))
    medium = Medium.from_voxels(voxelize(scene, SMALL_GRID, table), 10e9)
    if lossless:
        medium = Medium(eps_r=medium.eps_r, sigma=np.zeros(SMALL_GRID.shape))
    state = make_field_state(SMALL_GRID, medium, open_end=True)
    rng = np.random.default_rng(3)
    top = state.ez[1:-1, 1:-1, -6:]
    state.ez[1:-1, 1:-1, -6:] = rng.normal(size=top.shape)
    energies = [electromagnetic_energy(state)]
    for _ in range(10000):
        step(state)
        energies.append(electromagnetic_energy(state))
    diffs = np.diff(energies)
    assert np.all(diffs <= 1e-12 * energies[0])
    assert energies[-1] < energies[0]


def tm110_peak(cells):
    scene = Scene(
        cavity=reference_scene().cavity,
        blocks=[],
        sample_region=Box(5e-3, 20e-3, 5e-3, 20e-3, 50e-3, 60e-3),
        probe=Probe(12.75e-3, 12.75e-3, 4e-3),
        open_end=False,
    )
    grid = YeeGridSpec(dx=25.5e-3 / cells, dy=25.5e-3 / cells, dz=5.5e-3,
                       nx=cells, ny=cells, nz=20)
    spectrum = run_spectrum(scene, grid, uniform_medium(grid), 8.3e9, 1e9,
                            n_steps=20000)
    peaks = [f for f, _ in find_peaks(spectrum)]
    return min(peaks, key=lambda f: abs(f - 8.313e9))


@pytest.mark.slow
def test_closed_box_tm110_peak():
    peak = tm110_peak(12)
    assert abs(peak - 8.313e9) / 8.313e9 < 0.01


@pytest.mark.slow
def test_tm110_peak_converges_under_refinement():
    coarse, fine = tm110_peak(12), tm110_peak(18)
    assert abs(fine - coarse) / coarse < 0.005
    assert abs(fine - 8.313e9) / 8.313e9 < 0.01


@pytest.mark.slow
def test_loaded_spectrum_matches_trapped_roots():
    scene = tall_scene()
    roots = [
        mode.freq for mode in solve_resonances(TALL, 1, 1, 8.8e9, 13.6e9)
    ]
    assert len(roots) >= 2
    spectrum = run_spectrum(
        scene, TALL_GRID, tall_medium(scene, 11.2e9), 11.2e9, 4.8e9,
        n_steps=30000,
    )
    peaks = [f for f, _ in find_peaks(spectrum)]
    for root in roots:
        nearest = min(peaks, key=lambda f: abs(f - root))
        assert abs(nearest - root) / root < 0.01


@pytest.mark.slow
def test_air_section_decay_matches_analytic_rate():
    lossy = Material("filler", 6.0, 0.01, 3000.0, 800.0, 3.0)
    table = MaterialTable({"filler": lossy})
    scene = tall_scene()
    root = solve_resonances(TALL, 1, 1, 8.8e9, 10e9)[0].freq
    medium = tall_medium(scene, root, table)
    pm = run_harmonic_steady(scene, TALL_GRID, medium, root)
    rate = fit_evanescent_decay(pm, TALL_GRID, 9.5e-3, 13e-3)
    assert rate == pytest.approx(
        2.0 * evanescent_rate(TALL, 1, 1, root), rel=0.05
    )


@pytest.mark.slow
def test_lossy_load_lowers_q():
    root = solve_resonances(TALL, 1, 1, 8.8e9, 10e9)[0].freq
    slab = Block(Box(0.0, 10e-3, 0.0, 10e-3, 9e-3, 10e-3), "solder-sample")

    def q_of(scene):
        spectrum = run_spectrum(
            scene, TALL_GRID, tall_medium(scene, root), root, 3e9,
            n_steps=30000,
        )
        peaks = [f for f, _ in find_peaks(spectrum)]
        nearest = min(peaks, key=lambda f: abs(f - root))
        return estimate_q(spectrum, nearest)

    assert q_of(tall_scene(slab)) < q_of(tall_scene())


@pytest.mark.slow
def test_loaded_oven_heats_sample_selectively(materials):
    scene = reference_scene()
    grid = auto_grid(scene, materials, 10.8e9)
    voxels = voxelize(scene, grid, materials)
    freq = solve_resonances(scene.cavity, 3, 3, 10.3e9, 10.5e9)[0].freq
    medium = Medium.from_voxels(voxels, freq)
    pm = run_harmonic_steady(scene, grid, medium, freq)
    assert pm.p_total == pytest.approx(1.0)
    filler = voxels.material_index == materials.index("filler")
    sample_mean = pm.q[voxels.load_mask].mean()
    assert sample_mean > 100 * pm.q[filler].mean()
    assert pm.ledger.imbalance < 0.02
