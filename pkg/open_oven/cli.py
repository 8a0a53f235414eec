"""Command-line entry point: modes, spectrum, heat and control runs."""

import argparse
import logging
import sys

from .config import configure_logging, load_config_file
from .const import DOMAIN, VERSION
from .emsolve import Medium, estimate_q, find_peaks, run_spectrum
from .errors import ConfigError, NumericalError, OpenOvenError, PeakOverlap
from .lib import config_digest, make_human_friendly
from .modes import CavitySpec, mode_table
from .orchestrator import CoupledRun, default_power_solver
from .scene import auto_grid, voxelize
from .solve_executor import SolveExecutor
from .thermal_image import ThermalImageRenderer
from .writers import (
    snapshot_name,
    write_modes,
    write_peaks,
    write_power_map,
    write_run_summary,
    write_snapshot,
    write_spectrum,
)

_LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per scenario."""
    parser = argparse.ArgumentParser(
        prog="open-oven",
        description="Open-ended microwave oven EM / thermal / cure runs.",
    )
    parser.add_argument(
        "--version", action="version", version=f"{DOMAIN} {VERSION}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="YAML run configuration")
        p.add_argument("--validate", action="store_true",
                       help="check the configuration and stop")
        p.add_argument("--verbose", "-v", action="store_true",
                       help="debug logging for open_oven")

    modes = sub.add_parser("modes", help="analytic TM resonance table")
    common(modes, config_required=False)
    modes.add_argument("--a", type=float, help="cross-section width (m)")
    modes.add_argument("--b", type=float, help="cross-section height (m)")
    modes.add_argument("--ld", type=float, help="dielectric length (m)")
    modes.add_argument("--lair", type=float, default=10e-3,
                       help="air section length (m)")
    modes.add_argument("--epsr", type=float, help="filler permittivity")
    modes.add_argument("--m", type=int, default=3)
    modes.add_argument("--n", type=int, default=3)
    modes.add_argument("--band", type=float, nargs=2,
                       metavar=("F_LO", "F_HI"), default=(10.0e9, 10.8e9))
    modes.add_argument("--out", help="modes CSV path (default: stdout)")

    for name, text in (
        ("spectrum", "FDTD pulse response of the oven"),
        ("heat", "open-loop coupled run on a power schedule"),
        ("control", "closed-loop coupled run tracking a profile"),
    ):
        common(sub.add_parser(name, help=text))
    return parser


def _modes_from_flags(args, argv) -> int:
    missing = [f"--{k}" for k in ("a", "b", "ld", "epsr")
               if getattr(args, k) is None]
    if missing:
        raise ConfigError(
            "modes needs --config or " + ", ".join(missing), "argv"
        )
    try:
        spec = CavitySpec(a=args.a, b=args.b, l_d=args.ld, l_air=args.lair,
                          eps_r=args.epsr)
    except ValueError as e:
        raise ConfigError(str(e), "argv") from e
    if args.validate:
        return EXIT_OK
    f_lo, f_hi = args.band
    table = mode_table(spec, [(args.m, args.n)], f_lo, f_hi)
    digest = config_digest(" ".join(argv).encode("utf-8"), 0)
    write_modes(args.out or sys.stdout, digest, table)
    return EXIT_OK


def _run_modes(cfg) -> None:
    section = cfg.section("modes")
    f_lo, f_hi = section["band"]
    table = mode_table(
        cfg.cavity, [tuple(p) for p in section["pairs"]], f_lo, f_hi,
        section["scan_step"],
    )
    for md in table:
        _LOGGER.info("TM%d%d branch %d: %.6f GHz", md.m, md.n, md.branch,
                     md.freq / 1e9)
    write_modes(cfg.output_dir / "modes.csv", cfg.digest, table)


def _yee_grid(cfg, scene):
    grid = cfg.section("grid")
    return auto_grid(
        scene, cfg.materials, cfg.f_max(),
        grid["cells_per_wavelength"], grid["cell_budget"],
    )


def _run_spectrum(cfg) -> None:
    section = cfg.section("spectrum")
    scene = cfg.scene
    grid = _yee_grid(cfg, scene)
    voxels = voxelize(scene, grid, cfg.materials)
    medium = Medium.from_voxels(voxels, section["f_center"], scene.ambient_T)
    spectrum = run_spectrum(
        scene, grid, medium, section["f_center"], section["f_span"],
        section["n_steps"], courant=cfg.section("grid")["courant"],
        resolution=section["resolution"],
    )
    peaks = []
    for freq, amp in find_peaks(spectrum, section["min_relative"]):
        try:
            q, overlap = estimate_q(spectrum, freq), False
        except PeakOverlap as e:
            _LOGGER.warning("%s", e)
            q, overlap = None, True
        peaks.append((freq, amp, q, overlap))
        _LOGGER.info("Peak %.6f GHz, amplitude %.3g, Q %s", freq / 1e9, amp,
                     "overlap" if overlap else f"{q:.4g}")
    _compare_to_modes(cfg, peaks)
    out = cfg.output_dir
    write_spectrum(out / "spectrum.csv", cfg.digest, spectrum)
    write_peaks(out / "peaks.csv", cfg.digest, peaks)


def _compare_to_modes(cfg, peaks) -> None:
    if not cfg.scene.open_end or not peaks:
        return
    section = cfg.section("modes")
    f_lo, f_hi = section["band"]
    table = mode_table(cfg.cavity, [tuple(p) for p in section["pairs"]],
                       f_lo, f_hi, section["scan_step"])
    for md in table:
        nearest = min(peaks, key=lambda p: abs(p[0] - md.freq))
        _LOGGER.info(
            "TM%d%d analytic %.6f GHz, nearest FDTD peak %.6f GHz "
            "(%.3f %%)", md.m, md.n, md.freq / 1e9, nearest[0] / 1e9,
            100 * abs(nearest[0] - md.freq) / md.freq,
        )


def _coupled_run(cfg, scene, snapshot_prefix=""):
    grid = _yee_grid(cfg, scene)
    thermal = cfg.section("thermal")
    coupling = cfg.section("coupling")
    output = cfg.section("output")
    out = cfg.output_dir
    if snapshot_prefix:
        out = out / snapshot_prefix
    renderer = ThermalImageRenderer() if output["images"] else None

    run = None

    def snapshot(t, state):
        write_snapshot(out, cfg.digest, t, run.thermal_grid, state,
                       vtk=output["vtk"])
        if renderer is not None:
            renderer.save(out / f"{snapshot_name(t)}.png",
                          state.temperature[:, :, -1])

    solver = default_power_solver(
        scene, grid, coupling["convergence_tol"], coupling["max_periods"],
        cfg.section("grid")["courant"],
    )
    run = CoupledRun(
        scene, cfg.materials, grid, thermal.get("shape"),
        cfg.coupling_policy(),
        power_solver=solver,
        executor=SolveExecutor(solver),
        noise_std=thermal["noise_std"],
        seed=cfg.seed,
        snapshot_callback=snapshot,
    )
    return run, grid, out


def _write_maps(cfg, run, grid, out) -> None:
    for pm in run.last_maps:
        write_power_map(
            out, cfg.digest, f"power_map_{pm.freq / 1e6:.0f}MHz", grid, pm,
            run.voxels, vtk=cfg.section("output")["vtk"],
        )


def _run_heat(cfg) -> None:
    run, grid, out = _coupled_run(cfg, cfg.scene)
    result = run.run(cfg.t_end, schedule=cfg.power_schedule)
    write_run_summary(out / "run_summary.csv", cfg.digest, result.records)
    _write_maps(cfg, run, grid, out)
    if result.uniformity is not None:
        _LOGGER.info("Load uniformity (std/mean of q): %.4g",
                     result.uniformity)


def _run_control(cfg) -> None:
    run, grid, out = _coupled_run(cfg, cfg.scene)
    result = run.run(
        cfg.t_end,
        profile=cfg.profile,
        controller=cfg.controller_state(),
        tune_duration=cfg.section("controller").get("tune_duration"),
        u_max=cfg.section("controller")["u_max"],
    )
    write_run_summary(out / "run_summary.csv", cfg.digest, result.records)
    _write_maps(cfg, run, grid, out)
    final = result.records[-1]
    _LOGGER.info(
        "Tracking: target %.2f K, measured %.2f K at %.4g s",
        final.target, final.measured, final.t,
    )
    if cfg.companion_scene is None:
        return

    companion, _, comp_out = _coupled_run(
        cfg, cfg.companion_scene, "companion"
    )
    replay = companion.run(cfg.t_end, schedule=result.power_trace())
    write_run_summary(comp_out / "run_summary.csv", cfg.digest,
                      replay.records)
    rise_sample = result.records[-1].measured - result.records[0].measured
    rise_filler = replay.records[-1].measured - replay.records[0].measured
    _LOGGER.info(
        "Surface rise: %s %.3g K, %s %.3g K",
        make_human_friendly(cfg.scene.blocks[-1].material), rise_sample,
        make_human_friendly(cfg.section("scene")["filler"]), rise_filler,
    )


SCENARIOS = {
    "modes": _run_modes,
    "spectrum": _run_spectrum,
    "heat": _run_heat,
    "control": _run_control,
}


def _dispatch(args, argv) -> int:
    configure_logging(None, args.verbose)
    if args.command == "modes" and not args.config:
        return _modes_from_flags(args, argv)
    cfg = load_config_file(args.config)
    configure_logging(cfg.options, args.verbose)
    if cfg.scenario != args.command:
        raise ConfigError(
            f"configuration is for {cfg.scenario!r}, not {args.command!r}",
            "scenario", cfg.lines.get(("scenario",)),
        )
    if args.validate:
        _LOGGER.info("%s is valid (%s)", args.config, cfg.scenario)
        return EXIT_OK
    SCENARIOS[cfg.scenario](cfg)
    return EXIT_OK


def main(argv=None) -> int:
    """Run one scenario; 0 on success, 1 config error, 2 numerical."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args, argv)
    except ConfigError as e:
        _LOGGER.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except NumericalError as e:
        _LOGGER.error("Numerical failure: %s", e)
        return EXIT_NUMERICAL
    except (OpenOvenError, ValueError) as e:
        _LOGGER.error("Invalid run: %s", e)
        return EXIT_CONFIG
