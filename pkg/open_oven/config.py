"""YAML run configuration: schema, line tracking and object building."""

from dataclasses import dataclass, field
import logging
from pathlib import Path

import voluptuous as vol
import yaml

from .const import (
    DEFAULT_CELL_BUDGET,
    DEFAULT_CELLS_PER_WAVELENGTH,
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_COURANT,
    DEFAULT_DT_COUPLE,
    DEFAULT_H_CONV,
    DEFAULT_MAX_PERIODS,
    DEFAULT_RESOLVE_THRESHOLD,
    DEFAULT_SNAPSHOT_INTERVAL,
    DEFAULT_U_MAX,
    DOMAIN,
    MAX_COURANT,
    ROOT_SCAN_STEP_HZ,
    T_REF,
)
from .control import ControllerState, PowerSchedule, Profile
from .errors import ConfigError
from .lib import config_digest
from .materials import BUNDLED_MATERIALS, CureKinetics, Material, MaterialTable
from .modes import CavitySpec, mode_table
from .orchestrator import CouplingPolicy, Drive
from .scene import FACES, Block, Box, Probe, Scene

_LOGGER = logging.getLogger(__name__)

SCENARIOS = ("modes", "spectrum", "heat", "control")
LOG_LEVELS = ("debug", "info", "warning", "error", "critical")

_positive = vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False))
_non_negative = vol.All(vol.Coerce(float), vol.Range(min=0))
_unit = vol.All(vol.Coerce(float), vol.Range(min=0, max=1))
_pair = vol.All([vol.Coerce(float)], vol.Length(min=2, max=2))
_count = vol.All(int, vol.Range(min=1))
_mode_pair = vol.All([_count], vol.Length(min=2, max=2))

CURE_SCHEMA = vol.Schema(
    {
        vol.Required("a1"): _non_negative,
        vol.Required("e1"): _non_negative,
        vol.Optional("a2", default=0.0): _non_negative,
        vol.Optional("e2", default=1.0): _non_negative,
        vol.Optional("m", default=0.0): _non_negative,
        vol.Optional("n", default=1.0): _non_negative,
        vol.Optional("dh", default=0.0): _non_negative,
        vol.Optional("alpha_gel", default=0.5): _unit,
        vol.Optional("shrink", default=0.0): _non_negative,
    }
)

MATERIAL_SCHEMA = vol.Schema(
    {
        vol.Required("eps_r"): vol.All(vol.Coerce(float), vol.Range(min=1)),
        vol.Required("tan_delta"): _non_negative,
        vol.Required("density"): _positive,
        vol.Required("heat_capacity"): _positive,
        vol.Required("conductivity_thermal"): _positive,
        vol.Optional("cte", default=0.0): vol.Coerce(float),
        vol.Optional("modulus", default=0.0): _non_negative,
        vol.Optional("poisson", default=0.3): vol.All(
            vol.Coerce(float), vol.Range(min=-1, max=0.5, max_included=False)
        ),
        vol.Optional("eps_slope_T", default=0.0): vol.Coerce(float),
        vol.Optional("tan_slope_T", default=0.0): vol.Coerce(float),
        vol.Optional("tan_slope_alpha", default=0.0): vol.Coerce(float),
        vol.Optional("cure"): vol.Any(None, CURE_SCHEMA),
    }
)

CAVITY_SCHEMA = vol.Schema(
    {
        vol.Optional("a", default=25.5e-3): _positive,
        vol.Optional("b", default=25.5e-3): _positive,
        vol.Optional("l_d", default=100e-3): _positive,
        vol.Optional("l_air", default=10e-3): _positive,
    }
)

SAMPLE_SCHEMA = vol.Schema(
    {
        vol.Required("material"): str,
        vol.Optional("side", default=15e-3): _positive,
        vol.Optional("thickness", default=0.5e-3): _positive,
        vol.Optional("offset", default=0.0): vol.Coerce(float),
    }
)

SCENE_SCHEMA = vol.Schema(
    {
        vol.Optional("cavity", default={}): CAVITY_SCHEMA,
        vol.Optional("filler", default="filler"): str,
        vol.Optional("sample"): vol.Any(None, SAMPLE_SCHEMA),
        vol.Optional("slab_thickness", default=0.5e-3): _positive,
        vol.Optional("probe_length", default=4e-3): _positive,
        vol.Optional("ambient_T", default=T_REF): _positive,
        vol.Optional("h_conv", default=DEFAULT_H_CONV): _non_negative,
        vol.Optional("h_faces", default={}): {
            vol.In(FACES): vol.All(vol.Coerce(float), vol.Range(min=0))
        },
        vol.Optional("contact_conductance", default=0.0): _non_negative,
        vol.Optional("substrate_cte", default=2.6e-6): vol.Coerce(float),
        vol.Optional("open_end", default=True): bool,
    }
)

GRID_SCHEMA = vol.Schema(
    {
        vol.Optional(
            "cells_per_wavelength", default=DEFAULT_CELLS_PER_WAVELENGTH
        ): vol.All(vol.Coerce(float), vol.Range(min=10)),
        vol.Optional("cell_budget", default=DEFAULT_CELL_BUDGET): vol.All(
            vol.Coerce(int), vol.Range(min=8)
        ),
        vol.Optional("f_max"): vol.Any(None, _positive),
        vol.Optional("courant", default=DEFAULT_COURANT): vol.All(
            vol.Coerce(float),
            vol.Range(min=0, max=MAX_COURANT, min_included=False),
        ),
    }
)

THERMAL_SCHEMA = vol.Schema(
    {
        vol.Optional("shape"): vol.Any(
            None,
            vol.All([_count], vol.Length(min=3, max=3)),
        ),
        vol.Optional("noise_std", default=0.0): _non_negative,
    }
)

DRIVE_SCHEMA = vol.Schema(
    {
        vol.Optional("mode", default="sfm"): vol.In(("sfm", "vfm")),
        vol.Optional("frequency"): vol.Any(None, _positive),
        vol.Optional("frequencies"): vol.Any(None, "auto", [_positive]),
        vol.Optional("weights"): vol.Any(None, [_non_negative]),
        vol.Optional("mode_pair", default=[3, 3]): _mode_pair,
        vol.Optional("band", default=[10.0e9, 10.8e9]): _pair,
    }
)

POWER_SCHEDULE_SCHEMA = vol.Schema(
    {
        vol.Required("breakpoints"): vol.All(
            [_pair], vol.Length(min=1)
        ),
        vol.Optional("hold", default=False): bool,
    }
)

CONTROLLER_SCHEMA = vol.Schema(
    {
        vol.Optional("kp"): vol.Any(None, _non_negative),
        vol.Optional("ki"): vol.Any(None, _non_negative),
        vol.Optional("kd", default=0.0): _non_negative,
        vol.Optional("u_max", default=DEFAULT_U_MAX): _non_negative,
        vol.Optional("tune_duration"): vol.Any(None, _positive),
    }
)

COUPLING_SCHEMA = vol.Schema(
    {
        vol.Optional("t_end"): vol.Any(None, _positive),
        vol.Optional("dt_couple", default=DEFAULT_DT_COUPLE): _positive,
        vol.Optional(
            "resolve_threshold", default=DEFAULT_RESOLVE_THRESHOLD
        ): vol.All(
            vol.Coerce(float), vol.Range(min=0, max=1, max_included=False)
        ),
        vol.Optional(
            "convergence_tol", default=DEFAULT_CONVERGENCE_TOL
        ): _positive,
        vol.Optional("max_periods", default=DEFAULT_MAX_PERIODS): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
        vol.Optional("companion", default=False): bool,
    }
)

SPECTRUM_SCHEMA = vol.Schema(
    {
        vol.Optional("f_center", default=10.4e9): _positive,
        vol.Optional("f_span", default=0.8e9): _positive,
        vol.Optional("n_steps", default=30000): vol.All(
            vol.Coerce(int), vol.Range(min=16)
        ),
        vol.Optional("resolution", default=1e6): _positive,
        vol.Optional("min_relative", default=0.05): _unit,
    }
)

MODES_SCHEMA = vol.Schema(
    {
        vol.Optional("pairs", default=[[3, 3]]): vol.All(
            [_mode_pair], vol.Length(min=1)
        ),
        vol.Optional("band", default=[10.0e9, 10.8e9]): _pair,
        vol.Optional("scan_step", default=ROOT_SCAN_STEP_HZ): _positive,
    }
)

OUTPUT_SCHEMA = vol.Schema(
    {
        vol.Optional("directory", default="out"): str,
        vol.Optional(
            "snapshot_interval", default=DEFAULT_SNAPSHOT_INTERVAL
        ): _positive,
        vol.Optional("vtk", default=True): bool,
        vol.Optional("images", default=True): bool,
    }
)

LOGGER_SCHEMA = vol.Schema(
    {
        vol.Optional("default", default="info"): vol.In(LOG_LEVELS),
        vol.Optional("logs", default={}): {str: vol.In(LOG_LEVELS)},
    }
)

CONFIG_SCHEMA = vol.Schema(
    {
        vol.Required("scenario"): vol.In(SCENARIOS),
        vol.Optional("seed", default=0): vol.All(int, vol.Range(min=0)),
        vol.Optional("materials", default={}): {str: MATERIAL_SCHEMA},
        vol.Optional("scene", default={}): SCENE_SCHEMA,
        vol.Optional("grid", default={}): GRID_SCHEMA,
        vol.Optional("thermal", default={}): THERMAL_SCHEMA,
        vol.Optional("drive", default={}): DRIVE_SCHEMA,
        vol.Optional("profile"): vol.Any(None, vol.All([_pair])),
        vol.Optional("power_schedule"): vol.Any(None, POWER_SCHEDULE_SCHEMA),
        vol.Optional("controller", default={}): CONTROLLER_SCHEMA,
        vol.Optional("coupling", default={}): COUPLING_SCHEMA,
        vol.Optional("spectrum", default={}): SPECTRUM_SCHEMA,
        vol.Optional("modes", default={}): MODES_SCHEMA,
        vol.Optional("output", default={}): OUTPUT_SCHEMA,
        vol.Optional("logger", default={}): LOGGER_SCHEMA,
    }
)


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with its built domain objects."""

    scenario: str
    seed: int
    digest: str
    materials: MaterialTable
    scene: Scene
    cavity: CavitySpec
    options: dict
    profile: Profile | None = None
    power_schedule: PowerSchedule | None = None
    companion_scene: Scene | None = None
    lines: dict = field(default_factory=dict, repr=False)

    def section(self, name: str) -> dict:
        """Validated section with defaults filled in."""
        return self.options[name]

    @property
    def output_dir(self) -> Path:
        """Directory receiving every output file."""
        return Path(self.options["output"]["directory"])

    @property
    def t_end(self) -> float:
        """Coupled-run length: coupling.t_end, else profile/schedule end."""
        t_end = self.options["coupling"].get("t_end")
        if t_end:
            return t_end
        if self.profile is not None:
            return self.profile.duration
        if self.power_schedule is not None:
            return self.power_schedule.breakpoints[-1][0]
        return 0.0

    def controller_state(self) -> ControllerState | None:
        """Controller from configured gains; None asks for auto-tuning."""
        ctrl = self.options["controller"]
        if ctrl.get("kp") is None or ctrl.get("ki") is None:
            return None
        return ControllerState(
            kp=ctrl["kp"], ki=ctrl["ki"], kd=ctrl["kd"], u_max=ctrl["u_max"]
        )

    def drive(self) -> Drive:
        """Drive of the coupled scenarios, resolving `auto` VFM lists."""
        return build_drive(self.options["drive"], self.cavity)

    def coupling_policy(self) -> CouplingPolicy:
        """Macro-step policy of the coupled scenarios."""
        coupling = self.options["coupling"]
        return CouplingPolicy(
            drive=self.drive(),
            dt_couple=coupling["dt_couple"],
            resolve_threshold=coupling["resolve_threshold"],
            snapshot_interval=self.options["output"]["snapshot_interval"],
        )

    def f_max(self) -> float:
        """Highest frequency the Yee grid must resolve."""
        grid = self.options["grid"]
        if grid.get("f_max"):
            return grid["f_max"]
        if self.scenario == "spectrum":
            spec = self.options["spectrum"]
            return spec["f_center"] + spec["f_span"] / 2
        return max(self.drive().frequencies)


def _line_index(node, path=(), index=None) -> dict:
    """Map key paths of a composed YAML node tree to 1-based lines."""
    if index is None:
        index = {}
    index[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key_path = path + (key_node.value,)
            _line_index(value_node, key_path, index)
            index[key_path] = key_node.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_index(item, path + (i,), index)
    return index


def _lookup_line(lines: dict, path) -> int | None:
    path = tuple(path)
    while path:
        if path in lines:
            return lines[path]
        path = path[:-1]
    return lines.get(())


def _error(lines: dict, path, message: str) -> ConfigError:
    path = tuple(p if isinstance(p, int) else str(p) for p in path)
    return ConfigError(message, [str(p) for p in path],
                       _lookup_line(lines, path))


def parse_yaml(text: str):
    """(data, line index) for a YAML document."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(
            f"invalid YAML: {getattr(e, 'problem', e)}",
            line=mark.line + 1 if mark else None,
        ) from e
    if node is None or not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", line=1)
    return data, _line_index(node)


def validate(data: dict, lines: dict) -> dict:
    """Schema validation with key-path and line-number errors."""
    try:
        return CONFIG_SCHEMA(data)
    except vol.MultipleInvalid as e:
        first = e.errors[0]
        raise _error(lines, first.path, first.msg) from e


def build_materials(options: dict, lines: dict) -> MaterialTable:
    """Bundled library plus (overriding) configured materials."""
    table = dict(BUNDLED_MATERIALS)
    for name, props in options["materials"].items():
        props = dict(props)
        cure = props.pop("cure", None)
        try:
            table[name] = Material(
                name=name,
                cure=CureKinetics(**cure) if cure else None,
                **props,
            )
        except ValueError as e:
            raise _error(lines, ("materials", name), str(e)) from e
    return MaterialTable(table)


def _sample_box(cavity: CavitySpec, side: float, thickness: float,
                z0: float) -> Box:
    half = side / 2
    return Box(
        cavity.a / 2 - half, cavity.a / 2 + half,
        cavity.b / 2 - half, cavity.b / 2 + half,
        z0, z0 + thickness,
    )


def build_scene(
    options: dict,
    materials: MaterialTable,
    lines: dict,
    filler_only: bool = False,
) -> Scene:
    """Scene of the configuration.

    Without a sample (or with filler_only) the load region is a slab of
    the filler just below its exposed face, under the sample footprint.
    """
    sc = options["scene"]
    filler = sc["filler"]
    if filler not in materials:
        raise _error(lines, ("scene", "filler"),
                     f"undefined material {filler!r}")
    filler_eps = materials[filler].eps_r
    cavity = CavitySpec(eps_r=filler_eps, **sc["cavity"])
    sample = sc.get("sample")
    blocks = [Block(Box(0.0, cavity.a, 0.0, cavity.b, 0.0, cavity.l_d),
                    filler)]
    if sample and not filler_only:
        if sample["material"] not in materials:
            raise _error(lines, ("scene", "sample", "material"),
                         f"undefined material {sample['material']!r}")
        region = _sample_box(cavity, sample["side"], sample["thickness"],
                             cavity.l_d + sample["offset"])
        blocks.append(Block(region, sample["material"]))
    else:
        side = sample["side"] if sample else min(cavity.a, cavity.b) / 2
        thickness = sc["slab_thickness"]
        region = _sample_box(cavity, side, thickness, cavity.l_d - thickness)
    try:
        return Scene(
            cavity=cavity,
            blocks=blocks,
            sample_region=region,
            probe=Probe(cavity.a / 2, cavity.b / 2, sc["probe_length"]),
            ambient_T=sc["ambient_T"],
            h_conv=sc["h_conv"],
            h_faces=dict(sc["h_faces"]),
            contact_conductance=sc["contact_conductance"],
            substrate_cte=sc["substrate_cte"],
            open_end=sc["open_end"],
        )
    except ValueError as e:
        raise _error(lines, ("scene",), str(e)) from e


def build_drive(drive: dict, cavity: CavitySpec) -> Drive:
    """SFM or VFM drive; `auto` takes the mode roots inside the band."""
    if drive["mode"] == "sfm":
        if not drive.get("frequency"):
            raise ConfigError("SFM drive needs a frequency",
                              "drive.frequency")
        return Drive.sfm(drive["frequency"])
    freqs = drive.get("frequencies")
    if freqs == "auto":
        m, n = drive["mode_pair"]
        f_lo, f_hi = drive["band"]
        freqs = [mode.freq for mode in
                 mode_table(cavity, [(m, n)], f_lo, f_hi)]
        _LOGGER.info("VFM auto frequencies: %s",
                     ", ".join(f"{f:.6g}" for f in freqs))
    if not freqs:
        raise ConfigError("VFM drive needs at least one frequency",
                          "drive.frequencies")
    try:
        return Drive.vfm(freqs, drive.get("weights"))
    except ValueError as e:
        raise ConfigError(str(e), "drive.weights") from e


def _check_scenario(options: dict, lines: dict) -> None:
    scenario = options["scenario"]
    if scenario == "control" and not options.get("profile"):
        raise _error(lines, ("profile",),
                     "control scenario needs a profile")
    if scenario == "heat" and not options.get("power_schedule"):
        raise _error(lines, ("power_schedule",),
                     "heat scenario needs a power_schedule")
    drive = options["drive"]
    if scenario in ("heat", "control"):
        if drive["mode"] == "sfm" and not drive.get("frequency"):
            raise _error(lines, ("drive", "frequency"),
                         "SFM drive needs a frequency")
        weights = drive.get("weights")
        freqs = drive.get("frequencies")
        if drive["mode"] == "vfm" and weights is not None:
            if isinstance(freqs, list) and len(weights) != len(freqs):
                raise _error(lines, ("drive", "weights"),
                             "one weight per drive frequency")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise _error(lines, ("drive", "weights"),
                             "VFM weights must sum to 1")
    for key in ("modes", "drive"):
        f_lo, f_hi = options[key]["band"]
        if not 0 < f_lo < f_hi:
            raise _error(lines, (key, "band"),
                         "band must satisfy 0 < f_lo < f_hi")


def load_config(text: str, raw: bytes | None = None) -> RunConfig:
    """Parse, validate and build a run configuration."""
    data, lines = parse_yaml(text)
    options = validate(data, lines)
    _check_scenario(options, lines)
    materials = build_materials(options, lines)
    scene = build_scene(options, materials, lines)
    companion = None
    if options["coupling"]["companion"]:
        companion = build_scene(options, materials, lines, filler_only=True)
    profile = None
    if options.get("profile"):
        try:
            profile = Profile(tuple(tuple(p) for p in options["profile"]))
        except ValueError as e:
            raise _error(lines, ("profile",), str(e)) from e
    schedule = None
    if options.get("power_schedule"):
        ps = options["power_schedule"]
        times = [t for t, _ in ps["breakpoints"]]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise _error(lines, ("power_schedule", "breakpoints"),
                         "schedule times must be strictly increasing")
        schedule = PowerSchedule(
            tuple(tuple(p) for p in ps["breakpoints"]), hold=ps["hold"]
        )
    raw = raw if raw is not None else text.encode()
    return RunConfig(
        scenario=options["scenario"],
        seed=options["seed"],
        digest=config_digest(raw, options["seed"]),
        materials=materials,
        scene=scene,
        cavity=scene.cavity,
        options=options,
        profile=profile,
        power_schedule=schedule,
        companion_scene=companion,
        lines=lines,
    )


def load_config_file(path) -> RunConfig:
    """Read and load a configuration file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    return load_config(raw.decode("utf-8"), raw)


def configure_logging(options: dict | None, verbose: bool = False) -> None:
    """Apply the `logger` section: a default level plus per-module levels."""
    section = (options or {}).get("logger") or {}
    logging.basicConfig(
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        level=section.get("default", "info").upper(),
        force=True,
    )
    for name, level in section.get("logs", {}).items():
        logging.getLogger(name).setLevel(level.upper())
    if verbose:
        logging.getLogger(DOMAIN).setLevel(logging.DEBUG)
