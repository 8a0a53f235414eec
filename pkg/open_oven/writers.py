"""CSV tables and legacy VTK structured-points dumps."""

import csv
import logging
from pathlib import Path

import numpy as np

from .const import DOMAIN, VERSION
from .lib import header_lines

_LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = "{:.9g}"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def _write_table(f, digest: str, columns, rows) -> None:
    for line in header_lines(digest):
        f.write(line + "\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def write_csv(target, digest: str, columns, rows):
    """Header comments, a column row, then one formatted line per row.

    target is a file path or an open text stream such as sys.stdout.
    """
    if hasattr(target, "write"):
        _write_table(target, digest, columns, rows)
        return target
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        _write_table(f, digest, columns, rows)
    _LOGGER.debug("Wrote %s", path)
    return path


def write_vtk(path, digest: str, grid_origin, spacing, fields: dict) -> Path:
    """Cell-centered scalars on a structured-points dataset.

    fields maps names to equally shaped (nx, ny, nz) arrays. The
    dataset has nx+1 x ny+1 x nz+1 points; values run x fastest.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    shapes = {np.shape(v) for v in fields.values()}
    if len(shapes) != 1:
        raise ValueError("VTK fields must share one shape")
    nx, ny, nz = shapes.pop()
    with path.open("w", encoding="utf-8") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{DOMAIN} {VERSION} config_sha256 {digest}\n")
        f.write("ASCII\n")
        f.write("DATASET STRUCTURED_POINTS\n")
        f.write(f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}\n")
        f.write("ORIGIN {} {} {}\n".format(
            *(FLOAT_FORMAT.format(float(o)) for o in grid_origin)))
        f.write("SPACING {} {} {}\n".format(
            *(FLOAT_FORMAT.format(float(s)) for s in spacing)))
        f.write(f"CELL_DATA {nx * ny * nz}\n")
        for name, values in fields.items():
            f.write(f"SCALARS {name} double 1\n")
            f.write("LOOKUP_TABLE default\n")
            flat = np.asarray(values, dtype=float).ravel(order="F")
            for value in flat:
                f.write(FLOAT_FORMAT.format(value) + "\n")
    _LOGGER.debug("Wrote %s", path)
    return path


def write_modes(target, digest: str, modes):
    """modes.csv (or a stream): one analytic resonance per row."""
    return write_csv(
        target, digest,
        ["m", "n", "branch", "freq_hz", "beta_d_per_m", "alpha_air_per_m"],
        [(md.m, md.n, md.branch, md.freq, md.beta_d, md.alpha_air)
         for md in modes],
    )


def write_spectrum(path, digest: str, spectrum) -> Path:
    """spectrum.csv: normalized amplitude per frequency bin."""
    return write_csv(path, digest, ["freq_hz", "amplitude"], spectrum)


def write_peaks(path, digest: str, peaks) -> Path:
    """Peak table; q is empty where the peak overlaps a neighbour."""
    return write_csv(
        path, digest, ["freq_hz", "amplitude", "q", "overlap"], peaks
    )


def write_run_summary(path, digest: str, records) -> Path:
    """run_summary.csv: one row per macro-step plus the final state."""
    return write_csv(
        path, digest,
        ["t_s", "target_K", "measured_K", "power_W", "T_min_K", "T_max_K",
         "alpha_mean", "sigma_max_Pa"],
        [(r.t, r.target, r.measured, r.power, r.t_min, r.t_max,
          r.alpha_mean, r.sigma_max) for r in records],
    )


def snapshot_name(t: float) -> str:
    """File stem of a snapshot at time t (whole milliseconds)."""
    return f"snapshot_{int(round(t * 1000)):09d}ms"


def _indexed_rows(centers, mask, *fields):
    """(i, j, k, x, y, z, *values) for every cell where mask is set."""
    cx, cy, cz = centers
    for i, j, k in np.argwhere(mask):
        yield (int(i), int(j), int(k), cx[i], cy[j], cz[k],
               *(f[i, j, k] for f in fields))


def write_snapshot(directory, digest: str, t: float, grid, state,
                   vtk: bool = True) -> list[Path]:
    """Per-cell T, alpha and sigma of the load mesh as CSV (and VTK)."""
    directory = Path(directory)
    stem = snapshot_name(t)
    rows = _indexed_rows(
        grid.centers, np.ones(state.temperature.shape, dtype=bool),
        state.temperature, state.alpha, state.sigma_ind,
    )
    written = [write_csv(
        directory / f"{stem}.csv", digest,
        ["i", "j", "k", "x", "y", "z", "T_K", "alpha", "sigma_Pa"], rows,
    )]
    if vtk:
        dx, dy, dz = grid.spacing
        written.append(write_vtk(
            directory / f"{stem}.vtk", digest,
            (grid.x[0], grid.y[0], grid.z[0]),
            (float(dx.mean()), float(dy.mean()), float(dz.mean())),
            {
                "temperature": state.temperature,
                "alpha": state.alpha,
                "sigma_ind": state.sigma_ind,
            },
        ))
    return written


def write_power_map(directory, digest: str, name: str, grid, power,
                    voxels=None, vtk: bool = True) -> list[Path]:
    """Per-watt dissipation map (and the material indices) on the Yee grid.

    The CSV has one row per load cell, zeros included, or one per cell
    when no voxels are given.
    """
    directory = Path(directory)
    mask = (
        voxels.load_mask if voxels is not None
        else np.ones(power.q.shape, dtype=bool)
    )
    rows = _indexed_rows(grid.all_centers, mask, power.q)
    written = [write_csv(
        directory / f"{name}.csv", digest,
        ["i", "j", "k", "x", "y", "z", "q_w_per_m3"], rows,
    )]
    if vtk:
        fields = {"q": power.q}
        if power.e_squared is not None:
            fields["e_squared"] = power.e_squared
        if voxels is not None:
            fields["material"] = voxels.material_index
        written.append(write_vtk(
            directory / f"{name}.vtk", digest, (0.0, 0.0, 0.0),
            grid.spacing, fields,
        ))
    return written
