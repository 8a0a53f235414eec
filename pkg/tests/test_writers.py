import numpy as np

from open_oven.const import VERSION
from open_oven.emsolve import PowerMap
from open_oven.scene import voxelize
from open_oven.thermocure import ThermalModel
from open_oven.writers import (
    snapshot_name,
    write_csv,
    write_power_map,
    write_snapshot,
    write_vtk,
)
from open_oven.xmap import ThermalGrid

from .conftest import SMALL_GRID, make_small_scene

DIGEST = "ab" * 32


def test_csv_header_and_formatting(tmp_path):
    path = write_csv(
        tmp_path / "t.csv", DIGEST, ["a", "b", "c", "d"],
        [(1, 0.1 + 0.2, None, True), (np.int64(2), np.float64(1e-12), "x",
                                      np.bool_(False))],
    )
    lines = path.read_text().splitlines()
    assert lines[0] == f"# open_oven {VERSION}"
    assert lines[1] == f"# config_sha256 {DIGEST}"
    assert lines[2] == "a,b,c,d"
    assert lines[3] == "1,0.3,,true"
    assert lines[4] == "2,1e-12,x,false"


def test_vtk_is_x_fastest(tmp_path):
    values = np.arange(24, dtype=float).reshape(2, 3, 4)
    path = write_vtk(
        tmp_path / "f.vtk", DIGEST, (0, 0, 0), (1, 1, 1), {"v": values}
    )
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert DIGEST in lines[1]
    assert "DIMENSIONS 3 4 5" in lines
    assert "CELL_DATA 24" in lines
    start = lines.index("LOOKUP_TABLE default") + 1
    data = [float(v) for v in lines[start:start + 24]]
    assert data[:4] == [0.0, 12.0, 4.0, 16.0]
    assert sorted(data) == list(range(24))


def test_snapshot_files(tmp_path, materials):
    scene = make_small_scene()
    grid = ThermalGrid.uniform(scene.sample_region, (2, 2, 1))
    model = ThermalModel.build(scene, grid, materials)
    state = model.initial_state(300.0)
    written = write_snapshot(tmp_path, DIGEST, 2.5, grid, state)
    assert [p.name for p in written] == [
        "snapshot_000002500ms.csv", "snapshot_000002500ms.vtk",
    ]
    rows = written[0].read_text().splitlines()
    assert rows[2] == "i,j,k,x,y,z,T_K,alpha,sigma_Pa"
    assert len(rows) == 3 + 4
    first = rows[3].split(",")
    assert first[:3] == ["0", "0", "0"]
    assert first[6] == "300"
    assert {tuple(r.split(",")[:3]) for r in rows[3:]} == {
        ("0", "0", "0"), ("0", "1", "0"), ("1", "0", "0"), ("1", "1", "0"),
    }
    assert snapshot_name(0.0) == "snapshot_000000000ms"


def test_power_map_lists_every_load_cell(tmp_path, materials):
    voxels = voxelize(make_small_scene(), SMALL_GRID, materials)
    q = np.zeros(SMALL_GRID.shape)
    q[4, 5, 18] = 5.0
    q[0, 0, 0] = 7.0
    pm = PowerMap(q=q, cell_volume=SMALL_GRID.cell_volume, freq=1e10)
    written = write_power_map(tmp_path, DIGEST, "pm", SMALL_GRID, pm,
                              voxels, vtk=False)
    assert len(written) == 1
    rows = written[0].read_text().splitlines()
    assert rows[2] == "i,j,k,x,y,z,q_w_per_m3"
    assert len(rows) == 3 + 16
    assert "4,5,18,0.0045,0.0055,0.00925,5" in rows
    assert sum(r.endswith(",0") for r in rows[3:]) == 15


def test_power_map_without_voxels_lists_every_cell(tmp_path):
    pm = PowerMap(q=np.zeros(SMALL_GRID.shape),
                  cell_volume=SMALL_GRID.cell_volume, freq=1e10)
    written = write_power_map(tmp_path, DIGEST, "pm", SMALL_GRID, pm,
                              vtk=False)
    rows = written[0].read_text().splitlines()
    assert len(rows) == 3 + SMALL_GRID.n_cells
    assert rows[3] == "0,0,0,0.0005,0.0005,0.00025,0"
