import numpy as np
import pytest

from open_oven import cli
from open_oven.emsolve import PowerMap

from .conftest import SMALL_HEAT_YAML

SMALL_SCENE_YAML = """\
scene:
  cavity: {a: 10.0e-3, b: 10.0e-3, l_d: 9.0e-3, l_air: 1.0e-3}
  sample: {material: solder-sample, side: 4.0e-3}
"""


def sigma_power_solver(scene, grid, *args, **kwargs):
    """Stand-in for the FDTD solve: dissipation proportional to sigma."""

    def solve(medium, freq):
        return PowerMap(
            q=medium.sigma.copy(), cell_volume=grid.cell_volume, freq=freq
        ).per_watt()

    return solve


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_modes_from_flags(capsys):
    code = cli.main([
        "modes", "--a", "25.5e-3", "--b", "25.5e-3", "--ld", "0.1",
        "--epsr", "6",
    ])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("# open_oven ")
    assert lines[1].startswith("# config_sha256 ")
    assert lines[2] == "m,n,branch,freq_hz,beta_d_per_m,alpha_air_per_m"
    freqs = [float(line.split(",")[3]) for line in lines[3:]]
    assert any(abs(f - 10.424e9) / 10.424e9 < 0.01 for f in freqs)


def test_modes_flags_write_the_same_table_to_a_file(tmp_path, capsys):
    flags = [
        "modes", "--a", "25.5e-3", "--b", "25.5e-3", "--ld", "0.1",
        "--epsr", "6",
    ]
    assert cli.main(flags) == 0
    printed = capsys.readouterr().out.splitlines()
    target = tmp_path / "modes.csv"
    assert cli.main(flags + ["--out", str(target)]) == 0
    assert capsys.readouterr().out == ""
    written = target.read_text().splitlines()
    assert written[0].startswith("# open_oven ")
    assert written[2:] == printed[2:]


def test_modes_flags_need_geometry():
    assert cli.main(["modes", "--a", "25.5e-3"]) == 1
    assert cli.main([
        "modes", "--a", "-1", "--b", "1", "--ld", "1", "--epsr", "6",
    ]) == 1


def test_modes_config_is_reproducible(tmp_path, monkeypatch):
    outputs = []
    for run in ("one", "two"):
        workdir = tmp_path / run
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        config = write(workdir / "modes.yaml", "scenario: modes\n")
        assert cli.main(["modes", "--config", config]) == 0
        outputs.append((workdir / "out" / "modes.csv").read_bytes())
    assert outputs[0] == outputs[1]
    lines = outputs[0].decode().splitlines()
    assert lines[2] == "m,n,branch,freq_hz,beta_d_per_m,alpha_air_per_m"
    assert len(lines) > 3


def test_validate_reports_config_errors(tmp_path):
    bad = write(
        tmp_path / "bad.yaml",
        "scenario: modes\nscene:\n  sample: {material: unobtainium}\n",
    )
    assert cli.main(["modes", "--config", bad, "--validate"]) == 1
    good = write(tmp_path / "good.yaml", "scenario: modes\n")
    assert cli.main(["modes", "--config", good, "--validate"]) == 0


def test_subcommand_must_match_scenario(tmp_path):
    config = write(tmp_path / "run.yaml", "scenario: modes\n")
    assert cli.main(["control", "--config", config]) == 1


def test_spectrum_writes_peak_table(tmp_path, monkeypatch):
    freqs = np.linspace(10.0e9, 10.8e9, 801)

    def lorentz(f0, q):
        return 1.0 / np.sqrt(1.0 + (2.0 * q * (freqs - f0) / f0) ** 2)

    amps = np.maximum(lorentz(10.2e9, 200), lorentz(10.6e9, 100))
    monkeypatch.setattr(
        cli, "run_spectrum", lambda *a, **k: list(zip(freqs, amps))
    )
    config = write(
        tmp_path / "spectrum.yaml",
        "scenario: spectrum\n" + SMALL_SCENE_YAML
        + f"output: {{directory: '{tmp_path / 'out'}'}}\n",
    )
    assert cli.main(["spectrum", "--config", config]) == 0
    peaks = (tmp_path / "out" / "peaks.csv").read_text().splitlines()
    assert peaks[2] == "freq_hz,amplitude,q,overlap"
    rows = [line.split(",") for line in peaks[3:]]
    assert len(rows) == 2
    assert float(rows[0][0]) == pytest.approx(10.2e9, rel=1e-4)
    assert float(rows[0][2]) == pytest.approx(200, rel=0.05)
    assert rows[0][3] == "false"
    spectrum = (tmp_path / "out" / "spectrum.csv").read_text().splitlines()
    assert len(spectrum) == 3 + 801


def test_heat_run_outputs_are_reproducible(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "default_power_solver", sigma_power_solver)
    summaries = []
    for run in ("one", "two"):
        workdir = tmp_path / run
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        config = write(workdir / "heat.yaml", SMALL_HEAT_YAML)
        assert cli.main(["heat", "--config", config]) == 0
        out = workdir / "out"
        summaries.append((out / "run_summary.csv").read_bytes())
        for ms in ("000000000", "000002000", "000004000"):
            for ext in ("csv", "vtk", "png"):
                assert (out / f"snapshot_{ms}ms.{ext}").exists()
        assert (out / "power_map_10400MHz.csv").exists()
        assert (out / "power_map_10400MHz.vtk").exists()
    assert summaries[0] == summaries[1]
    rows = summaries[0].decode().splitlines()
    assert rows[2].startswith("t_s,target_K,measured_K,power_W")
    assert len(rows) == 3 + 5


def test_control_run_with_companion(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "default_power_solver", sigma_power_solver)
    monkeypatch.chdir(tmp_path)
    text = """\
scenario: control
drive: {frequency: 1.04e+10}
profile: [[0, 293.15], [3, 296.15]]
controller: {kp: 0.05, ki: 0.001, u_max: 1}
coupling: {companion: true}
output: {vtk: false, images: false}
""" + SMALL_SCENE_YAML
    config = write(tmp_path / "control.yaml", text)
    assert cli.main(["control", "--config", config]) == 0
    main_rows = (tmp_path / "out" / "run_summary.csv").read_text()
    replay = tmp_path / "out" / "companion" / "run_summary.csv"
    main_powers = [r.split(",")[3] for r in main_rows.splitlines()[3:]]
    replay_powers = [
        r.split(",")[3] for r in replay.read_text().splitlines()[3:]
    ]
    assert main_powers == replay_powers
    assert not list((tmp_path / "out").glob("*.vtk"))
