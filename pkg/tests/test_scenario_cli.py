import csv
import dataclasses
import io

import numpy as np
import pytest

from stratwave import cli, scenario as scn, waveguide as wg
from stratwave.records import record_from_csv


def read_csv(text):
    rows = [r for r in csv.reader(io.StringIO(text))]
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.mark.parametrize("name", sorted(scn.PRESETS))
def test_presets_validate(name):
    sc = scn.preset(name)
    assert sc.cell == pytest.approx(1 / 3) and sc.tol_modes == 1e-6
    assert len(sc.receivers) == 5
    assert scn.load_scenario(sc.to_ini()) == sc


def test_preset_geometry():
    lines = {"example1": (10, 10, 90), "example1-r11": (70, 10, 90), "example2": (60, 60, 40),
             "example2-r21": (60, 60, 60), "example3": (60, 60, 30), "example4": (60, 60, 80),
             "example4-r41": (60, 60, 90)}
    for name, (x, y0, z) in lines.items():
        sc = scn.preset(name)
        want = [(x, y0 + 5 * n, z) for n in range(5)]
        assert np.array_equal(np.array(sc.receivers), np.array(want, dtype=float))
    ex4 = scn.preset("example4")
    assert ex4.source == (18.0, 18.0, 45.0)
    assert ex4.inclusion_box == ((46.0, 48.0), (32.0, 34.0), (42.0, 44.0))
    assert ex4.region_box == ((10.0, 40.0), (10.0, 40.0), (25.0, 55.0))
    ex3 = scn.preset("example3")
    assert ex3.source == (18.0, 18.0, 25.0)
    assert ex3.inclusion_box == ((32.0, 34.0), (32.0, 34.0), (42.0, 44.0))
    assert ex3.region_box == ((10.0, 40.0),) * 3
    full = scn.preset("example3", full_scale=True)
    assert full.cell == pytest.approx(1 / 15) and full.tol_modes == 1e-8


def test_unknown_preset():
    with pytest.raises(scn.ConfigError, match="unknown preset"):
        scn.preset("example9")


BASE = """\
# Example 3 at desk scale
[waveguide]
h = 100
d1 = 100/3
d2 = 200/3

[inclusion]
box = 32 34, 32 34, 42 44
q4_ratio = 1.1

[source]
position = 18, 18, 25

[receivers]
start = 60, 60, 30
step = 0, 5, 0
count = 5

[noise]
delta = 0.1
seed = 0

[forward]
cell = 1/3

[locator]
box = 10 40, 10 40, 10 40
s0 = 4
cutoff = 0.95
levels = 3
budget = 20000
"""


def test_handwritten_config_matches_preset():
    sc = scn.load_scenario(BASE)
    ref = scn.preset("example3")
    assert dataclasses.replace(sc, name=ref.name) == ref


@pytest.mark.parametrize("edit, line_of, msg", [
    (("d1 = 100/3", "d1 = abc"), "d1 = abc", "d1"),
    (("cutoff = 0.95", "cutoff = 1.5"), "cutoff = 1.5", "cutoff"),
    (("s0 = 4", "s0 = 4\nspeed = 3"), "speed = 3", "speed"),
    (("count = 5", "count = 0"), "count = 0", "count"),
    (("delta = 0.1", "delta = -0.1"), "delta = -0.1", "non-negative"),
    (("cell = 1/3", "cell = 0.3"), "cell = 0.3", "multiple"),
])
def test_config_errors_carry_line_numbers(edit, line_of, msg):
    text = BASE.replace(*edit)
    line = text.splitlines().index(line_of) + 1
    with pytest.raises(scn.ConfigError) as info:
        scn.load_scenario(text, "bad.ini").validate(locating=True)
    assert msg in str(info.value)
    if msg != "multiple":
        assert info.value.line == line
        assert str(info.value).startswith(f"bad.ini:{line}:")


def test_missing_receivers():
    text = BASE.split("[receivers]")[0] + "[noise]" + BASE.split("[noise]")[1]
    assert "start" not in text
    with pytest.raises(scn.ConfigError, match="receivers"):
        scn.load_scenario(text)


def test_source_outside_region_rejected(tmp_path, capsys):
    cfg = tmp_path / "far.ini"
    cfg.write_text(BASE.replace("position = 18, 18, 25", "position = 5, 18, 25"))
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "out")]) == cli.EXIT_CONFIG
    assert "outside the sampling region" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


@pytest.fixture(scope="module")
def ex3_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "ex3"
    assert cli.main(["run", "--preset", "example3", "--out", str(out)]) == 0
    return out


def test_run_writes_files_and_manifest(ex3_run):
    names = {p.name for p in ex3_run.iterdir()}
    assert names == {"data.csv", "data.json", "locate.json", "levels.csv", "manifest.ini"}
    manifest = (ex3_run / "manifest.ini").read_text()
    assert "cutoff = 0.95" in manifest and "s0 = 4" in manifest
    assert "seed = 0" in manifest and "stratwave = " in manifest
    rec = record_from_csv((ex3_run / "data.csv").read_text())
    assert len(rec) == 5 and rec.delta == 0.1


def test_rerun_bit_identical(ex3_run, tmp_path):
    again = tmp_path / "again"
    assert cli.main(["run", "--preset", "example3", "--out", str(again)]) == 0
    for p in ex3_run.iterdir():
        assert (again / p.name).read_bytes() == p.read_bytes()


def test_rerun_from_manifest(ex3_run, tmp_path):
    out = tmp_path / "from-manifest"
    assert cli.main(["run", str(ex3_run / "manifest.ini"), "--out", str(out)]) == 0
    for p in ex3_run.iterdir():
        assert (out / p.name).read_bytes() == p.read_bytes()


def test_noiseless_rerun_identical(tmp_path):
    sc = dataclasses.replace(scn.preset("example3"), noise=0.0, levels=2)
    a = scn.run_scenario(sc, tmp_path / "a")
    b = scn.run_scenario(sc, tmp_path / "b")
    for name in a.files:
        assert a.files[name].read_bytes() == b.files[name].read_bytes()


def test_malformed_config_exit_and_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(BASE.replace("d1 = 100/3", "d1 = abc"))
    out = tmp_path / "out"
    assert cli.main(["run", str(bad), "--out", str(out)]) == cli.EXIT_CONFIG
    assert "bad.ini:" in capsys.readouterr().err
    assert not out.exists()
    assert [p.name for p in tmp_path.iterdir()] == ["bad.ini"]


def test_solver_error_exit(tmp_path):
    cfg = tmp_path / "big.ini"
    cfg.write_text(BASE.replace("q4_ratio = 1.1", "q4_ratio = 60"))
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == cli.EXIT_SOLVER
    assert not out.exists()


def test_budget_exit(tmp_path):
    cfg = tmp_path / "tight.ini"
    cfg.write_text(BASE.replace("budget = 20000", "budget = 600"))
    out = tmp_path / "out"
    assert cli.main(["run", str(cfg), "--out", str(out)]) == cli.EXIT_PARTIAL
    assert '"partial": true' in (out / "locate.json").read_text()


def test_mode_table_reference_config():
    basis, table, profiles = cli.modes_tables(scn.preset("example3"))
    head, rows = read_csv(table)
    assert head == ["n", "xi_re", "xi_im", "W_re", "W_im", "norm"]
    assert rows.shape[0] >= 20 and rows.shape[0] == len(basis)
    phead, prof = read_csv(profiles)
    assert phead[0] == "x3" and len(phead) == 21
    assert np.all(prof[0, 1:] == 0.0)


def test_mode_table_homogeneous_matches_analytic():
    cfg = wg.WaveguideConfig.homogeneous(k=0.3, h=100.0)
    sc = dataclasses.replace(scn.preset("example3"), waveguide=cfg)
    _, table, _ = cli.modes_tables(sc)
    _, rows = read_csv(table)
    real = rows[rows[:, 2] == 0.0]
    n = np.arange(1, real.shape[0] + 1)
    want = np.sqrt(0.3 ** 2 - ((n - 0.5) * np.pi / 100.0) ** 2)
    assert np.max(np.abs(real[:, 1] - want)) <= 1e-9
    assert np.all(rows[rows[:, 2] != 0.0][:, 1] == 0.0)


def test_mode_table_no_evanescent_at_tol_one():
    sc = dataclasses.replace(scn.preset("example3"), tol_modes=1.0)
    basis, table, _ = cli.modes_tables(sc)
    _, rows = read_csv(table)
    assert basis.n_evanescent == 0 and np.all(rows[:, 2] == 0.0)


def test_modes_cli(tmp_path):
    out = tmp_path / "modes"
    assert cli.main(["modes", "--preset", "example3", "--out", str(out), "--depths", "11"]) == 0
    assert (out / "modes.csv").exists() and (out / "profiles.csv").exists()


@pytest.fixture(scope="module")
def source_slice():
    sc = scn.preset("point-source")
    g, text = cli.field_slice(sc, "y=0", span=(-60.0, 60.0), n_h=41, n_z=51)
    return g, text


def test_field_slice_boundary_and_symmetry(source_slice):
    g, text = source_slice
    top = np.abs(g[:, 0])
    assert np.all(top <= 1e-6 * np.abs(g).max())
    assert np.allclose(g, g[::-1], rtol=1e-12, atol=0)
    head, rows = read_csv(text)
    assert head == ["x", "y", "z", "re", "im", "abs"] and rows.shape[0] == g.size


def test_field_slice_ducted_amplitude(source_slice):
    g, _ = source_slice
    mid = np.abs(g[:, 20:30])
    assert np.all(np.isfinite(g)) and np.all(mid > 0)


def test_field_cli(tmp_path):
    out = tmp_path / "f" / "slice.csv"
    argv = ["field", "--preset", "point-source", "--plane", "x=0", "--nh", "5", "--nz", "5",
            "--out", str(out)]
    assert cli.main(argv) == 0 and out.exists()
    assert cli.main(["field", "--preset", "point-source", "--plane", "z=3"]) == cli.EXIT_CONFIG


def test_cli_needs_one_input(capsys):
    assert cli.main(["run"]) == cli.EXIT_CONFIG
    assert "exactly one" in capsys.readouterr().err
