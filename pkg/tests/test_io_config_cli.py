import csv
import io
import math
import struct
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings

from _helpers import trains
from ttkinetic.cli import EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NONFINITE, EXIT_OK, EXIT_SELFTEST, main
from ttkinetic.config import ConfigError, parse_config, parse_number
from ttkinetic.io import TT3_MAGIC, format_real, read_tt3, read_tt3_file, write_csv, write_tt3, write_tt3_file
from ttkinetic.tt_core import TensorTrain3, tt_to_full

RNG = np.random.default_rng

BGK = """
[model]
name = bgk_homog
eta = 1
scheme = euler
rank = 5, 5
[velocity]
v_min = -8
v_max = 8
n_v = 16
[time]
t_final = 1
dt = {dt}
"""

LANDAU = """
[model]
name = vafp
eta = 0
[velocity]
v_min = -9
v_max = 9
n_v = 16
[space]
length = 4*pi
n_x = 16
[time]
t_final = 0.5
dt_rule = vafp
[initial]
kind = landau
A = 0.001
kappa = 0.5
[output]
field_times = 0.25
phase = true
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -------------------------------------------------------------------- TT3v1


def test_tt3_record_layout():
    a = TensorTrain3.random((2, 3, 4), (2, 1), RNG(0))
    buf = io.BytesIO()
    write_tt3(buf, a)
    raw = buf.getvalue()
    assert raw[:5] == TT3_MAGIC
    assert struct.unpack("<5Q", raw[5:45]) == (2, 3, 4, 2, 1)
    body = np.frombuffer(raw[45:], dtype="<f8")
    n1, n2 = a.core1.size, a.core2.size
    np.testing.assert_array_equal(body[:n1], a.core1.ravel())
    np.testing.assert_array_equal(body[n1:n1 + n2], a.core2.ravel())
    np.testing.assert_array_equal(body[n1 + n2:], a.core3.ravel())
    assert len(raw) == 45 + 8 * (a.core1.size + a.core2.size + a.core3.size)


@settings(max_examples=30, deadline=None)
@given(trains())
def test_property_tt3_round_trip_is_bit_exact(a):
    buf = io.BytesIO()
    write_tt3(buf, a)
    buf.seek(0)
    b = read_tt3(buf)
    for x, y in zip(a.cores, b.cores):
        np.testing.assert_array_equal(x, y)


def test_tt3_field_file_round_trip(tmp_path):
    f = TensorTrain3.random((3, 4, 5), (2, 3), RNG(1), batch=(4,))
    write_tt3_file(tmp_path / "f.tt3", f)
    recs = read_tt3_file(tmp_path / "f.tt3")
    assert len(recs) == 4
    for j, r in enumerate(recs):
        np.testing.assert_array_equal(tt_to_full(r), tt_to_full(f[j]))


def test_tt3_rejects_corruption():
    buf = io.BytesIO(b"TT3v2" + bytes(40))
    with pytest.raises(ValueError, match="magic"):
        read_tt3(buf)
    good = io.BytesIO()
    write_tt3(good, TensorTrain3.random((2, 2, 2), (1, 1), RNG(2)))
    with pytest.raises(ValueError, match="truncated"):
        read_tt3(io.BytesIO(good.getvalue()[:-3]))


# ---------------------------------------------------------------------- CSV


def test_format_real():
    assert format_real(0.1) == "0.10000000000000001"
    assert float(format_real(math.pi)) == math.pi
    assert format_real(3) == "3"
    assert format_real(None) == ""
    assert format_real(float("nan")) == "nan" and format_real(-float("inf")) == "-inf"


def test_csv_layout(tmp_path):
    write_csv(tmp_path / "a.csv", ("t", "x"), [(0.5, None), (1, 2.0)])
    assert (tmp_path / "a.csv").read_bytes() == b"t,x\r\n0.5,\r\n1,2\r\n"


# ------------------------------------------------------------------- config


def test_parse_number_grammar():
    assert parse_number("1/32") == 1 / 32
    assert parse_number(" 4*pi ") == 4 * math.pi
    assert parse_number("-2**3") == -8
    assert parse_number("1e-5") == 1e-5
    for bad in ("pi()", "x", "1/0", "__import__('os')", "True", "1e400"):
        with pytest.raises(ConfigError):
            parse_number(bad)


def test_parse_config_values():
    run = parse_config(LANDAU)
    m = run.model
    assert m.model == "vafp" and m.length == 4 * math.pi and m.n_x == 16
    assert m.ic["kind"] == "landau" and m.ic["A"] == 0.001
    assert run.field_times == (0.25,) and run.phase and run.cadence == 1
    run = parse_config(BGK.format(dt="1/64") + "[initial]\nu1 = 1, -0.5, 1\n")
    assert run.model.dt == 1 / 64 and run.model.ic["u1"] == (1.0, -0.5, 1.0)


@pytest.mark.parametrize("text,msg", [
    ("[model]\neta = 1\n", "name"),
    (BGK.format(dt="1/32") + "[bogus]\n", "section"),
    (BGK.format(dt="1/32").replace("n_v = 16", "nv = 16"), "nv"),
    (BGK.format(dt="1/32").replace("n_v = 16", "n_v = 16.5"), "integer"),
    (BGK.format(dt="1/32") + "[output]\ncadence = 0\n", "cadence"),
    (BGK.format(dt="1/32") + "[output]\nenergy = maybe\n", "boolean"),
    (BGK.format(dt="1/32") + "[initial]\ntemperature = 2\n", "initial-condition"),
    (BGK.format(dt="1/32") + "[convergence]\nparameter = dx\nvalues = 1, 2\n", "parameter"),
    (BGK.format(dt="1/32") + "[convergence]\nvalues = 1\n", "two"),
    ("not an ini file", "syntax"),
])
def test_parse_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


# ---------------------------------------------------------------------- CLI


def test_malformed_config_exits_without_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", "[model]\nname = bgk_homog\n[time]\ndt = abc\n")
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--output-dir", str(out)]) == EXIT_CONFIG
    assert not out.exists()
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("ABORT reason=config")


def test_exit_codes_are_distinct():
    assert len({EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NONFINITE}) == 5


def test_degenerate_abort_reports_location(tmp_path, capsys):
    # explicit Fokker-Planck far beyond its stability limit drives the density negative
    text = LANDAU.replace("eta = 0", "eta = 50").replace("dt_rule = vafp", "dt = 0.05")
    cfg = write(tmp_path, "blow.ini", text)
    code = main(["run", str(cfg), "--output-dir", str(tmp_path / "o")])
    assert code in (EXIT_DEGENERATE, EXIT_NONFINITE)
    line = capsys.readouterr().err.strip().splitlines()[-1]
    assert line.startswith("ABORT reason=")
    for key in ("step=", "t=", "j=", "substep="):
        assert key in line
    assert (tmp_path / "o" / "timeseries.csv").exists()


def test_bgk_refinement_lowers_final_error(tmp_path):
    errs = []
    for dt in ("1/64", "1/128"):
        cfg = write(tmp_path, f"bgk{dt[2:]}.ini", BGK.format(dt=dt))
        assert main(["run", str(cfg), "--output-dir", str(tmp_path / dt[2:])]) == EXIT_OK
        rows = read_rows(tmp_path / dt[2:] / "timeseries.csv")
        assert rows[0] == ["step", "t", "energy", "R1", "R2", "mass", "relative_error"]
        assert float(rows[-1][1]) == 1.0
        errs.append(float(rows[-1][-1]))
    assert errs[1] < errs[0]


def test_landau_run_outputs(tmp_path, capsys):
    cfg = write(tmp_path, "landau.ini", LANDAU)
    out = tmp_path / "o"
    assert main(["run", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    rows = read_rows(out / "timeseries.csv")[1:]
    assert all(r[3] == "1" and r[4] == "1" for r in rows)
    fields = read_rows(out / "fields.csv")
    assert fields[0] == ["t", "j", "x", "n", "u1", "T"]
    times = sorted({float(r[0]) for r in fields[1:]})
    assert times[0] == 0.0 and times[-1] == 0.5 and len(times) == 3
    assert len(fields) - 1 == 3 * 16
    phase = read_rows(out / "phase.csv")
    assert phase[0] == ["t", "j", "x", "k", "v1", "g"]
    assert len(phase) - 1 == 3 * 16 * 16


def test_run_is_deterministic(tmp_path):
    cfg = write(tmp_path, "landau.ini", LANDAU)
    outs = []
    for name in ("a", "b"):
        assert main(["run", str(cfg), "--output-dir", str(tmp_path / name), "--threads", "1"]) == EXIT_OK
        outs.append([(tmp_path / name / f).read_bytes() for f in ("timeseries.csv", "fields.csv", "phase.csv")])
    assert outs[0] == outs[1]


def test_cadence_and_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("TTKINETIC_OUTPUT_ROOT", str(tmp_path / "root"))
    cfg = write(tmp_path, "bgk.ini", BGK.format(dt="1/32"))
    assert main(["run", str(cfg), "--cadence", "8"]) == EXIT_OK
    rows = read_rows(tmp_path / "root" / "bgk" / "timeseries.csv")[1:]
    assert [int(r[0]) for r in rows] == [0, 8, 16, 24, 32]


def test_snapshots_written(tmp_path):
    cfg = write(tmp_path, "bgk.ini", BGK.format(dt="1/4") + "[output]\nsnapshots = true\n")
    assert main(["run", str(cfg), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    snaps = sorted((tmp_path / "o").glob("snapshot_*.tt3"))
    assert len(snaps) == 5
    rec = read_tt3_file(snaps[-1])
    assert len(rec) == 1 and rec[0].rank == (5, 5)


def test_convergence_command(tmp_path, capsys):
    text = BGK.format(dt="1/32") + "[convergence]\nparameter = dt\nvalues = 1/8, 1/16, 1/32\n"
    cfg = write(tmp_path, "conv.ini", text)
    assert main(["convergence", str(cfg), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    rows = read_rows(tmp_path / "o" / "convergence.csv")
    assert rows[0] == ["level", "parameter", "h", "dt", "error", "fitted_order"]
    assert len(rows) == 4
    assert 0.8 <= float(rows[1][-1]) <= 1.2


def test_convergence_requires_exact_solution(tmp_path):
    cfg = write(tmp_path, "c.ini", LANDAU + "[convergence]\nvalues = 0.1, 0.05\n")
    assert main(["convergence", str(cfg), "--output-dir", str(tmp_path / "o")]) == EXIT_CONFIG


def test_selftest_passes_and_is_deterministic(capsys):
    assert main(["selftest", "--seed", "3"]) == EXIT_OK
    first = capsys.readouterr().out
    assert main(["selftest", "--seed", "3"]) == EXIT_OK
    assert capsys.readouterr().out == first
    assert first.strip().endswith("selftest passed")


def test_selftest_fault_injection_is_located(capsys):
    assert main(["selftest", "--inject-fault", "shape"]) == EXIT_SELFTEST
    out = capsys.readouterr().out
    assert "FAIL form_shapes" in out
    assert "core shape" in out and "->" in out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "ttkinetic", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "selftest" in r.stdout


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.ini"))
    assert len(files) >= 7
    for f in files:
        parse_config(f.read_text())
