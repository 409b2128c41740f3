import numpy as np
import pytest

from chemoflux.config import parse_config
from chemoflux.experiments import simulate
from chemoflux.grid import GridSpec, ScalarField, make_grid
from chemoflux.io import (
    monitor_header,
    read_monitor_csv,
    read_snapshot,
    write_monitor_csv,
    write_snapshot,
    write_table,
)


@pytest.mark.parametrize("spec", [
    GridSpec("cartesian1d", 17, 2.5),
    GridSpec("cartesian2d", (9, 13), (0.1, 1 / 3)),
    GridSpec("radial", 12, 1.7, 5),
])
def test_snapshot_roundtrip_bit_exact(spec, tmp_path):
    g = make_grid(spec)
    rng = np.random.default_rng(3)
    vals = rng.normal(size=g.shape) * 10.0 ** rng.integers(-300, 300, size=g.shape)
    f = ScalarField(vals, g.spec)
    path = tmp_path / "f.snap"
    write_snapshot(f, spec, path)
    back, spec2 = read_snapshot(path)
    assert spec2 == spec
    assert back.values.tobytes() == f.values.tobytes()
    data = path.read_bytes()
    header, payload = data.split(b"\n", 1)
    assert header.split()[:3] == [b"CHEMOFLUX", b"v1", spec.kind.encode()]
    assert len(payload) == 8 * g.ncells


def test_snapshot_rejects_bad_files(tmp_path):
    g = make_grid(GridSpec("cartesian1d", 8))
    path = tmp_path / "f.snap"
    write_snapshot(ScalarField.full(g, 1.0), g.spec, path)
    data = path.read_bytes()
    bad = tmp_path / "bad.snap"
    bad.write_bytes(data.replace(b"CHEMOFLUX", b"CHEMOFLUY", 1))
    with pytest.raises(ValueError):
        read_snapshot(bad)
    bad.write_bytes(data[:-1])
    with pytest.raises(ValueError):
        read_snapshot(bad)
    bad.write_bytes(data + b"\0" * 8)
    with pytest.raises(ValueError):
        read_snapshot(bad)
    bad.write_bytes(b"no newline")
    with pytest.raises(ValueError):
        read_snapshot(bad)
    with pytest.raises(ValueError):
        write_snapshot(ScalarField.full(g, 1.0), GridSpec("cartesian1d", 9), path)


def small_run():
    cfg = parse_config("grid.kind = cartesian2d\ngrid.cells = 16\nmodel.p = 1.4\n"
                       "initial.width = 0.15\nrun.t_end = 0.3\nrun.monitor_every = 0.05\n"
                       "run.qlist = 1, 2.5\n")
    return simulate(cfg)


def test_monitor_header_exact():
    assert monitor_header((1.0, 2.0, 4.0)) == [
        "t", "dt", "mass", "min_u", "max_u", "l2q_1", "l2q_2", "l2q_4",
        "grad_v_max", "grad_energy_cum", "elliptic_residual"]


def test_monitor_csv_roundtrip(tmp_path):
    res = small_run()
    path = tmp_path / "m.csv"
    write_monitor_csv(res.series, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(monitor_header((1.0, 2.5)))
    assert len(lines) == 1 + len(res.series) == 1 + 7
    assert read_monitor_csv(path) == res.series


def test_monitor_csv_byte_identical_reruns(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_monitor_csv(small_run().series, a)
    write_monitor_csv(small_run().series, b)
    assert a.read_bytes() == b.read_bytes()


def test_monitor_csv_empty_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_monitor_csv([], tmp_path / "x.csv")


def test_write_table(tmp_path):
    path = tmp_path / "t.csv"
    write_table(["a", "b"], [{"a": 0.1, "b": "x"}, {"a": float("inf"), "b": 3}], path)
    assert path.read_text() == "a,b\n0.10000000000000001,x\ninf,3\n"
