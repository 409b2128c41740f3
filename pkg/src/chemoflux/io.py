"""Monitor CSV tables, study tables and binary field snapshots."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .grid import GridSpec, ScalarField
from .monitors import MonitorRecord

MAGIC = "CHEMOFLUX"
VERSION = "v1"


def _num(x) -> str:
    return format(float(x), ".17g")


def monitor_header(qlist) -> list:
    return (["t", "dt", "mass", "min_u", "max_u"]
            + [f"l2q_{q:g}" for q in qlist]
            + ["grad_v_max", "grad_energy_cum", "elliptic_residual"])


def write_monitor_csv(series, path) -> None:
    if not series:
        raise ValueError("nothing to write")
    qlist = [q for q, _ in series[0].lq]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(monitor_header(qlist))
        for rec in series:
            w.writerow([_num(x) for x in rec.as_row()])


def read_monitor_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    qcols = [h for h in header if h.startswith("l2q_")]
    qlist = [float(h[4:]) for h in qcols]
    out = []
    for row in body:
        vals = dict(zip(header, (float(x) for x in row)))
        out.append(MonitorRecord(
            t=vals["t"], dt=vals["dt"], mass=vals["mass"], min_u=vals["min_u"],
            max_u=vals["max_u"], lq=tuple((q, vals[c]) for q, c in zip(qlist, qcols)),
            grad_v_max=vals["grad_v_max"], grad_energy_cum=vals["grad_energy_cum"],
            elliptic_residual=vals["elliptic_residual"]))
    return out


def write_table(columns, rows, path) -> None:
    """CSV with floats at full precision; other values via ``str``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_num(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def write_snapshot(field: ScalarField, spec: GridSpec, path) -> None:
    """One ASCII header line, then the cell values as little-endian float64."""
    if field.spec != spec:
        raise ValueError("field does not live on this grid")
    parts = [MAGIC, VERSION, spec.kind]
    parts += [str(c) for c in spec.cells]
    parts += [repr(float(e)) for e in spec.extents]
    parts.append(str(spec.dim))
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write((" ".join(parts) + "\n").encode("ascii"))
        fh.write(payload)


def read_snapshot(path):
    """Return ``(field, spec)``.  Raises ``ValueError`` on a bad header or a
    truncated payload."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0:
        raise ValueError("missing snapshot header")
    try:
        head = data[:nl].decode("ascii").split()
    except UnicodeDecodeError:
        raise ValueError("snapshot header is not ASCII") from None
    if len(head) < 3 or head[0] != MAGIC or head[1] != VERSION:
        raise ValueError(f"not a {MAGIC} {VERSION} snapshot")
    kind = head[2]
    naxes = 2 if kind == "cartesian2d" else 1
    if len(head) != 3 + 2 * naxes + 1:
        raise ValueError("malformed snapshot header")
    cells = tuple(int(x) for x in head[3:3 + naxes])
    extents = tuple(float(x) for x in head[3 + naxes:3 + 2 * naxes])
    spec = GridSpec(kind, cells, extents, int(head[-1]))
    payload = data[nl + 1:]
    expect = 8 * math.prod(cells)
    if len(payload) != expect:
        raise ValueError(f"snapshot payload has {len(payload)} bytes, expected {expect}")
    values = np.frombuffer(payload, dtype="<f8").astype(float).reshape(cells)
    return ScalarField(values, spec), spec
