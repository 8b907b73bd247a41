"""Serialization of reports: CSV with schema sidecars, JSON, binary snapshots.

File names are fixed per report kind, numbers are written with ``repr`` so
JSON and CSV round-trip exactly, and any NaN or infinity aborts the write.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SNAPSHOT_HEADER = struct.Struct("<q3d")


class NonFiniteError(ValueError):
    def __init__(self, producer: str, where: str):
        self.producer = producer
        super().__init__(f"non-finite value in {where} (produced by {producer}); refusing to write")


class EmitError(OSError):
    pass


@dataclass(frozen=True)
class Column:
    name: str
    description: str


@dataclass(frozen=True)
class Table:
    name: str
    producer: str
    columns: tuple[Column, ...]
    rows: list[tuple]


def _check_finite(value, producer: str, where: str):
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        raise NonFiniteError(producer, where)
    if isinstance(value, dict):
        for k, v in value.items():
            _check_finite(v, producer, f"{where}.{k}")
    elif isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _check_finite(v, producer, f"{where}[{i}]")
    elif isinstance(value, np.ndarray):
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(producer, where)


def _plain(value):
    """numpy scalars and arrays to built-in types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _ensure_dir(out_dir: Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise EmitError(f"cannot create output directory {out}: {exc}") from exc
    return out


def write_table(table: Table, out_dir: Path) -> list[Path]:
    """``<name>.csv`` plus ``<name>.schema.json`` describing the columns."""
    for i, row in enumerate(table.rows):
        _check_finite(list(row), table.producer, f"{table.name}.csv row {i}")
    out = _ensure_dir(out_dir)
    path = out / f"{table.name}.csv"
    schema = out / f"{table.name}.schema.json"
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([c.name for c in table.columns])
            for row in table.rows:
                w.writerow([_cell(v) for v in row])
        schema.write_text(
            json.dumps(
                {
                    "file": path.name,
                    "producer": table.producer,
                    "columns": [{"name": c.name, "description": c.description} for c in table.columns],
                },
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )
    except OSError as exc:
        raise EmitError(f"failed writing {path}: {exc}") from exc
    return [path, schema]


def write_json(obj, name: str, producer: str, out_dir: Path) -> Path:
    _check_finite(obj, producer, f"{name}.json")
    out = _ensure_dir(out_dir)
    path = out / f"{name}.json"
    try:
        path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    except OSError as exc:
        raise EmitError(f"failed writing {path}: {exc}") from exc
    return path


def read_table(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# report kinds
# ---------------------------------------------------------------------------


def norm_table(reports: Sequence) -> Table:
    cols = (
        Column("which", "cutoff quantity"),
        Column("eps", "inner radius"),
        Column("alpha", "outer radius divided by eps"),
        Column("q", "Lebesgue exponent"),
        Column("numeric", "radial quadrature of the q-th power of the norm"),
        Column("closed_form", "exact value where one exists, else empty"),
        Column("rel_err", "|numeric - closed_form| / closed_form, else empty"),
        Column("bound_ratio", "numeric divided by the shape of the upper bound (smooth cutoff), else empty"),
    )
    rows = [(r.which, r.eps, r.alpha, r.q, r.numeric, r.closed_form, r.rel_err, r.bound_ratio) for r in reports]
    return Table("cutoff_norms", "cutoff", cols, rows)


def rate_table(table) -> Table:
    cols = (
        Column("eps", "hole radius"),
        Column("value", "||Phi - phi||_p / ||phi||_{W^{1,q}}"),
        Column("gradient", "||grad Phi - n grad phi||_p / ||phi||_{W^{1,q}}"),
        Column("divergence", "||div Phi - n div phi||_p / ||phi||_{W^{1,q}}"),
    )
    rows = [(r.eps, r.value, r.gradient, r.divergence) for r in (table.rows if table else [])]
    return Table("testfn_rates", "adhoc_testfn", cols, rows)


def uniformity_table(rows) -> Table:
    cols = (
        Column("eps", "hole radius"),
        Column("w1p_ratio", "||B f||_{W^{1,p}} / ||f||_{L^p}"),
        Column("div_form_ratio", "||B div F||_{L^q} / ||F||_{L^q}"),
        Column("residual", "largest L2 divergence residual of the two solves"),
    )
    return Table("bogovskii_uniformity", "bogovskii", cols, [(r.eps, r.w1p_ratio, r.div_form_ratio, r.residual) for r in rows])


def monitor_table(series) -> Table:
    desc = {
        "t": "time",
        "mass": "sum rho h^2",
        "energy": "kinetic plus internal energy",
        "dissipation": "int mu |grad u|^2 + lambda |div u|^2",
        "dissipation_integral": "time integral of the dissipation up to t",
        "pressure_integral": "int rho^gamma",
        "rho_min": "minimum density over fluid cells",
        "steps": "time steps taken up to t",
    }
    cols = tuple(Column(c, desc[c]) for c in series.COLUMNS)
    return Table("monitors", "cns_solver", cols, series.rows())


def metric_tables(report) -> list[Table]:
    """One ``metric_<name>.csv`` per sweep metric with x = eps and y = metric."""
    names = {
        "a": ("metric_a", "weak-in-time density proxy"),
        "b": ("metric_b", "L2(0,T;L2) velocity difference"),
        "c": ("metric_c", "weak momentum proxy with the ad hoc correction"),
        "pressure": ("pressure_functional", "int int outside B_2eps of rho^(gamma + theta)"),
    }
    tables = []
    for key, (attr, text) in names.items():
        rows = [(r.eps, getattr(r, attr)) for r in report.perforated() if r.error is None]
        tables.append(Table(f"metric_{key}", "homog_experiment", (Column("eps", "hole radius"), Column("value", text)), rows))
    cmp_rows = []
    for r in report.perforated():
        if r.error is not None:
            continue
        for j, (a, b) in enumerate(zip(r.pressure_adhoc, r.pressure_naive)):
            cmp_rows.append((r.eps, j, a, b))
    tables.append(
        Table(
            "pressure_comparison",
            "homog_experiment",
            (
                Column("eps", "hole radius"),
                Column("phi_index", "index into metadata.phi_battery"),
                Column("adhoc", "time-L1 of int rho^gamma (div Phi - n div phi)"),
                Column("naive", "time-L1 of int rho^gamma phi . grad n"),
            ),
            cmp_rows,
        )
    )
    return tables


def emit(report, fmt: str, out_dir: Path) -> list[Path]:
    """Write a report; ``fmt`` is ``csv`` or ``json``. Returns the written paths."""
    from .experiment import SweepReport
    from .testfn import RateTable

    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    files: list[Path] = []
    if isinstance(report, SweepReport):
        files.append(write_json(report.to_dict(), "sweep", "homog_experiment", out))
        if fmt == "csv":
            for t in metric_tables(report):
                files += write_table(t, out)
        return files
    if isinstance(report, RateTable):
        t = rate_table(report)
        if fmt == "json":
            return [write_json({"phi": report.phi, "p": report.p, "q": report.q, "rows": t.rows}, t.name, t.producer, out)]
        return write_table(t, out)
    if isinstance(report, Table):
        if fmt == "json":
            return [write_json({"columns": [c.name for c in report.columns], "rows": report.rows}, report.name, report.producer, out)]
        return write_table(report, out)
    if isinstance(report, (list, tuple)):
        if len(report) == 0:
            raise ValueError("empty list: wrap it in a Table to choose the columns")
        first = report[0]
        if hasattr(first, "closed_form"):
            return emit(norm_table(report), fmt, out)
        if hasattr(first, "w1p_ratio"):
            return emit(uniformity_table(report), fmt, out)
    raise TypeError(f"don't know how to emit {type(report).__name__}")


# ---------------------------------------------------------------------------
# binary snapshots
# ---------------------------------------------------------------------------


def write_snapshot(path: Path, n: int, L: float, eps: float, t: float, rho, mx, my) -> Path:
    """Little-endian: int64 n, float64 L, eps, t; then rho (n, n), mx (n+1, n), my (n, n+1), row-major."""
    for name, a in (("rho", rho), ("mx", mx), ("my", my)):
        if not np.all(np.isfinite(a)):
            raise NonFiniteError("cns_solver", f"snapshot {name}")
    path = Path(path)
    _ensure_dir(path.parent)
    with path.open("wb") as fh:
        fh.write(SNAPSHOT_HEADER.pack(int(n), float(L), float(eps), float(t)))
        for a, shape in ((rho, (n, n)), (mx, (n + 1, n)), (my, (n, n + 1))):
            arr = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
            if arr.shape != shape:
                raise ValueError(f"expected shape {shape}, got {arr.shape}")
            fh.write(arr.tobytes(order="C"))
    return path


def read_snapshot(path: Path):
    data = Path(path).read_bytes()
    n, L, eps, t = SNAPSHOT_HEADER.unpack_from(data, 0)
    off = SNAPSHOT_HEADER.size
    out = []
    for shape in ((n, n), (n + 1, n), (n, n + 1)):
        size = shape[0] * shape[1]
        out.append(np.frombuffer(data, dtype="<f8", count=size, offset=off).reshape(shape).copy())
        off += 8 * size
    if off != len(data):
        raise ValueError(f"snapshot {path} has {len(data) - off} trailing bytes")
    return {"n": n, "L": L, "eps": eps, "t": t, "rho": out[0], "mx": out[1], "my": out[2]}


def files_listing(paths: Iterable[Path]) -> list[str]:
    return sorted(str(p) for p in paths)
