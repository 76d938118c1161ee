"""Serialization: report and spectrum CSV, density-matrix JSON, provenance sidecars.

Every float is written with 17 significant digits so values round-trip
exactly.  CSV files start with a ``# schema: <name>/<version>`` comment
line; readers reject unknown versions.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import sys

import numpy as np

from .errors import DimensionError

REPORT_SCHEMA = "aqrm-report/1"
SPECTRUM_SCHEMA = "aqrm-spectrum/1"

REPORT_COLUMNS = (
    "lambda1",
    "lambda2",
    "T",
    "g2_dressed",
    "g2_bare",
    "zeta2",
    "macroscopicity",
    "negativity",
    "discord",
    "mean_photons",
    "fock_cutoff",
    "flags",
)

FLAG_SEPARATOR = ";"


def format_float(x) -> str:
    """17 significant digits; ``None`` and NaN become the empty string."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.17g}"


def parse_float(text: str) -> float | None:
    return None if text == "" else float(text)


def report_row(lambda1: float, lambda2: float, T: float, report, fock_cutoff: int | None = None) -> dict:
    """Flatten one evaluated point into a dict keyed by ``REPORT_COLUMNS``."""
    values = report.values() if report is not None else {}
    cutoff = fock_cutoff
    if cutoff is None and report is not None:
        cutoff = report.convergence.get("fock_cutoff")
    row = {"lambda1": lambda1, "lambda2": lambda2, "T": T}
    for name in REPORT_COLUMNS[3:9]:
        row[name] = values.get(name)
    row["mean_photons"] = getattr(report, "mean_photons", None)
    row["fock_cutoff"] = cutoff
    row["flags"] = list(getattr(report, "flags", []))
    return row


def _render_row(row: dict) -> list[str]:
    out = []
    for col in REPORT_COLUMNS:
        value = row.get(col)
        if col == "flags":
            out.append(FLAG_SEPARATOR.join(value or []))
        elif col == "fock_cutoff":
            out.append("" if value is None else str(int(value)))
        else:
            out.append(format_float(value))
    return out


def write_report_csv(rows, stream) -> None:
    stream.write(f"# schema: {REPORT_SCHEMA}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow(_render_row(row))


def report_csv(rows) -> str:
    buf = io.StringIO()
    write_report_csv(rows, buf)
    return buf.getvalue()


def _check_schema(line: str, expected: str) -> None:
    prefix = "# schema: "
    if not line.startswith(prefix) or line[len(prefix):].strip() != expected:
        raise ValueError(f"expected schema line '{prefix}{expected}', got {line.strip()!r}")


def read_report_csv(stream) -> list[dict]:
    """Inverse of ``write_report_csv``."""
    _check_schema(stream.readline(), REPORT_SCHEMA)
    reader = csv.DictReader(stream)
    if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
        raise ValueError(f"unexpected report columns {reader.fieldnames}")
    rows = []
    for raw in reader:
        row = {col: parse_float(raw[col]) for col in REPORT_COLUMNS[:10]}
        row["fock_cutoff"] = int(raw["fock_cutoff"]) if raw["fock_cutoff"] else None
        row["flags"] = raw["flags"].split(FLAG_SEPARATOR) if raw["flags"] else []
        rows.append(row)
    return rows


def csv_body(text: str) -> str:
    """CSV content without comment lines, for determinism comparisons."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))


def spectrum_columns(levels: int) -> list[str]:
    cols = ["ratio", "coupling", "lambda1", "lambda2", "fock_cutoff"]
    for k in range(levels):
        cols += [f"dE{k}", f"parity{k}"]
    return cols


def write_spectrum_csv(tables, params, swept: str, stream) -> None:
    """Rows of ``(ratio, coupling, lambda1, lambda2, N, E_k - E_0, parity_k ...)``.

    ``tables`` is a sequence of ``(ratio, SpectrumTable)`` with equal level counts.
    """
    tables = list(tables)
    levels = {t.energies.shape[1] for _, t in tables}
    if len(levels) > 1:
        raise ValueError("all spectrum tables must have the same number of levels")
    stream.write(f"# schema: {SPECTRUM_SCHEMA}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(spectrum_columns(levels.pop() if levels else 0))
    for ratio, table in tables:
        for lam, energies, parities in zip(table.couplings, table.energies, table.parities):
            p = params.with_coupling(float(lam), swept, ratio)
            row = [format_float(ratio), format_float(lam), format_float(p.lambda1),
                   format_float(p.lambda2), str(table.fock_cutoff)]
            for e, par in zip(energies, parities):
                row += [format_float(e), str(int(par))]
            writer.writerow(row)


def read_spectrum_csv(stream) -> dict:
    _check_schema(stream.readline(), SPECTRUM_SCHEMA)
    reader = csv.reader(stream)
    header = next(reader)
    levels = (len(header) - 5) // 2
    arr = np.array([[float(x) for x in row] for row in reader], dtype=float).reshape(-1, len(header))
    return {
        "ratio": arr[:, 0],
        "coupling": arr[:, 1],
        "lambda1": arr[:, 2],
        "lambda2": arr[:, 3],
        "fock_cutoff": arr[:, 4].astype(int),
        "energies": arr[:, 5::2].reshape(-1, levels),
        "parities": arr[:, 6::2].astype(int).reshape(-1, levels),
    }


def state_to_json(rho: np.ndarray) -> dict:
    """Density matrix as ``{dim, entries_re, entries_im}`` (row-major, nested lists)."""
    rho = np.asarray(rho, dtype=complex)
    return {"dim": int(rho.shape[0]), "entries_re": rho.real.tolist(), "entries_im": rho.imag.tolist()}


def state_from_json(obj: dict) -> np.ndarray:
    try:
        dim = int(obj["dim"])
        rho = np.asarray(obj["entries_re"], dtype=float) + 1j * np.asarray(obj["entries_im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state object: {exc}") from None
    if rho.shape != (dim, dim):
        raise DimensionError(f"state entries have shape {rho.shape}, expected ({dim}, {dim})")
    return rho


def spec_hash(obj) -> str:
    """SHA-256 of the canonical JSON encoding of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def provenance(spec_obj, cutoffs, wall_time: float, extra: dict | None = None) -> dict:
    """Sidecar metadata for a sweep output."""
    import scipy

    from . import __version__

    meta = {
        "schema": REPORT_SCHEMA,
        "spec_hash": spec_hash(spec_obj),
        "spec": spec_obj,
        "fock_cutoffs": sorted({int(c) for c in cutoffs if c is not None}),
        "wall_time_s": wall_time,
        "log_base": "e",
        "versions": {
            "aqrm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "platform": platform.platform(),
    }
    if extra:
        meta.update(extra)
    return meta
