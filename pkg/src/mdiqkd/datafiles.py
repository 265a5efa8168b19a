"""Delimited-text files: measurement tables, analysis reports and plot data.

All files are comma separated, use ``#`` comment lines for metadata and
write floats with ``repr`` so that a written table parses back to the
identical values.
"""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .config import bundled_path
from .tables import (ALL_CELLS, BASES, INTENSITY_LABELS, ConfigurationError, GainErrorRecord, GainErrorTable,
                     IntensitySet, MissingCellError, is_undefined)

TABLE_HEADER = ["setup", "basis", "intensity_a", "intensity_b", "Q", "sigma_Q", "e", "sigma_e"]
_INTENSITY_KEYS = ("mu_s", "sigma_mu_s", "mu_d", "sigma_mu_d")


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def _parse_intensity_line(body: str, where: str) -> dict:
    fields = {}
    for token in body.split()[1:]:
        if "=" not in token:
            raise ConfigurationError(f"{where}: malformed intensity token {token!r}")
        k, v = token.split("=", 1)
        fields[k] = v
    if "setup" not in fields or "mu_s" not in fields or "mu_d" not in fields:
        raise ConfigurationError(f"{where}: intensity line needs setup, mu_s and mu_d")
    return fields


def _intensities_for(setup: str, lines: list, where: str):
    by_party = {}
    for f in lines:
        by_party[f.get("party", "both")] = f
    asym = None
    if "alice" in by_party and "bob" in by_party:
        a, b = by_party["alice"], by_party["bob"]
        if (float(a["mu_s"]), float(a["mu_d"])) != (float(b["mu_s"]), float(b["mu_d"])):
            asym = (f"Alice uses mu_s={a['mu_s']}, mu_d={a['mu_d']} but Bob uses "
                    f"mu_s={b['mu_s']}, mu_d={b['mu_d']}")
    f = by_party.get("both") or by_party.get("alice") or by_party.get("bob")
    try:
        mu = IntensitySet(float(f["mu_s"]), float(f["mu_d"]), 0.0,
                          float(f.get("sigma_mu_s", 0.0)), float(f.get("sigma_mu_d", 0.0)))
    except ValueError as exc:
        raise ConfigurationError(f"{where}, setup {setup!r}: {exc}") from exc
    return mu, asym


def parse_measurements(text: str, where: str = "<text>", intensities=None) -> dict:
    """Parse measurement-table text into ``{setup: GainErrorTable}``.

    ``intensities`` may map setup names to :class:`IntensitySet` for files
    without intensity comment lines.
    """
    intensity_lines = defaultdict(list)
    meta = defaultdict(dict)
    data_lines = []
    for line in text.splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.startswith("intensities "):
                f = _parse_intensity_line(body, where)
                intensity_lines[f["setup"]].append(f)
            elif body.startswith("meta "):
                parts = body.split()
                if len(parts) >= 3 and "=" in parts[2]:
                    k, v = parts[2].split("=", 1)
                    meta[parts[1]][k] = v
            continue
        data_lines.append(line)
    if not data_lines:
        return {}
    reader = csv.reader(data_lines)
    header = [h.strip() for h in next(reader)]
    if header != TABLE_HEADER:
        raise ConfigurationError(f"{where}: header must be {','.join(TABLE_HEADER)}, got {','.join(header)}")
    records = defaultdict(dict)
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(TABLE_HEADER):
            raise ConfigurationError(f"{where}: row {lineno} has {len(row)} fields, expected {len(TABLE_HEADER)}")
        setup, basis, a, b = (c.strip() for c in row[:4])
        basis = basis.lower()
        if basis not in BASES or a not in INTENSITY_LABELS or b not in INTENSITY_LABELS:
            raise ConfigurationError(f"{where}: row {lineno} has invalid cell ({basis}, {a}, {b})")
        try:
            q, sq, e, se = (float(c) for c in row[4:])
            rec = GainErrorRecord(q, e, sq, se)
        except ValueError as exc:
            raise ConfigurationError(f"{where}: row {lineno}: {exc}") from exc
        key = (basis, a, b)
        if key in records[setup]:
            raise ConfigurationError(f"{where}: duplicate cell {key} for setup {setup!r}")
        records[setup][key] = rec
    tables = {}
    for setup, recs in records.items():
        if setup in intensity_lines:
            mu, asym = _intensities_for(setup, intensity_lines[setup], where)
        elif intensities and setup in intensities:
            mu, asym = intensities[setup], None
        else:
            raise ConfigurationError(f"{where}: no intensities given for setup {setup!r}")
        m = dict(meta.get(setup, {}))
        if asym:
            m["asymmetric"] = asym
        tables[setup] = GainErrorTable(mu, recs, setup, m)
    return tables


def ingest_measurements(path, intensities=None, require=None) -> dict:
    """Read a measurement file into ``{setup: GainErrorTable}``.

    ``require`` lists (basis, a, b) cells that every table must define; the
    error names every absent cell.
    """
    tables = parse_measurements(Path(path).read_text(), str(path), intensities)
    if require:
        for name, table in tables.items():
            missing = table.missing_cells(require)
            if missing:
                raise MissingCellError([(b, a, c) for b, a, c in missing])
    return tables


def format_measurements(tables, header_lines=()) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    for name, t in tables.items():
        mu = t.intensities
        buf.write(f"# intensities setup={name} party=both mu_s={fmt(mu.mu_signal)} "
                  f"sigma_mu_s={fmt(mu.sigma_mu_signal)} mu_d={fmt(mu.mu_decoy)} "
                  f"sigma_mu_d={fmt(mu.sigma_mu_decoy)}\n")
        for k, v in sorted((t.meta or {}).items()):
            if k != "asymmetric":
                buf.write(f"# meta {name} {k}={v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for name, t in tables.items():
        for cell in ALL_CELLS:
            rec = t.records.get(cell)
            if rec is None:
                continue
            writer.writerow([name, *cell, fmt(rec.Q), fmt(rec.sigma_Q), fmt(rec.e), fmt(rec.sigma_e)])
    return buf.getvalue()


def emit_measurements(tables, path, header_lines=()):
    Path(path).write_text(format_measurements(tables, header_lines))


def load_bundled_measurements() -> dict:
    return ingest_measurements(bundled_path("measurements.csv"))


def load_published_rates() -> dict:
    """``{setup: (S, sigma_S)}`` as published."""
    rows = [l for l in bundled_path("published_rates.csv").read_text().splitlines() if l and not l.startswith("#")]
    reader = csv.DictReader(rows)
    return {r["setup"]: (float(r["S"]), float(r["sigma_S"])) for r in reader}


def write_columns(path, columns: dict, header_lines=(), delimiter=","):
    """Write equal-length columns with a header row and ``#`` metadata lines."""
    names = list(columns)
    n = {len(v) for v in columns.values()}
    if len(n) > 1:
        raise ValueError("columns must have equal length")
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(names)
    for row in zip(*columns.values()):
        w.writerow([fmt(x.item() if hasattr(x, "item") else x) for x in row])
    Path(path).write_text(buf.getvalue())


def read_columns(path, delimiter=","):
    """Inverse of :func:`write_columns`: ``(header_lines, {name: [float, ...]})``."""
    comments, rows = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line:
            rows.append(line)
    reader = csv.reader(rows, delimiter=delimiter)
    names = next(reader)
    cols = {n: [] for n in names}
    for row in reader:
        for n, v in zip(names, row):
            cols[n].append(float(v))
    return comments, cols


def report_rows(table: GainErrorTable, result, extra: dict | None = None) -> list:
    """Flatten an analysis into (quantity, value, sigma) rows."""
    rows = [("mu_signal", table.intensities.mu_signal, table.intensities.sigma_mu_signal),
            ("mu_decoy", table.intensities.mu_decoy, table.intensities.sigma_mu_decoy)]
    for cell in ALL_CELLS:
        rec = table.records.get(cell)
        if rec is not None:
            tag = f"{cell[0]}_{cell[1]}{cell[2]}"
            rows.append((f"Q_{tag}", rec.Q, rec.sigma_Q))
            rows.append((f"e_{tag}", rec.e, rec.sigma_e))
    rows += [
        ("y11_z_lower", result.q11_z_lower, math.nan),
        ("y11_x_lower", result.q11_x_lower, math.nan),
        ("gain11_z", result.gain11_z, math.nan),
        ("e11_x_upper", result.e11_x_upper, math.nan),
        ("f_ec", result.f, math.nan),
        ("sift_factor", result.sift_factor, math.nan),
        ("S", result.S, result.sigma_S),
    ]
    for k, v in (extra or {}).items():
        rows.append((k, float(v), math.nan))
    return rows


def write_report(path, table, result, header_lines=(), extra=None, delimiter=","):
    rows = report_rows(table, result, extra)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    if result.flags:
        buf.write(f"# flags: {' '.join(result.flags)}\n")
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    w.writerow(["quantity", "value", "sigma"])
    for name, value, sigma in rows:
        w.writerow([name, fmt(float(value)), fmt(float(sigma))])
    Path(path).write_text(buf.getvalue())


def undefined_cells(table: GainErrorTable) -> list:
    return [c for c, r in table.records.items() if is_undefined(r.e)]


@dataclass(frozen=True)
class ReportBundle:
    """Everything reported for one analysed table, traceable to a config hash and seed."""

    name: str
    table: GainErrorTable
    bounds: object
    result: object
    version: str
    config_hash: str
    seed: int
    metadata: dict = field(default_factory=dict)

    def header_lines(self, command: str) -> list:
        return [f"mdiqkd {self.version}", f"command {command}", f"setup {self.name}",
                f"config_hash {self.config_hash}", f"seed {self.seed}"]

    def write(self, path, command: str, delimiter=","):
        write_report(path, self.table, self.result, self.header_lines(command), self.metadata, delimiter)


def read_header(path) -> list:
    """The ``#`` comment lines of a file, without the marker."""
    return [l[1:].strip() for l in Path(path).read_text().splitlines() if l.startswith("#")]
