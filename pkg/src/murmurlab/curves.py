"""Curve table ingest: parsing, validation, indexing, isogeny deduplication.

The single ingest format is the canonical curves CSV (UTF-8, header row):

    label,conductor,rank,a1,a2,a3,a4,a6,root_number,sha_an,real_period,
    regulator,tamagawa_product,torsion_order,l_value

Converting upstream database dumps into this layout is an external
preprocessing step, not handled here.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

CSV_FIELDS = (
    "label",
    "conductor",
    "rank",
    "a1",
    "a2",
    "a3",
    "a4",
    "a6",
    "root_number",
    "sha_an",
    "real_period",
    "regulator",
    "tamagawa_product",
    "torsion_order",
    "l_value",
)

#: relative tolerance for snapping analytic Sha to an integer square
SHA_SQUARE_RTOL = 1e-3
#: rank-0 BSD residual at or below this is treated as consistent
BSD_RTOL = 1e-3

VALID_RANKS = (0, 1, 2, 3, 4)
MIN_CONDUCTOR = 11

_LABEL_RE = re.compile(r"^([0-9]+)([a-z]+)([0-9]+)$")


class CurveDataError(ValueError):
    """Raised for unusable curve data (fatal for the whole table)."""


class DuplicateLabelError(CurveDataError):
    pass


class BsdInconsistencyError(CurveDataError):
    pass


@dataclass(frozen=True)
class RowError:
    """One rejected CSV row."""

    line: int
    message: str


@dataclass(frozen=True)
class CurveRecord:
    """One curve with its BSD invariants, as ingested."""

    label: str
    isogeny_class: str
    a_invariants: tuple[int, int, int, int, int]
    conductor: int
    rank: int
    root_number: int
    real_period: float
    regulator: float
    tamagawa_product: int
    torsion_order: int
    sha_an: float
    l_value: float

    def sha_rounded(self) -> int:
        """Analytic Sha snapped to the nearest integer (used for grouping)."""
        return int(round(self.sha_an))

    def bsd_ratio(self) -> float:
        """Omega * prod(c_p) / torsion^2, the rank-0 right-hand side per unit Sha."""
        return self.real_period * self.tamagawa_product / self.torsion_order**2


def isogeny_class_of(label: str) -> str:
    """Strip the trailing curve index from a Cremona-style label."""
    m = _LABEL_RE.match(label)
    if m is None:
        raise CurveDataError(f"label {label!r} is not Cremona-style")
    return m.group(1) + m.group(2)


def validate_record(rec: CurveRecord) -> list[str]:
    """Return the list of invariant violations for a record (empty if valid)."""
    problems = []
    if _LABEL_RE.match(rec.label) is None:
        problems.append(f"label {rec.label!r} is not Cremona-style")
    if rec.conductor < MIN_CONDUCTOR:
        problems.append(f"conductor {rec.conductor} < {MIN_CONDUCTOR}")
    if rec.rank not in VALID_RANKS:
        problems.append(f"rank {rec.rank} outside {VALID_RANKS}")
    if rec.root_number not in (-1, 1):
        problems.append(f"root number {rec.root_number} not in {{-1,+1}}")
    elif rec.rank in VALID_RANKS and rec.root_number != (1 if rec.rank % 2 == 0 else -1):
        problems.append(
            f"parity violation: rank {rec.rank} with root number {rec.root_number:+d}"
        )
    if not rec.real_period > 0:
        problems.append(f"real period {rec.real_period} not positive")
    if not rec.regulator > 0:
        problems.append(f"regulator {rec.regulator} not positive")
    if rec.tamagawa_product < 1:
        problems.append(f"Tamagawa product {rec.tamagawa_product} not positive")
    if rec.torsion_order < 1:
        problems.append(f"torsion order {rec.torsion_order} not positive")
    if not rec.sha_an > 0:
        problems.append(f"analytic Sha {rec.sha_an} not positive")
    else:
        root = round(math.sqrt(rec.sha_an))
        if root < 1 or abs(root * root - rec.sha_an) > SHA_SQUARE_RTOL * rec.sha_an:
            problems.append(f"analytic Sha {rec.sha_an} is not a perfect square")
    if rec.l_value < 0:
        problems.append(f"leading L-value {rec.l_value} negative")
    if rec.rank == 0:
        if abs(rec.regulator - 1.0) > 1e-6:
            problems.append(f"rank 0 with regulator {rec.regulator} != 1")
        if not rec.l_value > 0:
            problems.append("rank 0 with vanishing L-value")
    return problems


class CurveTable:
    """Immutable, sorted, indexed collection of CurveRecords.

    Records are sorted by (conductor, label); labels are unique.  Column
    arrays are exposed for vectorised statistics.
    """

    def __init__(self, records: Iterable[CurveRecord]):
        recs = sorted(records, key=lambda r: (r.conductor, r.label))
        seen: dict[str, int] = {}
        for i, r in enumerate(recs):
            if r.label in seen:
                raise DuplicateLabelError(f"duplicate label {r.label!r}")
            seen[r.label] = i
        self.records: tuple[CurveRecord, ...] = tuple(recs)
        self._index = seen
        self.labels = tuple(r.label for r in recs)
        self.conductors = np.array([r.conductor for r in recs], dtype=np.int64)
        self.ranks = np.array([r.rank for r in recs], dtype=np.int8)
        self.root_numbers = np.array([r.root_number for r in recs], dtype=np.int8)
        self.real_periods = np.array([r.real_period for r in recs], dtype=np.float64)
        self.regulators = np.array([r.regulator for r in recs], dtype=np.float64)
        self.tamagawa_products = np.array(
            [r.tamagawa_product for r in recs], dtype=np.int64
        )
        self.torsion_orders = np.array([r.torsion_order for r in recs], dtype=np.int64)
        self.sha_values = np.array([r.sha_an for r in recs], dtype=np.float64)
        self.l_values = np.array([r.l_value for r in recs], dtype=np.float64)
        by_class: dict[str, list[int]] = {}
        for i, r in enumerate(recs):
            by_class.setdefault(r.isogeny_class, []).append(i)
        self.index_by_class = {k: tuple(v) for k, v in by_class.items()}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CurveRecord]:
        return iter(self.records)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def record(self, label: str) -> CurveRecord:
        return self.records[self._index[label]]

    def index_of(self, label: str) -> int:
        return self._index[label]

    def subset(self, indices: Sequence[int]) -> "CurveTable":
        return CurveTable(self.records[i] for i in indices)

    def filter(self, rank: int | None = None,
               conductor_range: tuple[int, int] | None = None) -> "CurveTable":
        """New table restricted to a rank and/or closed conductor range."""
        if conductor_range is not None:
            lo, hi = conductor_range
            start = bisect.bisect_left(self.conductors, lo)
            stop = bisect.bisect_right(self.conductors, hi)
            idx = range(start, stop)
        else:
            idx = range(len(self.records))
        if rank is not None:
            idx = [i for i in idx if self.records[i].rank == rank]
        return self.subset(list(idx))

    def rank_histogram(self) -> dict[int, int]:
        vals, counts = np.unique(self.ranks, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


#: invariant ids usable in window averages and correlations
INVARIANT_IDS = (
    "period",
    "log_period",
    "tamagawa",
    "torsion",
    "sha",
    "regulator",
    "l_value",
    "bsd_ratio",
)


def invariant_values(table: CurveTable, invariant: str) -> np.ndarray:
    """Per-curve values of a named BSD invariant, aligned with table order."""
    if invariant == "period":
        return table.real_periods
    if invariant == "log_period":
        return np.log(table.real_periods)
    if invariant == "tamagawa":
        return table.tamagawa_products.astype(np.float64)
    if invariant == "torsion":
        return table.torsion_orders.astype(np.float64)
    if invariant == "sha":
        return table.sha_values
    if invariant == "regulator":
        return table.regulators
    if invariant == "l_value":
        return table.l_values
    if invariant == "bsd_ratio":
        return (
            table.real_periods
            * table.tamagawa_products
            / table.torsion_orders.astype(np.float64) ** 2
        )
    raise KeyError(f"unknown invariant {invariant!r} (expected one of {INVARIANT_IDS})")


@dataclass(frozen=True)
class ParseResult:
    table: CurveTable
    errors: tuple[RowError, ...]


def _parse_int(raw: str, field: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"field {field}={raw!r} is not an integer") from None


def _parse_real(raw: str, field: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"field {field}={raw!r} is not a number") from None
    if not math.isfinite(value):
        raise ValueError(f"field {field}={raw!r} is not finite")
    return value


def parse_curve_table(stream, format: str = "canonical_csv") -> ParseResult:
    """Parse the canonical curves CSV into a sorted, indexed CurveTable.

    Rows failing field-level validation are collected into the error report
    and excluded; a duplicate label is fatal.
    """
    if format != "canonical_csv":
        raise ValueError(f"unsupported format {format!r}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise CurveDataError("empty stream: header row required") from None
    if tuple(h.strip() for h in header) != CSV_FIELDS:
        raise CurveDataError(
            f"bad header: expected {','.join(CSV_FIELDS)!r}, got {','.join(header)!r}"
        )
    records: list[CurveRecord] = []
    errors: list[RowError] = []
    seen: set[str] = set()
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_FIELDS):
            errors.append(RowError(line, f"expected {len(CSV_FIELDS)} columns, got {len(row)}"))
            continue
        raw = dict(zip(CSV_FIELDS, (cell.strip() for cell in row)))
        try:
            rec = CurveRecord(
                label=raw["label"],
                isogeny_class=isogeny_class_of(raw["label"]),
                a_invariants=tuple(
                    _parse_int(raw[f], f) for f in ("a1", "a2", "a3", "a4", "a6")
                ),
                conductor=_parse_int(raw["conductor"], "conductor"),
                rank=_parse_int(raw["rank"], "rank"),
                root_number=_parse_int(raw["root_number"], "root_number"),
                real_period=_parse_real(raw["real_period"], "real_period"),
                regulator=_parse_real(raw["regulator"], "regulator"),
                tamagawa_product=_parse_int(raw["tamagawa_product"], "tamagawa_product"),
                torsion_order=_parse_int(raw["torsion_order"], "torsion_order"),
                sha_an=_parse_real(raw["sha_an"], "sha_an"),
                l_value=_parse_real(raw["l_value"], "l_value"),
            )
        except (ValueError, CurveDataError) as exc:
            errors.append(RowError(line, str(exc)))
            continue
        if rec.label in seen:
            raise DuplicateLabelError(f"duplicate label {rec.label!r} at line {line}")
        problems = validate_record(rec)
        if problems:
            errors.append(RowError(line, "; ".join(problems)))
            continue
        seen.add(rec.label)
        records.append(rec)
    return ParseResult(CurveTable(records), tuple(errors))


def serialize_curve_table(table: CurveTable) -> str:
    """Canonical CSV text for a table; parse(serialize(t)) round-trips exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in table:
        a1, a2, a3, a4, a6 = r.a_invariants
        writer.writerow(
            [
                r.label,
                r.conductor,
                r.rank,
                a1,
                a2,
                a3,
                a4,
                a6,
                r.root_number,
                repr(r.sha_an),
                repr(r.real_period),
                repr(r.regulator),
                r.tamagawa_product,
                r.torsion_order,
                repr(r.l_value),
            ]
        )
    return out.getvalue()


def validate_bsd_residual(record: CurveRecord) -> float:
    """Relative rank-0 residual |L - Sha * Omega * prod(c_p) / T^2| / L.

    Residuals at or below BSD_RTOL are treated as consistent downstream.
    """
    if record.rank != 0:
        raise ValueError(f"{record.label}: BSD residual check requires rank 0")
    if record.l_value <= 0:
        raise BsdInconsistencyError(f"{record.label}: rank 0 but L-value is 0")
    predicted = (
        record.sha_an
        * record.real_period
        * record.tamagawa_product
        / record.torsion_order**2
    )
    return abs(record.l_value - predicted) / record.l_value


def dedupe_isogeny(table: CurveTable) -> CurveTable:
    """One representative per isogeny class: the lexicographically smallest label."""
    keep = []
    for cls, indices in table.index_by_class.items():
        keep.append(min(indices, key=lambda i: table.records[i].label))
    return table.subset(sorted(keep))
