"""Confounder controls for murmuration modulations.

Covers restriction to a fixed number of conductor prime factors, greedy
nearest-neighbor matching on a one-dimensional key, L-value band
restriction, the combined L-value/period/conductor control, per-group BSD
ratio validation, and cumulative Euler-sum decompositions.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .curves import CurveTable
from .primes import omega
from .stratify import (
    EmptyGroupError,
    Partition,
    SHA_RULE,
    StratReport,
    StratRule,
    partition,
    permutation_test,
    profile_rms,
)
from .traces import TraceMatrix
from .windows import MurmurationProfile, murmuration_profile


@dataclass(frozen=True)
class MatchedPairs:
    """Greedy one-to-one nearest-neighbor matches between two curve groups."""

    pairs: tuple[tuple[str, str, float], ...]
    key: str
    max_distance: float

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def mean_distance(self) -> float:
        if not self.pairs:
            return 0.0
        return float(np.mean([d for _, _, d in self.pairs]))

    def labels_a(self) -> list[str]:
        return [a for a, _, _ in self.pairs]

    def labels_b(self) -> list[str]:
        return [b for _, b, _ in self.pairs]


def _key_values(table: CurveTable, labels: Sequence[str], key: str) -> np.ndarray:
    if key == "conductor":
        return np.array([table.record(l).conductor for l in labels], dtype=np.float64)
    if key == "l_value":
        return np.array([table.record(l).l_value for l in labels], dtype=np.float64)
    raise KeyError(f"unsupported matching key {key!r}")


def match_nn(table: CurveTable, group_a: Sequence[str], group_b: Sequence[str],
             key: str = "conductor", max_distance: float = math.inf) -> MatchedPairs:
    """Greedy nearest-neighbor matching of A-curves to distinct B-curves.

    A-curves are processed in ascending key order (ties by label); each takes
    the nearest still-unused B-curve, and the pair is dropped when the key
    distance exceeds max_distance.
    """
    if not group_a or not group_b:
        raise EmptyGroupError("matching requires two nonempty groups")
    a_vals = _key_values(table, group_a, key)
    b_vals = _key_values(table, group_b, key)
    a_order = sorted(range(len(group_a)), key=lambda i: (a_vals[i], group_a[i]))
    b_order = sorted(range(len(group_b)), key=lambda i: (b_vals[i], group_b[i]))
    b_sorted = [b_vals[i] for i in b_order]
    b_labels = [group_b[i] for i in b_order]
    m = len(b_sorted)
    # doubly linked alive-list over sorted B positions; slot j+1 holds item j,
    # slots 0 and m+1 are sentinels.  Dead slots keep stale pointers that are
    # path-compressed during walks, so scans stay near-linear overall.
    alive = [True] * m
    nxt = list(range(1, m + 2))   # nxt[slot], slot 0 is the head sentinel
    prv = list(range(-1, m))      # prv[slot]; prv[0] unused

    def right_item(pos: int) -> int | None:
        s = pos + 1
        seen = []
        while s <= m and not alive[s - 1]:
            seen.append(s)
            s = nxt[s]
        for t in seen:
            nxt[t] = s
        return s - 1 if s <= m else None

    def left_item(pos: int) -> int | None:
        s = pos
        seen = []
        while s >= 1 and not alive[s - 1]:
            seen.append(s)
            s = prv[s]
        for t in seen:
            prv[t] = s
        return s - 1 if s >= 1 else None

    def remove(item: int) -> None:
        s = item + 1
        alive[item] = False
        nxt[prv[s]] = nxt[s]
        if nxt[s] <= m:
            prv[nxt[s]] = prv[s]

    pairs = []
    used = 0
    for ai in a_order:
        if used == m:
            break
        target = a_vals[ai]
        pos = bisect.bisect_left(b_sorted, target)
        best = None
        left = left_item(pos)
        if left is not None:
            best = (abs(b_sorted[left] - target), b_labels[left], left)
        right = right_item(pos)
        if right is not None:
            cand = (abs(b_sorted[right] - target), b_labels[right], right)
            if best is None or cand[:2] < best[:2]:
                best = cand
        if best is None or best[0] > max_distance:
            continue
        dist, blab, bj = best
        pairs.append((group_a[ai], blab, float(dist)))
        remove(bj)
        used += 1
    return MatchedPairs(tuple(pairs), key, max_distance)


@dataclass(frozen=True)
class PairedProfiles:
    matched: MatchedPairs
    rms_group: float
    rms_per_pair: float


def matched_rms(matched: MatchedPairs, matrix: TraceMatrix,
                per_pair: bool = False) -> PairedProfiles:
    """RMS separation of the two matched sub-profiles.

    Group mode (default) compares the two matched-group mean profiles;
    per-pair mode averages squared per-pair differences prime by prime.
    """
    if matched.n_pairs == 0:
        raise EmptyGroupError("no matched pairs")
    rows_a = matrix.rows(matched.labels_a()).astype(np.float64)
    rows_b = matrix.rows(matched.labels_b()).astype(np.float64)
    group = float(np.sqrt(np.mean((rows_a.mean(0) - rows_b.mean(0)) ** 2)))
    pair = float(np.sqrt(np.mean((rows_a - rows_b) ** 2)))
    return PairedProfiles(matched, group, pair)


def control_omega(table: CurveTable, matrix: TraceMatrix, part: Partition, k: int,
                  n_shuffles: int = 10_000, seed: int = 0
                  ) -> tuple[Partition, StratReport]:
    """Restrict both groups to conductors with omega(N) = k, then re-test."""
    restricted = {}
    for name, members in part.groups.items():
        keep = tuple(l for l in members if omega(table.record(l).conductor) == k)
        if not keep:
            raise EmptyGroupError(f"group {name!r} empty after omega(N) = {k} restriction")
        restricted[name] = keep
    new_part = Partition(restricted, part.unassigned, part.rule)
    report = permutation_test(restricted, matrix, n_shuffles=n_shuffles, seed=seed)
    return new_part, report


def lvalue_band(table: CurveTable, band: tuple[float, float]) -> CurveTable:
    """Rank-0 curves with central L-value inside the closed band."""
    lo, hi = band
    if not lo < hi:
        raise ValueError(f"empty band [{lo}, {hi}]")
    keep = [
        i
        for i, r in enumerate(table.records)
        if r.rank == 0 and lo <= r.l_value <= hi
    ]
    return table.subset(keep)


@dataclass(frozen=True)
class TripleControlResult:
    band: tuple[float, float]
    conductor_range: tuple[int, int]
    median_period: float
    reports: dict[str, StratReport]
    sizes: dict[str, dict[str, int]]


def triple_control(table: CurveTable, matrix: TraceMatrix,
                   band: tuple[float, float], conductor_range: tuple[int, int],
                   rule: StratRule = SHA_RULE, n_shuffles: int = 10_000,
                   seed: int = 0) -> TripleControlResult:
    """Sha separation with L-value band, conductor range, and period held fixed.

    Within band and range, curves are split at the median real period; each
    half gets its own partition and permutation test.
    """
    banded = lvalue_band(table.filter(conductor_range=conductor_range), band)
    if len(banded) == 0:
        raise EmptyGroupError("no curves inside the band and conductor range")
    median_period = float(np.median(banded.real_periods))
    halves = {
        "small_period": [i for i, r in enumerate(banded.records)
                         if r.real_period <= median_period],
        "large_period": [i for i, r in enumerate(banded.records)
                         if r.real_period > median_period],
    }
    reports: dict[str, StratReport] = {}
    sizes: dict[str, dict[str, int]] = {}
    for name, idx in halves.items():
        half_table = banded.subset(idx)
        try:
            part = partition(half_table, rule)
        except EmptyGroupError as exc:
            raise EmptyGroupError(f"{name}: {exc}") from None
        reports[name] = permutation_test(part.groups, matrix,
                                         n_shuffles=n_shuffles, seed=seed)
        sizes[name] = part.sizes()
    return TripleControlResult(band, conductor_range, median_period, reports, sizes)


def bsd_group_ratios(table: CurveTable,
                     groups: dict[str, Sequence[str]]) -> dict[str, float]:
    """Per-group mean(Omega * prod c_p / T^2) / mean(L); ~ 1/|Sha| at fixed Sha."""
    out = {}
    for name, labels in groups.items():
        recs = [table.record(l) for l in labels]
        if any(r.rank != 0 for r in recs):
            raise ValueError(f"group {name!r} contains curves of positive rank")
        mean_l = float(np.mean([r.l_value for r in recs]))
        if mean_l == 0:
            raise ZeroDivisionError(f"group {name!r} has zero mean L-value")
        mean_ratio = float(np.mean([r.bsd_ratio() for r in recs]))
        out[name] = mean_ratio / mean_l
    return out


@dataclass(frozen=True)
class EulerCumsum:
    primes: np.ndarray
    cum_a: np.ndarray
    cum_b: np.ndarray
    delta: np.ndarray  # cum_b - cum_a

    @property
    def argmax_prime(self) -> int:
        return int(self.primes[int(np.argmax(np.abs(self.delta)))])

    @property
    def terminal(self) -> tuple[float, float, float]:
        return float(self.cum_a[-1]), float(self.cum_b[-1]), float(self.delta[-1])


def euler_cumsum(profile_a: MurmurationProfile,
                 profile_b: MurmurationProfile) -> EulerCumsum:
    """Running sums of mean(a_q)/q per group and their difference Delta(P)."""
    if not np.array_equal(profile_a.primes, profile_b.primes):
        raise ValueError("profiles computed on different prime lists")
    p = profile_a.primes.astype(np.float64)
    cum_a = np.cumsum(profile_a.mean_ap / p)
    cum_b = np.cumsum(profile_b.mean_ap / p)
    return EulerCumsum(profile_a.primes, cum_a, cum_b, cum_b - cum_a)


def invariant_correlation(table: CurveTable, x: str, y: str,
                          log_x: bool = False, log_y: bool = False) -> float:
    """Pearson correlation between two per-curve invariants."""
    from .curves import invariant_values

    if len(table) < 3:
        raise ValueError("need at least 3 records")
    if x == "conductor":
        xv = table.conductors.astype(np.float64)
    else:
        xv = invariant_values(table, x)
    if y == "conductor":
        yv = table.conductors.astype(np.float64)
    else:
        yv = invariant_values(table, y)
    if log_x:
        xv = np.log(xv)
    if log_y:
        yv = np.log(yv)
    if xv.std() == 0 or yv.std() == 0:
        raise ValueError("correlation undefined for zero-variance invariant")
    return float(np.corrcoef(xv, yv)[0, 1])
