"""L-function evaluation, zero location, and zero statistics.

Everything here works in the arithmetic normalization: the Dirichlet series
L(s) = sum a_n n^{-s} has critical line Re s = 1 and functional equation
s <-> 2 - s for the completed function

    Lambda(s) = N^{s/2} (2 pi)^{-s} Gamma(s) L(s) = w Lambda(2 - s).

On the critical line the smoothed approximate functional equation gives

    Lambda(1 + it) = sum_n a_n [ x_n^{-s} Gamma(s, x_n)
                                 + w x_n^{s-2} Gamma(2-s, x_n) ],

with x_n = 2 pi n / sqrt(N) and Gamma(s, x) the upper incomplete gamma
function.  For w = +1 the two sums are conjugate, so Lambda is real on the
line; zero ordinates found here coincide with the gamma of the analytic
normalization rho = 1/2 + i*gamma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .curves import CurveRecord
from .traces import dirichlet_coefficients

#: terms with x_n beyond this contribute below 1e-18 and are skipped
_X_CUT = 46.0
#: per-element relative target for the incomplete gamma evaluation
_GAMMA_TOL = 1e-14
_GAMMA_MAX_ITER = 600

#: default search ceiling for low-lying zeros
DEFAULT_T_MAX = 10.0
#: bisection tolerance on zero ordinates
ZERO_TOL = 1e-6
#: admissible imaginary residue of Lambda on the critical line (w = +1)
REALNESS_TOL = 1e-8


class CoefficientShortfallError(ValueError):
    pass


class GammaConvergenceError(RuntimeError):
    pass


def upper_incomplete_gamma(s, x):
    """Elementwise Gamma(s, x) for complex s and real x >= 0.

    Series for the lower function when x < |s| + 1, modified Lentz continued
    fraction otherwise; both iterated to ~1e-14 relative.  Shapes of s and x
    must broadcast to a common shape.
    """
    s = np.asarray(s, dtype=np.complex128)
    x = np.asarray(x, dtype=np.float64)
    s, x = np.broadcast_arrays(s, x)
    out = np.empty(s.shape, dtype=np.complex128)
    flat_s = s.ravel()
    flat_x = x.ravel()
    flat_out = out.ravel()
    use_series = flat_x < np.abs(flat_s) + 1.0
    if np.any(use_series):
        flat_out[use_series] = _gamma_upper_series(flat_s[use_series], flat_x[use_series])
    if np.any(~use_series):
        flat_out[~use_series] = _gamma_upper_cf(flat_s[~use_series], flat_x[~use_series])
    return out if out.shape else out[()]


def _gamma_upper_series(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gamma(s) - lower gamma via the standard ascending series."""
    term = 1.0 / s
    total = term.copy()
    active = np.ones(s.shape, dtype=bool)
    k = 0
    while np.any(active):
        k += 1
        if k > _GAMMA_MAX_ITER:
            raise GammaConvergenceError("incomplete gamma series did not converge")
        term = term * x / (s + k)
        total[active] += term[active]
        active &= np.abs(term) > _GAMMA_TOL * np.abs(total)
    lower = np.exp(s * np.log(np.where(x > 0, x, 1.0)) - x) * total
    lower = np.where(x > 0, lower, 0.0)
    return special.gamma(s) - lower


def _gamma_upper_cf(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Modified Lentz continued fraction for the upper function."""
    tiny = 1e-300
    b = x + 1.0 - s
    c = np.full(s.shape, 1.0 / tiny, dtype=np.complex128)
    d = 1.0 / np.where(b != 0, b, tiny)
    h = d.copy()
    active = np.ones(s.shape, dtype=bool)
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _GAMMA_TOL
        if not np.any(active):
            break
    else:
        raise GammaConvergenceError("incomplete gamma continued fraction did not converge")
    return np.exp(-x + s * np.log(x)) * h


@dataclass(frozen=True)
class LSeries:
    """Dirichlet coefficient data for one curve's L-function."""

    label: str
    conductor: int
    root_number: int
    coefficients: np.ndarray  # a[n] at index n; a[0] unused, a[1] = 1

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", a)
        if len(a) < 2 or a[1] != 1:
            raise ValueError(f"{self.label}: a_1 must be 1")
        if self.root_number not in (-1, 1):
            raise ValueError(f"{self.label}: root number must be +-1")
        from .primes import sieve_up_to

        for p in sieve_up_to(self.n_max):
            if self.conductor % int(p) != 0 and abs(a[p]) > 2.0 * math.sqrt(p):
                raise ValueError(
                    f"{self.label}: a_{p} = {a[p]:g} violates the Hasse bound"
                )

    @property
    def n_max(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def from_curve(cls, record: CurveRecord, t_max: float = DEFAULT_T_MAX,
                   n_max: int | None = None) -> "LSeries":
        if n_max is None:
            n_max = required_n_max(record.conductor, t_max)
        an = dirichlet_coefficients(record.a_invariants, record.conductor, n_max)
        return cls(record.label, record.conductor, record.root_number,
                   an.astype(np.float64))


def required_n_max(conductor: int, t: float) -> int:
    """Coefficient budget for evaluating Lambda up to height t."""
    return int(math.ceil(math.sqrt(conductor) * (abs(t) + 8.0)))


def _require_budget(series: LSeries, t: float) -> None:
    need = required_n_max(series.conductor, t)
    if series.n_max < need:
        raise CoefficientShortfallError(
            f"{series.label}: height t={t:g} needs n_max >= {need}, "
            f"series has {series.n_max}"
        )


def l_value_series(series: LSeries) -> float:
    """Central value L(E,1) = 2 sum (a_n/n) exp(-2 pi n / sqrt(N)) for w = +1.

    The sum is truncated once the geometric tail bound falls below 1e-10.
    """
    if series.root_number != 1:
        raise ValueError(
            f"{series.label}: w = -1 forces L(1) = 0 by the odd functional equation"
        )
    N = series.conductor
    sqrt_n = math.sqrt(N)
    c = 2.0 * math.pi / sqrt_n
    # tail: 2 * sum_{m>n} exp(-c m) <= 2 exp(-c n)/(1 - exp(-c)) < 1e-10
    need = int(math.ceil((math.log(2.0 / (1.0 - math.exp(-c))) + 10 * math.log(10)) / c))
    if series.n_max < need:
        raise CoefficientShortfallError(
            f"{series.label}: central value needs n_max >= {need}, "
            f"series has {series.n_max}"
        )
    n = np.arange(1, need + 1, dtype=np.float64)
    a = series.coefficients[1 : need + 1]
    return float(2.0 * np.sum(a / n * np.exp(-c * n)))


def _lambda_batch(series: LSeries, ts: np.ndarray) -> np.ndarray:
    """Lambda(1 + i t) for an array of heights t (complex values returned)."""
    ts = np.asarray(ts, dtype=np.float64)
    N = series.conductor
    x_all = 2.0 * math.pi * np.arange(1, series.n_max + 1) / math.sqrt(N)
    keep = x_all <= _X_CUT
    x = x_all[keep]
    a = series.coefficients[1 : series.n_max + 1][keep]
    s = (1.0 + 1j * ts)[:, None]
    lx = np.log(x)[None, :]
    g_s = upper_incomplete_gamma(np.broadcast_to(s, (len(ts), len(x))), x[None, :])
    g_2ms = upper_incomplete_gamma(np.broadcast_to(2.0 - s, (len(ts), len(x))), x[None, :])
    term = a[None, :] * (np.exp(-s * lx) * g_s
                         + series.root_number * np.exp((s - 2.0) * lx) * g_2ms)
    return term.sum(axis=1)


def lambda_critical(series: LSeries, t: float) -> float:
    """Completed L-function on the critical line at s = 1 + it (w = +1).

    The value is real up to numerical residue; the residue is checked
    against REALNESS_TOL.
    """
    if series.root_number != 1:
        raise ValueError(f"{series.label}: critical-line scan requires w = +1")
    _require_budget(series, t)
    val = _lambda_batch(series, np.array([t]))[0]
    if abs(val.imag) >= REALNESS_TOL:
        raise ArithmeticError(
            f"{series.label}: Lambda(1+{t:g}i) imaginary residue {val.imag:.3e}"
        )
    return float(val.real)


@dataclass(frozen=True)
class ZeroSet:
    """Ordered imaginary parts of the first low-lying zeros of one L-function."""

    label: str
    gammas: np.ndarray
    k_requested: int
    t_max: float
    complete: bool
    max_imag_residual: float

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=np.float64)
        object.__setattr__(self, "gammas", g)
        if len(g) and (np.any(np.diff(g) <= 0) or g[0] <= 0):
            raise ValueError(f"{self.label}: zero ordinates must be positive increasing")


def locate_zeros(series: LSeries, k: int = 5, t_max: float = DEFAULT_T_MAX,
                 refinement: int = 8) -> ZeroSet:
    """First k zero ordinates on the critical line, for w = +1 series.

    Lambda(1+it) is scanned on a grid of 1/refinement of the expected mean
    zero gap (refinement 8 by default); each sign change is bisected to
    |dt| < 1e-6.  Refining the grid can only add detected zeros, never drop
    one.  If fewer than k sign changes occur below t_max the result is
    flagged incomplete.
    """
    if series.root_number != 1:
        raise ValueError(f"{series.label}: zero search requires w = +1")
    if refinement < 1:
        raise ValueError("refinement must be a positive grid divider")
    _require_budget(series, t_max)
    step = 2.0 * math.pi / (math.log(series.conductor) + 6.0) / refinement
    grid = np.arange(0.0, t_max + step, step)
    grid = grid[grid <= t_max]
    vals = _lambda_batch(series, grid)
    max_imag = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
    if max_imag >= REALNESS_TOL:
        raise ArithmeticError(
            f"{series.label}: Lambda imaginary residue {max_imag:.3e} on scan grid"
        )
    re = vals.real
    zeros: list[float] = []
    sign_change = np.flatnonzero(np.sign(re[:-1]) * np.sign(re[1:]) < 0)
    for idx in sign_change:
        if len(zeros) >= k:
            break
        lo, hi = float(grid[idx]), float(grid[idx + 1])
        f_lo = float(re[idx])
        while hi - lo > ZERO_TOL:
            mid = 0.5 * (lo + hi)
            f_mid = _lambda_batch(series, np.array([mid]))[0].real
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_lo < 0) != (f_mid < 0):
                hi = mid
            else:
                lo, f_lo = mid, f_mid
        zeros.append(0.5 * (lo + hi))
    return ZeroSet(
        label=series.label,
        gammas=np.array(zeros),
        k_requested=k,
        t_max=t_max,
        complete=len(zeros) >= k,
        max_imag_residual=max_imag,
    )


@dataclass(frozen=True)
class HotellingResult:
    t2: float
    f_stat: float
    p_value: float
    df: tuple[int, int]
    n_a: int
    n_b: int


def _zero_matrix(zero_sets: Sequence[ZeroSet]) -> np.ndarray:
    ks = {len(z.gammas) for z in zero_sets}
    if len(ks) != 1:
        raise ValueError("zero sets have unequal lengths")
    if not all(z.complete for z in zero_sets):
        raise ValueError("incomplete zero sets cannot enter statistics")
    return np.vstack([z.gammas for z in zero_sets])


def hotelling_t2(zeros_a: Sequence[ZeroSet], zeros_b: Sequence[ZeroSet]) -> HotellingResult:
    """Two-sample Hotelling T^2 on zero vectors with pooled covariance."""
    xa = _zero_matrix(zeros_a)
    xb = _zero_matrix(zeros_b)
    return hotelling_t2_from_samples(xa, xb)


def hotelling_t2_from_samples(xa: np.ndarray, xb: np.ndarray) -> HotellingResult:
    n1, k = xa.shape
    n2, k2 = xb.shape
    if k != k2:
        raise ValueError("sample dimensions differ")
    if min(n1, n2) <= k + 1:
        raise ValueError(f"group sizes must exceed k+1 = {k + 1}")
    diff = xa.mean(axis=0) - xb.mean(axis=0)
    pooled = ((n1 - 1) * np.cov(xa, rowvar=False) + (n2 - 1) * np.cov(xb, rowvar=False))
    pooled /= n1 + n2 - 2
    try:
        solved = np.linalg.solve(pooled, diff)
    except np.linalg.LinAlgError:
        raise ValueError("singular pooled covariance") from None
    t2 = float(n1 * n2 / (n1 + n2) * diff @ solved)
    f_stat = hotelling_to_f(t2, k, n1, n2)
    df = (k, n1 + n2 - k - 1)
    p = float(stats.f.sf(f_stat, *df))
    return HotellingResult(t2, f_stat, p, df, n1, n2)


def hotelling_to_f(t2: float, k: int, n1: int, n2: int) -> float:
    """F statistic with (k, n1+n2-k-1) degrees of freedom."""
    return (n1 + n2 - k - 1) / (k * (n1 + n2 - 2)) * t2


def so_even_density(x) -> np.ndarray:
    """Katz-Sarnak one-level density for SO(even): 1 + sin(2 pi x)/(2 pi x)."""
    return 1.0 + np.sinc(2.0 * np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class DensityResult:
    bin_centers: np.ndarray
    density: np.ndarray
    deviation_so_even: float
    n_curves: int
    scaled_zeros: np.ndarray
    scaled_first: np.ndarray


def scale_zeros(zero_sets: Sequence[ZeroSet], conductors: Sequence[int]) -> np.ndarray:
    """Scaled ordinates x = gamma * log(N) / (2 pi), one row per curve."""
    if len(zero_sets) != len(conductors):
        raise ValueError("zero sets and conductors must align")
    rows = [z.gammas * math.log(N) / (2.0 * math.pi)
            for z, N in zip(zero_sets, conductors)]
    return np.vstack(rows)


def one_level_density(zero_sets: Sequence[ZeroSet], conductors: Sequence[int],
                      bin_width: float = 0.1, x_max: float = 4.0) -> DensityResult:
    """Scaled zero histogram and integrated squared deviation from SO(even).

    The empirical density counts zeros per curve per unit of scaled ordinate;
    the deviation from W1 is a trapezoid-rule integral over bin centers.
    """
    if len(zero_sets) == 0:
        raise ValueError("no zero sets supplied")
    scaled = scale_zeros(zero_sets, conductors)
    edges = np.arange(0.0, x_max + bin_width / 2, bin_width)
    counts, _ = np.histogram(scaled.ravel(), bins=edges)
    density = counts / (len(zero_sets) * bin_width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    deviation = float(np.trapezoid((density - so_even_density(centers)) ** 2, centers))
    return DensityResult(
        bin_centers=centers,
        density=density,
        deviation_so_even=deviation,
        n_curves=len(zero_sets),
        scaled_zeros=scaled.ravel(),
        scaled_first=scaled[:, 0] if scaled.shape[1] else np.empty(0),
    )


@dataclass(frozen=True)
class DensityComparison:
    deviation_a: float
    deviation_b: float
    ks_all: tuple[float, float]
    ks_first: tuple[float, float]


def density_comparison(zeros_a: Sequence[ZeroSet], conductors_a: Sequence[int],
                       zeros_b: Sequence[ZeroSet], conductors_b: Sequence[int],
                       bin_width: float = 0.1, x_max: float = 4.0) -> DensityComparison:
    """SO(even) deviations per group plus two-sample KS on scaled zeros."""
    da = one_level_density(zeros_a, conductors_a, bin_width, x_max)
    db = one_level_density(zeros_b, conductors_b, bin_width, x_max)
    ks_all = stats.ks_2samp(da.scaled_zeros, db.scaled_zeros, method="asymp")
    ks_first = stats.ks_2samp(da.scaled_first, db.scaled_first, method="asymp")
    return DensityComparison(
        deviation_a=da.deviation_so_even,
        deviation_b=db.deviation_so_even,
        ks_all=(float(ks_all.statistic), float(ks_all.pvalue)),
        ks_first=(float(ks_first.statistic), float(ks_first.pvalue)),
    )


@dataclass(frozen=True)
class ExplicitPrediction:
    primes: np.ndarray
    predicted_diff: np.ndarray
    correlation: float | None
    rms_predicted: float
    rms_observed: float | None


def _zero_contribution(mean_gammas: np.ndarray, primes: np.ndarray) -> np.ndarray:
    logp = np.log(primes.astype(np.float64))
    phases = np.cos(np.outer(logp, mean_gammas)).sum(axis=1)
    return -2.0 * np.sqrt(primes.astype(np.float64)) / logp * phases


def explicit_predict(mean_gammas_a: Sequence[float], mean_gammas_b: Sequence[float],
                     primes: np.ndarray,
                     observed_diff: np.ndarray | None = None) -> ExplicitPrediction:
    """Per-prime murmuration difference predicted from group-mean zeros.

    The contribution of each zero ordinate gamma to the mean trace at p is
    modeled as -(2 sqrt(p)/log p) cos(gamma log p); the prediction is the
    group A minus group B contribution.  If an observed difference profile
    is supplied, its Pearson correlation and RMS are reported alongside.
    """
    ga = np.asarray(mean_gammas_a, dtype=np.float64)
    gb = np.asarray(mean_gammas_b, dtype=np.float64)
    if ga.shape != gb.shape:
        raise ValueError("mean zero vectors must have equal length")
    primes = np.asarray(primes, dtype=np.int64)
    if len(primes) == 0:
        raise ValueError("empty prime list")
    pred = _zero_contribution(ga, primes) - _zero_contribution(gb, primes)
    rms_pred = float(np.sqrt(np.mean(pred**2)))
    if observed_diff is None:
        return ExplicitPrediction(primes, pred, None, rms_pred, None)
    obs = np.asarray(observed_diff, dtype=np.float64)
    if obs.shape != pred.shape:
        raise ValueError("observed profile does not match the prime list")
    corr = float(np.corrcoef(pred, obs)[0, 1])
    rms_obs = float(np.sqrt(np.mean(obs**2)))
    return ExplicitPrediction(primes, pred, corr, rms_pred, rms_obs)


ZERO_CSV_FIELDS = ("label", "gamma1", "gamma2", "gamma3", "gamma4", "gamma5",
                   "complete", "t_max")


def write_zero_sets_csv(path, zero_sets: Sequence[ZeroSet]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ZERO_CSV_FIELDS)
        for z in zero_sets:
            cells = [repr(float(g)) for g in z.gammas]
            cells += [""] * (5 - len(cells))
            writer.writerow([z.label, *cells, int(z.complete), repr(float(z.t_max))])


def read_zero_sets_csv(path) -> list[ZeroSet]:
    """Import externally computed zeros in the same CSV layout."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ZERO_CSV_FIELDS:
            raise ValueError(f"bad zeros CSV header: {header}")
        for row in reader:
            label = row[0]
            gammas = [float(v) for v in row[1:6] if v != ""]
            complete = bool(int(row[6]))
            t_max = float(row[7])
            out.append(ZeroSet(label, np.array(gammas), 5, t_max, complete, 0.0))
    return out
