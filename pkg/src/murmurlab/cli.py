"""Command-line orchestrator.

One subcommand per analysis stage, all driven by a RunConfig assembled from
an optional key=value config file overridden by command-line flags.  Every
report embeds the config hash, the seed, and SHA-256 digests of the input
files, and contains no timestamps, so identical inputs produce byte-identical
reports.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .confound import (
    bsd_group_ratios,
    control_omega,
    euler_cumsum,
    invariant_correlation,
    lvalue_band,
    match_nn,
    matched_rms,
    triple_control,
)
from .curves import INVARIANT_IDS, dedupe_isogeny, parse_curve_table
from .diagnostics import (
    bad_prime_share,
    classify_reduction,
    crossover_scan,
    moment_profile,
    satotate_ks,
)
from .export import (
    write_json,
    write_series_csv,
    write_svg_lineplot,
    write_table_csv,
    write_xy_csv,
)
from .lfunctions import (
    LSeries,
    density_comparison,
    explicit_predict,
    hotelling_t2,
    locate_zeros,
    read_zero_sets_csv,
    write_zero_sets_csv,
)
from .stratify import (
    SCALE_WINDOWS,
    SHA_RULE,
    TABLE_RULES,
    bonferroni,
    partition,
    scale_scan,
    stratify,
)
from .traces import (
    PrimeList,
    build_trace_matrix,
    default_prime_list,
    load_trace_matrix,
    persist_trace_matrix,
)
from .windows import (
    MurmurationProfile,
    cross_correlation,
    murmuration_profile,
    residual_correlation,
    savgol_detrend,
    sliding_window_series,
    welch_psd,
)

RULES_BY_NAME = {rule.name: rule for rule in TABLE_RULES}


@dataclass
class RunConfig:
    curves: str | None = None
    cache: str | None = None
    zeros: str | None = None
    primes: int = 500
    window: float = 5000.0
    step: float = 500.0
    range: tuple[int, int] | None = None
    rule: str = "sha"
    band: tuple[float, float] | None = None
    shuffles: int = 10_000
    seed: int = 1
    threads: int = os.cpu_count() or 1
    out: str = "out"
    svg: bool = False
    invariant: str = "period"
    sample: int = 0
    scan_windows: tuple[tuple[int, int], ...] = tuple(
        (int(a), int(b)) for a, b in SCALE_WINDOWS
    )

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


class CliError(RuntimeError):
    pass


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise CliError(f"expected LO:HI, got {text!r}") from None


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_config_file(path) -> dict:
    """key=value lines; blank lines and # comments ignored."""
    values = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            if not hasattr(cfg, key):
                raise CliError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if key in ("range", "band"):
                setattr(cfg, key, _parse_range(value))
            elif key == "scan_windows":
                wins = tuple(
                    tuple(int(float(v)) for v in w.split(":")) for w in value.split(",")
                )
                setattr(cfg, key, wins)
            elif isinstance(current, bool):
                setattr(cfg, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(cfg, key, int(value))
            elif isinstance(current, float):
                setattr(cfg, key, float(value))
            else:
                setattr(cfg, key, value)
    # flags win over the config file
    for key in ("curves", "cache", "zeros", "primes", "window", "step", "rule",
                "shuffles", "seed", "threads", "out", "invariant", "sample"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if getattr(args, "range", None) is not None:
        lo, hi = _parse_range(args.range)
        cfg.range = (int(lo), int(hi))
    if getattr(args, "band", None) is not None:
        cfg.band = _parse_range(args.band)
    if getattr(args, "svg", False):
        cfg.svg = True
    if getattr(args, "scan_windows", None):
        cfg.scan_windows = tuple(
            tuple(int(v) for v in _parse_range(w)) for w in args.scan_windows.split(",")
        )
    return cfg


def _report_base(cfg: RunConfig, inputs: dict[str, str | None]) -> dict:
    return {
        "version": __version__,
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "inputs": {
            name: {"path": str(path), "sha256": _file_digest(path)}
            for name, path in inputs.items()
            if path
        },
    }


def _load_table(cfg: RunConfig):
    if not cfg.curves:
        raise CliError("a curves CSV is required (--curves)")
    with open(cfg.curves, newline="") as fh:
        result = parse_curve_table(fh)
    return result


def _load_matrix(cfg: RunConfig, table):
    primes = default_prime_list(cfg.primes)
    if cfg.cache and Path(cfg.cache).exists():
        matrix = load_trace_matrix(cfg.cache)
        if not set(table.labels) <= set(matrix.curve_labels):
            raise CliError(
                "trace cache does not cover the ingested table; rebuild with 'traces'"
            )
        if not np.array_equal(matrix.primes.primes, primes.primes):
            raise CliError("trace cache prime list differs from the requested one")
        return matrix
    return build_trace_matrix(table, primes, workers=cfg.threads)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    deduped = dedupe_isogeny(table)
    report = _report_base(cfg, {"curves": cfg.curves})
    report["ingest"] = {
        "n_curves": len(table),
        "n_rejected_rows": len(result.errors),
        "rejected": [{"line": e.line, "message": e.message} for e in result.errors[:100]],
        "rank_histogram": {str(k): v for k, v in table.rank_histogram().items()},
        "conductor_min": int(table.conductors.min()) if len(table) else None,
        "conductor_max": int(table.conductors.max()) if len(table) else None,
        "n_isogeny_classes": len(table.index_by_class),
        "dedupe_retained_ratio": (len(deduped) / len(table)) if len(table) else None,
    }
    return report


def cmd_traces(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    primes = default_prime_list(cfg.primes)
    cache_path = Path(cfg.cache) if cfg.cache else _out_dir(cfg) / "traces.bin"
    if cache_path.exists():
        existing = load_trace_matrix(cache_path)
        if tuple(existing.curve_labels) != tuple(table.labels):
            raise CliError(
                f"cache {cache_path} was built for a different curve table; "
                "remove it or point --cache elsewhere"
            )
        matrix = existing
        rebuilt = False
    else:
        matrix = build_trace_matrix(table, primes, workers=cfg.threads)
        persist_trace_matrix(matrix, cache_path)
        rebuilt = True
    report = _report_base(cfg, {"curves": cfg.curves, "cache": str(cache_path)})
    report["traces"] = {
        "n_curves": len(matrix),
        "n_primes": len(matrix.primes),
        "last_prime": int(matrix.primes.primes[-1]),
        "rebuilt": rebuilt,
        "bad_prime_entries": int(matrix.bad_flags.sum()),
    }
    return report


def cmd_windows(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    out = _out_dir(cfg)
    report = _report_base(cfg, {"curves": cfg.curves})
    per_invariant = {}
    for invariant in INVARIANT_IDS:
        entry = {}
        residuals = {}
        for rank in (0, 1):
            series = sliding_window_series(table, invariant, rank,
                                           cfg.window, cfg.step).finite()
            write_series_csv(out / f"windows_{invariant}_rank{rank}.csv",
                             series, ("center", "mean"))
            if cfg.svg and len(series):
                write_svg_lineplot(out / f"windows_{invariant}_rank{rank}.svg",
                                   series.centers, {invariant: series.values},
                                   f"{invariant}, rank {rank}")
            entry[f"rank{rank}_windows"] = int(len(series))
            try:
                residuals[rank] = savgol_detrend(series)
            except ValueError:
                residuals[rank] = None
        if residuals[0] is not None and residuals[1] is not None:
            try:
                entry["residual_correlation"] = residual_correlation(
                    residuals[0], residuals[1]
                )
            except ValueError:
                entry["residual_correlation"] = None
            for rank in (0, 1):
                res = residuals[rank]
                try:
                    freqs, power = welch_psd(res.values, segment=min(256, len(res)))
                    write_xy_csv(out / f"psd_{invariant}_rank{rank}.csv",
                                 freqs, power, ("frequency", "power"))
                except ValueError:
                    pass
            if np.array_equal(residuals[0].centers, residuals[1].centers):
                try:
                    lags, corr = cross_correlation(
                        residuals[0], residuals[1],
                        max_lag=min(20, len(residuals[0]) - 3),
                    )
                    peak = int(np.argmax(corr))
                    entry["cross_correlation_peak"] = {
                        "lag": int(lags[peak]),
                        "value": float(corr[peak]),
                    }
                except ValueError:
                    entry["cross_correlation_peak"] = None
        per_invariant[invariant] = entry
    report["windows"] = {
        "width": cfg.window,
        "step": cfg.step,
        "invariants": per_invariant,
    }
    return report


def _rank0_slice(cfg: RunConfig, table):
    conductor_range = cfg.range or (10_000, 50_000)
    return table.filter(rank=0, conductor_range=conductor_range), conductor_range


def cmd_stratify(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    matrix = _load_matrix(cfg, table)
    out = _out_dir(cfg)
    rules = TABLE_RULES if cfg.rule == "all" else (RULES_BY_NAME[cfg.rule],)
    rank0, conductor_range = _rank0_slice(cfg, table)
    report = _report_base(cfg, {"curves": cfg.curves, "cache": cfg.cache})
    entries = {}
    p_values = []
    for rule in rules:
        if rule.name == "root_number":
            # cross-rank calibration baseline: rank 0 vs rank 1
            in_range = table.filter(conductor_range=conductor_range)
            base = in_range.subset(
                [i for i, r in enumerate(in_range.records) if r.rank in (0, 1)]
            )
        else:
            base = rank0
        part, strat_report = stratify(base, matrix, rule,
                                      n_shuffles=cfg.shuffles, seed=cfg.seed)
        profiles = {
            name: murmuration_profile(members, matrix)
            for name, members in part.groups.items()
        }
        names = list(profiles)
        if len(names) == 2:
            diff = profiles[names[1]].mean_ap - profiles[names[0]].mean_ap
            write_xy_csv(out / f"diff_{rule.name}.csv", matrix.primes.primes,
                         diff, ("prime", "mean_ap_diff"))
        entries[rule.name] = {
            "report": strat_report.to_dict(),
            "group_sizes": part.sizes(),
            "n_unassigned": len(part.unassigned),
        }
        p_values.append(strat_report.p_value)
    adj = bonferroni(p_values)
    report["stratify"] = {
        "conductor_range": list(conductor_range),
        "rules": entries,
        "bonferroni": {
            "alpha": adj.alpha,
            "threshold": adj.threshold,
            "all_significant": all(adj.decisions),
        },
    }
    if len(cfg.scan_windows) >= 3:
        try:
            scan = scale_scan(table.filter(rank=0), matrix,
                              RULES_BY_NAME[cfg.rule if cfg.rule != "all" else "sha"],
                              cfg.scan_windows)
            report["stratify"]["scale_scan"] = {
                "windows": [list(w) for w in scan.windows],
                "rms": [float(v) for v in scan.rms_values],
                "alpha": scan.alpha,
                "r_squared": scan.r_squared,
            }
        except ValueError as exc:
            report["stratify"]["scale_scan"] = {"error": str(exc)}
    return report


def cmd_confound(cfg: RunConfig) -> dict:
    from .stratify import TAMAGAWA_RULE

    result = _load_table(cfg)
    table = result.table
    matrix = _load_matrix(cfg, table)
    rank0, conductor_range = _rank0_slice(cfg, table)
    report = _report_base(cfg, {"curves": cfg.curves, "cache": cfg.cache})
    battery = {}

    tam_part = partition(rank0, TAMAGAWA_RULE)
    for k in (2, 3, 4):
        try:
            _, rep = control_omega(rank0, matrix, tam_part, k,
                                   n_shuffles=cfg.shuffles, seed=cfg.seed)
            battery[f"tamagawa_omega_{k}"] = rep.to_dict()
        except ValueError as exc:
            battery[f"tamagawa_omega_{k}"] = {"error": str(exc)}

    try:
        matches = match_nn(rank0, tam_part.groups["group_a"],
                           tam_part.groups["group_b"], "conductor", 500.0)
        paired = matched_rms(matches, matrix)
        battery["tamagawa_conductor_matched"] = {
            "n_pairs": matches.n_pairs,
            "mean_distance": matches.mean_distance,
            "rms_group": paired.rms_group,
            "rms_per_pair": paired.rms_per_pair,
        }
        write_json(_out_dir(cfg) / "matched_pairs_tamagawa.json", {
            "key": matches.key,
            "max_distance": matches.max_distance,
            "pairs": [[a, b, d] for a, b, d in matches.pairs],
        })
    except ValueError as exc:
        battery["tamagawa_conductor_matched"] = {"error": str(exc)}

    band = cfg.band or (1.53, 2.84)
    try:
        banded = lvalue_band(rank0, band)
        part, rep = stratify(banded, matrix, SHA_RULE,
                             n_shuffles=cfg.shuffles, seed=cfg.seed)
        battery["sha_lvalue_band"] = {
            "band": list(band),
            "report": rep.to_dict(),
            "group_sizes": part.sizes(),
        }
        sha_part = partition(banded, SHA_RULE)
        matches = match_nn(banded, sha_part.groups["group_b"],
                           sha_part.groups["group_a"], "l_value", 0.1)
        paired = matched_rms(matches, matrix)
        battery["sha_lvalue_matched"] = {
            "n_pairs": matches.n_pairs,
            "mean_distance": matches.mean_distance,
            "rms_group": paired.rms_group,
        }
    except ValueError as exc:
        battery["sha_lvalue_band"] = {"error": str(exc)}

    try:
        triple = triple_control(table, matrix, band, conductor_range,
                                n_shuffles=cfg.shuffles, seed=cfg.seed)
        battery["sha_triple_control"] = {
            half: {"report": rep.to_dict(), "sizes": triple.sizes[half]}
            for half, rep in triple.reports.items()
        }
    except ValueError as exc:
        battery["sha_triple_control"] = {"error": str(exc)}

    try:
        sha_part = partition(rank0, SHA_RULE)
        groups = {"sha_1": sha_part.groups["group_a"],
                  "sha_ge4": sha_part.groups["group_b"]}
        battery["bsd_group_ratios"] = bsd_group_ratios(rank0, groups)
        prof_a = murmuration_profile(groups["sha_1"], matrix)
        prof_b = murmuration_profile(groups["sha_ge4"], matrix)
        cum = euler_cumsum(prof_a, prof_b)
        battery["euler_cumsum"] = {
            "argmax_prime": cum.argmax_prime,
            "terminal": list(cum.terminal),
        }
        write_xy_csv(_out_dir(cfg) / "euler_delta.csv", cum.primes, cum.delta,
                     ("prime", "delta"))
    except (ValueError, ZeroDivisionError) as exc:
        battery["bsd_group_ratios"] = {"error": str(exc)}

    try:
        battery["period_vs_log_conductor"] = invariant_correlation(
            rank0, "period", "conductor", log_y=True
        )
    except ValueError as exc:
        battery["period_vs_log_conductor"] = {"error": str(exc)}

    report["confound"] = {"conductor_range": list(conductor_range),
                          "battery": battery}
    return report


def cmd_diagnose(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    matrix = _load_matrix(cfg, table)
    rank0, conductor_range = _rank0_slice(cfg, table)
    band = cfg.band or (1.10, 3.28)
    report = _report_base(cfg, {"curves": cfg.curves, "cache": cfg.cache})
    out = _out_dir(cfg)
    diag = {}
    banded = lvalue_band(rank0, band)
    part = partition(banded, SHA_RULE)
    groups = {"sha_1": part.groups["group_a"], "sha_ge4": part.groups["group_b"]}
    moments = {}
    for name, members in groups.items():
        prof = moment_profile(members, matrix)
        moments[name] = prof.summary()
        write_table_csv(
            out / f"moments_{name}.csv",
            ("prime", "mean", "variance", "variance_over_p", "skewness",
             "excess_kurtosis"),
            zip(prof.primes.tolist(), prof.mean.tolist(), prof.variance.tolist(),
                prof.variance_over_p.tolist(), prof.skewness.tolist(),
                prof.excess_kurtosis.tolist()),
        )
    diag["moments"] = moments
    ks = satotate_ks(groups["sha_1"], groups["sha_ge4"], matrix)
    diag["sato_tate_ks"] = {"D": ks.statistic, "p": ks.p_value,
                            "n_a": ks.n_a, "n_b": ks.n_b}
    prof_a = murmuration_profile(groups["sha_1"], matrix)
    prof_b = murmuration_profile(groups["sha_ge4"], matrix)
    diff = MurmurationProfile(prof_a.primes, prof_b.mean_ap - prof_a.mean_ap,
                              prof_a.n_curves + prof_b.n_curves)
    cross = crossover_scan(diff)
    diag["crossover"] = {
        "crossing_prime": cross.crossing_prime,
        "direction": cross.direction,
        "landmarks": {str(k): v for k, v in cross.landmarks.items()},
    }
    red = classify_reduction(matrix, table)
    write_table_csv(out / "reduction_types.csv", ("label", "prime", "type"),
                    red.entries)
    diag["reduction"] = {
        "type_counts": red.type_counts,
        "tamagawa_agreement": red.agreement_fraction,
        "n_classified": red.n_classified_curves,
        "n_unclassifiable": red.n_unclassifiable,
    }
    share = bad_prime_share(groups["sha_1"], groups["sha_ge4"], matrix)
    diag["bad_prime_share"] = {
        "full_rms": share.full_rms,
        "masked_rms": share.masked_rms,
        "share_percent": share.share_percent,
    }
    report["diagnose"] = {"band": list(band),
                          "conductor_range": list(conductor_range),
                          "groups": {k: len(v) for k, v in groups.items()},
                          **diag}
    return report


def cmd_zeros(cfg: RunConfig) -> dict:
    result = _load_table(cfg)
    table = result.table
    matrix = _load_matrix(cfg, table)
    rank0, conductor_range = _rank0_slice(cfg, table)
    band = cfg.band or (1.53, 2.84)
    out = _out_dir(cfg)
    report = _report_base(cfg, {"curves": cfg.curves, "zeros": cfg.zeros})
    banded = lvalue_band(rank0, band)
    part = partition(banded, SHA_RULE)
    groups = {"sha_1": list(part.groups["group_a"]),
              "sha_ge4": list(part.groups["group_b"])}
    rng = np.random.default_rng(cfg.seed)
    zero_sets = {}
    if cfg.zeros:
        imported = {z.label: z for z in read_zero_sets_csv(cfg.zeros)}
        for name, members in groups.items():
            zero_sets[name] = [imported[l] for l in members if l in imported]
    else:
        for name, members in groups.items():
            chosen = members
            if cfg.sample and cfg.sample < len(members):
                chosen = list(rng.choice(members, size=cfg.sample, replace=False))
            sets = []
            for label in chosen:
                series = LSeries.from_curve(table.record(label))
                sets.append(locate_zeros(series))
            zero_sets[name] = sets
            write_zero_sets_csv(out / f"zeros_{name}.csv", sets)
    complete = {name: [z for z in sets if z.complete]
                for name, sets in zero_sets.items()}
    zeros_report = {
        "band": list(band),
        "n_complete": {k: len(v) for k, v in complete.items()},
    }
    k = 5
    if all(len(v) > k + 1 for v in complete.values()):
        hot = hotelling_t2(complete["sha_1"], complete["sha_ge4"])
        zeros_report["hotelling"] = {
            "t2": hot.t2, "f": hot.f_stat, "p": hot.p_value, "df": list(hot.df),
        }
        cond = {name: [table.record(z.label).conductor for z in sets]
                for name, sets in complete.items()}
        comp = density_comparison(complete["sha_1"], cond["sha_1"],
                                  complete["sha_ge4"], cond["sha_ge4"])
        zeros_report["one_level_density"] = {
            "deviation_sha_1": comp.deviation_a,
            "deviation_sha_ge4": comp.deviation_b,
            "ks_all": list(comp.ks_all),
            "ks_first": list(comp.ks_first),
        }
        from .lfunctions import one_level_density

        for name in ("sha_1", "sha_ge4"):
            dens = one_level_density(complete[name], cond[name])
            write_xy_csv(out / f"density_{name}.csv", dens.bin_centers,
                         dens.density, ("scaled_ordinate", "density"))
        mean_a = np.vstack([z.gammas for z in complete["sha_1"]]).mean(axis=0)
        mean_b = np.vstack([z.gammas for z in complete["sha_ge4"]]).mean(axis=0)
        prof_a = murmuration_profile(groups["sha_1"], matrix)
        prof_b = murmuration_profile(groups["sha_ge4"], matrix)
        observed = prof_b.mean_ap - prof_a.mean_ap
        pred = explicit_predict(mean_b, mean_a, matrix.primes.primes, observed)
        zeros_report["explicit_formula"] = {
            "correlation": pred.correlation,
            "rms_predicted": pred.rms_predicted,
            "rms_observed": pred.rms_observed,
        }
        write_xy_csv(out / "explicit_prediction.csv", pred.primes,
                     pred.predicted_diff, ("prime", "predicted_diff"))
    else:
        zeros_report["hotelling"] = {
            "error": "not enough complete zero sets per group (need > k+1)"
        }
    report["zeros"] = zeros_report
    return report


def cmd_report(cfg: RunConfig) -> dict:
    out = _out_dir(cfg)
    aggregate = {"version": __version__, "reports": {}}
    for path in sorted(out.glob("*.json")):
        if path.name == "report.json":
            continue
        aggregate["reports"][path.stem] = json.loads(path.read_text())
    return aggregate


_SUBCOMMANDS = {
    "ingest": cmd_ingest,
    "traces": cmd_traces,
    "windows": cmd_windows,
    "stratify": cmd_stratify,
    "confound": cmd_confound,
    "diagnose": cmd_diagnose,
    "zeros": cmd_zeros,
    "report": cmd_report,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="murmurlab",
        description="Murmuration and BSD-invariant analysis workbench",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--curves", help="canonical curves CSV")
        p.add_argument("--cache", help="binary trace cache path")
        p.add_argument("--zeros", help="externally computed zeros CSV")
        p.add_argument("--primes", type=int, help="prime count (default 500)")
        p.add_argument("--window", type=float, help="window width W")
        p.add_argument("--step", type=float, help="window step S")
        p.add_argument("--range", help="conductor range LO:HI")
        p.add_argument("--rule", choices=[*RULES_BY_NAME, "all"],
                       help="stratification rule")
        p.add_argument("--band", help="L-value band LO:HI")
        p.add_argument("--shuffles", type=int, help="permutation shuffles")
        p.add_argument("--seed", type=int, help="RNG seed (always recorded)")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--out", help="output directory")
        p.add_argument("--svg", action="store_true", help="emit SVG plots")
        p.add_argument("--invariant", choices=INVARIANT_IDS)
        p.add_argument("--sample", type=int,
                       help="curves sampled per group for zero statistics")
        p.add_argument("--scan-windows", dest="scan_windows",
                       help="comma-separated LO:HI windows for the scale scan")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        report = _SUBCOMMANDS[args.command](cfg)
    except (CliError, ValueError, OSError) as exc:
        error_report = {"command": args.command, "error": str(exc)}
        out = Path(getattr(args, "out", None) or "out")
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / f"{args.command}_error.json", error_report)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = _out_dir(cfg)
    write_json(out / f"{args.command}.json", report)
    print(f"{args.command}: report written to {out / (args.command + '.json')}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
