# -*- coding: utf-8 -*-
""" Monte Carlo experiments: coverage ratios and lengths of impulse response intervals.

Every replicate draws a DGP, simulates a panel, runs the estimation pipeline and builds
the requested intervals for the shock of interest. Results are aggregated per method,
centering, horizon and variable band.
"""

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .bootstrap import BootstrapConfig, bootstrap_irf
from .config import DEFAULTS, Settings
from .dgp import DgpSpec, generate, simulate
from .errors import DataError, HdsvarError, UsageError
from .inference import CENTERS, METHODS, ci_boot, ci_gaussian
from .pipeline import PipelineConfig, Target, estimate, evaluate, targets_for
from .presets import BANDS

logger = logging.getLogger(__name__)

REPORT_COLUMNS = (
    "method",
    "centering",
    "horizon",
    "band",
    "coverage",
    "length",
    "n_ok",
    "n_fail",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Options of a Monte Carlo study.

    Args:
        dgp: Design the replicates are drawn from.
        mc_reps: Number of Monte Carlo replicates.
        bootstrap: Bootstrap options; required when ``"boot"`` is among ``methods``.
        horizons: Horizons at which coverage is recorded.
        methods: Interval methods, a subset of ``{"boot", "gaussian"}``.
        alpha: Nominal level α.
        seed: Master seed.
        n_jobs: joblib workers over replicates.
        burn_in: Burn-in of the simulated panels.
        max_tracked: Variables 0..min(p, max_tracked)−1 are tracked.
        settings: Numerical settings.
    """

    dgp: DgpSpec
    mc_reps: int
    bootstrap: Optional[BootstrapConfig] = None
    horizons: Tuple[int, ...] = tuple(range(21))
    methods: Tuple[str, ...] = ("boot", "gaussian")
    alpha: float = 0.05
    seed: int = 0
    n_jobs: int = 1
    burn_in: int = DEFAULTS.burn_in
    max_tracked: int = DEFAULTS.max_tracked
    settings: Settings = field(default_factory=lambda: DEFAULTS)

    def __post_init__(self) -> None:
        if self.mc_reps < 1:
            err = "Need at least one replicate, got {}.".format(self.mc_reps)
            raise UsageError(err)
        methods = tuple(sorted(set(self.methods)))
        if not methods or not set(methods) <= METHODS:
            err = "Methods must be a non-empty subset of {}.".format(METHODS)
            raise UsageError(err)
        if "boot" in methods and self.bootstrap is None:
            raise UsageError("The boot method needs bootstrap options.")
        if not 0 < self.alpha < 1:
            raise UsageError("α must lie in (0, 1), got {}.".format(self.alpha))
        horizons = tuple(sorted(set(int(h) for h in self.horizons)))
        if not horizons or horizons[0] < 0:
            raise UsageError("Horizons must be non-empty and non-negative.")
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "horizons", horizons)

    @property
    def tracked(self) -> Tuple[int, ...]:
        return tuple(range(min(self.dgp.p, self.max_tracked)))

    @classmethod
    def from_dict(
        cls, document: dict, dgp: Optional[DgpSpec] = None
    ) -> "ExperimentConfig":
        """Builds a config from a JSON document.

        ``dgp`` may be given inline as a field dictionary or replaced by a resolved
        preset; ``bootstrap`` is a dictionary of :class:`BootstrapConfig` fields.
        """

        document = dict(document)
        try:
            if dgp is None:
                dgp = DgpSpec(**document.pop("dgp"))
            else:
                document.pop("dgp", None)
            document.pop("preset", None)
            boot = document.pop("bootstrap", None)
            if boot is not None:
                boot = BootstrapConfig(**boot)
            settings = Settings(**document.pop("settings", {}))
            return cls(dgp=dgp, bootstrap=boot, settings=settings, **document)
        except (KeyError, TypeError) as error:
            raise UsageError("Invalid experiment config: {}".format(error)) from error

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ReportRow:
    method: str
    centering: str
    horizon: int
    band: str
    coverage: float
    length: float
    n_ok: int
    n_fail: int


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated coverage ratios and mean lengths of one study."""

    rows: Tuple[ReportRow, ...]
    failures: int = 0
    wall_clock: float = 0.0

    def frame(self) -> pd.DataFrame:
        records = [dataclasses.asdict(row) for row in self.rows]
        return pd.DataFrame(records, columns=list(REPORT_COLUMNS))

    def lookup(self, method: str, centering: str, horizon: int, band: str) -> ReportRow:
        key = (method, centering, horizon, band)
        for row in self.rows:
            if (row.method, row.centering, row.horizon, row.band) == key:
                return row
        raise KeyError(key)


@dataclass(frozen=True)
class ReplicateResult:
    """Per-target coverage bits and lengths of one replicate by (method, center)."""

    index: int
    covered: Dict[Tuple[str, str], np.ndarray]
    lengths: Dict[Tuple[str, str], np.ndarray]
    trace: dict


# ================================ Bands ================================


def bands(spec: DgpSpec, tracked: Sequence[int]) -> Dict[str, Tuple[int, ...]]:
    """Splits tracked variables at the variable hit by the shock of interest."""
    hit = spec.shock_index[spec.shock]
    return {
        "before": tuple(j for j in tracked if j < hit),
        "shock": tuple(j for j in tracked if j == hit),
        "after": tuple(j for j in tracked if j > hit),
    }


# ================================ Replicates ================================


def _seed(seed: int, index: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, index, stream]).generate_state(1)[0])


def run_replicate(
    config: ExperimentConfig, index: int, inner_jobs: int = 1
) -> Optional[ReplicateResult]:
    """One Monte Carlo replicate; None when the replicate failed."""
    spec = config.dgp
    targets = targets_for(config.horizons, config.tracked, spec.shock)
    horizon = max(config.horizons)

    try:
        dgp = generate(spec, _seed(config.seed, index, 0), config.settings)
        truth = dgp.impulse_responses(horizon)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, index, 1]))
        panel = simulate(dgp, burn_in=config.burn_in, rng=rng)

        pipeline = PipelineConfig(
            lags=spec.lags,
            shock_index=spec.shock_index,
            horizon=horizon,
            settings=config.settings,
        )
        estimates = estimate(panel, pipeline)
        gaussian = "gaussian" in config.methods
        table = evaluate(estimates, targets, standard_errors=gaussian)

        dist = None
        if "boot" in config.methods:
            boot = dataclasses.replace(
                config.bootstrap,
                seed=_seed(config.seed, index, 2),
                alpha=config.alpha,
                n_jobs=inner_jobs,
            )
            dist = bootstrap_irf(estimates, targets, boot)
    except (HdsvarError, np.linalg.LinAlgError) as error:
        logger.warning("Monte Carlo replicate %d failed: %s", index, error)
        return None

    true_values = np.array([truth[t.horizon][t.variable, t.shock] for t in targets])
    centers = {"de": table.theta_de, "re": table.theta_re}
    n = estimates.n

    covered = {}
    lengths = {}
    alpha = config.alpha
    for method in config.methods:
        for center in sorted(CENTERS):
            intervals = []
            for k, target in enumerate(targets):
                value = centers[center][k]
                if method == "boot":
                    ci = ci_boot(value, dist, n, alpha, center, target)
                else:
                    ci = ci_gaussian(value, table.se[k], n, alpha, center, target)
                intervals.append(ci)
            covered[method, center] = np.array(
                [ci.covers(v) for ci, v in zip(intervals, true_values)], dtype=float
            )
            lengths[method, center] = np.array([ci.length for ci in intervals])

    trace = {
        "replicate": index,
        "targets": [[t.horizon, t.variable, t.shock] for t in targets],
        "truth": true_values.tolist(),
        "theta_re": table.theta_re.tolist(),
        "theta_de": table.theta_de.tolist(),
        "se": [None if np.isnan(v) else v for v in table.se.tolist()],
        "boot_failures": None if dist is None else dist.failures,
    }
    return ReplicateResult(index, covered, lengths, trace)


def aggregate(
    config: ExperimentConfig, results: Sequence[Optional[ReplicateResult]]
) -> Tuple[ReportRow, ...]:
    """Averages coverage bits and lengths over kept replicates and band members."""
    targets = targets_for(config.horizons, config.tracked, config.dgp.shock)
    position = {t: k for k, t in enumerate(targets)}
    kept = [r for r in results if r is not None]
    n_fail = len(results) - len(kept)
    groups = bands(config.dgp, config.tracked)
    shock = config.dgp.shock

    rows = []
    for method in config.methods:
        for center in sorted(CENTERS):
            for h in config.horizons:
                for band in BANDS:
                    members = [position[Target(h, j, shock)] for j in groups[band]]
                    if not members:
                        continue
                    if kept:
                        key = method, center
                        bits = np.vstack([r.covered[key][members] for r in kept])
                        widths = np.vstack([r.lengths[key][members] for r in kept])
                        coverage, length = float(bits.mean()), float(widths.mean())
                    else:
                        coverage = length = float("nan")
                    row = ReportRow(
                        method, center, h, band, coverage, length, len(kept), n_fail
                    )
                    rows.append(row)
    return tuple(rows)


def run(config: ExperimentConfig, trace_path: Optional[str] = None) -> ExperimentReport:
    """Runs the study; replicate m draws from ``SeedSequence([seed, m, stream])``.

    Args:
        config: Study options.
        trace_path: Optional JSONL file receiving one record per replicate.

    Returns:
        The aggregated report. Failed replicates are excluded and counted.
    """

    started = time.perf_counter()
    inner = 1
    if config.bootstrap is not None and config.n_jobs == 1:
        inner = config.bootstrap.n_jobs
    logger.info(
        "Monte Carlo on %s: %d replicates, methods %s",
        config.dgp.name or "custom DGP",
        config.mc_reps,
        ",".join(config.methods),
    )

    results = Parallel(n_jobs=config.n_jobs)(
        delayed(run_replicate)(config, m, inner) for m in range(config.mc_reps)
    )

    rows = aggregate(config, results)
    failures = sum(r is None for r in results)
    if failures:
        logger.warning("%d of %d replicates failed", failures, config.mc_reps)

    if trace_path is not None:
        dump_trace([r for r in results if r is not None], trace_path)

    return ExperimentReport(rows, failures, time.perf_counter() - started)


def dump_trace(results: Sequence[ReplicateResult], path: str) -> None:
    with open(path, "w") as handle:
        for result in sorted(results, key=lambda r: r.index):
            handle.write(json.dumps(result.trace, sort_keys=True))
            handle.write("\n")


# ================================ Report files ================================


def emit_report(report: ExperimentReport, path: str) -> None:
    """Writes the report as long-format CSV (header only when there are no rows)."""
    report.frame().to_csv(path, index=False)


def read_report(path: str) -> ExperimentReport:
    try:
        frame = pd.read_csv(path, keep_default_na=True)
    except (FileNotFoundError, pd.errors.EmptyDataError) as error:
        raise DataError("Cannot read report {}: {}".format(path, error)) from error

    missing = set(REPORT_COLUMNS) - set(frame.columns)
    if missing:
        raise DataError("Report {} lacks columns {}.".format(path, sorted(missing)))

    rows: List[ReportRow] = []
    for record in frame.to_dict(orient="records"):
        rows.append(
            ReportRow(
                method=str(record["method"]),
                centering=str(record["centering"]),
                horizon=int(record["horizon"]),
                band=str(record["band"]),
                coverage=float(record["coverage"]),
                length=float(record["length"]),
                n_ok=int(record["n_ok"]),
                n_fail=int(record["n_fail"]),
            )
        )
    failures = rows[0].n_fail if rows else 0
    return ExperimentReport(tuple(rows), failures)
