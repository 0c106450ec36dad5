# -*- coding: utf-8 -*-
""" Command line front-end: ``hdsvar simulate|fit|irf|ci|fevd-test|network|montecarlo``.

Variables and shocks are numbered from 1 on the command line and in CSV output.
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .bootstrap import BootstrapConfig, bootstrap_irf
from .config import Settings
from .dgp import generate, simulate
from .errors import DataError, NumericalError, UsageError
from .harness import ExperimentConfig, emit_report, run
from .inference import (
    CENTERS,
    METHODS,
    FevdInference,
    ci_boot,
    ci_gaussian,
    fevd_network,
)
from .io import (
    read_dgp,
    read_fit,
    read_json,
    read_panel,
    write_dgp,
    write_edges,
    write_fit,
    write_json,
    write_panel,
    write_replicates,
    write_table,
)
from .pipeline import ImpulseInference, PipelineConfig, estimate, evaluate, targets_for
from .presets import EXIT_CODES, preset

logger = logging.getLogger(__name__)

IRF_COLUMNS = ("h", "j", "r", "theta_re", "theta_raw", "theta_de", "se")
CI_COLUMNS = (
    "h",
    "j",
    "r",
    "theta_re",
    "theta_de",
    "se",
    "lower",
    "upper",
    "method",
    "center",
)
NETWORK_COLUMNS = ("i", "j", "h", "w_hat", "stat", "p_value", "edge")


# ================================ Argument helpers ================================


def index_list(text: str) -> Tuple[int, ...]:
    """Parses ``"1,2,4"`` into 0-based indices."""
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as error:
        err = "expected comma separated integers, got {!r}".format(text)
        raise argparse.ArgumentTypeError(err) from error
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("indices start at 1, got {!r}".format(text))
    return tuple(v - 1 for v in values)


def name_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def float_list(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as error:
        err = "expected comma separated numbers, got {!r}".format(text)
        raise argparse.ArgumentTypeError(err) from error


def positive(text: str) -> int:
    value = int(text)
    if value < 1:
        err = "expected a positive integer, got {}".format(text)
        raise argparse.ArgumentTypeError(err)
    return value


def position(text: str) -> int:
    """Parses a 1-based position into a 0-based index."""
    return positive(text) - 1


def _output(path: Optional[str]):
    return sys.stdout if path in (None, "-") else path


def _settings() -> Settings:
    return Settings.from_env()


def _shock_position(estimates, shock: int) -> int:
    count = len(estimates.config.shock_index)
    if not 0 <= shock < count:
        raise UsageError("Shock of interest {} outside 1..{}.".format(shock + 1, count))
    return shock


def _variables(estimates, variables: Optional[Sequence[int]]) -> Tuple[int, ...]:
    if variables is None:
        return tuple(range(estimates.panel.p))
    for j in variables:
        if j >= estimates.panel.p:
            err = "Variable {} outside 1..{}.".format(j + 1, estimates.panel.p)
            raise UsageError(err)
    return tuple(variables)


def _load(args):
    panel = read_panel(args.data)
    horizon = getattr(args, "horizon", None)
    return read_fit(args.fit, panel, horizon=horizon, settings=_settings())


# ================================ Subcommands ================================


def cmd_simulate(args) -> int:
    if args.dgp:
        dgp = read_dgp(args.dgp)
    else:
        spec = preset(args.preset)
        if args.n is not None:
            spec = spec.replace(n=args.n)
        dgp = generate(spec, args.seed, _settings())

    panel = simulate(dgp, n=args.n, burn_in=args.burn_in, rng=args.seed)
    os.makedirs(args.out, exist_ok=True)
    write_panel(panel, os.path.join(args.out, "data.csv"))
    write_dgp(dgp, os.path.join(args.out, "dgp.json"))
    name = dgp.spec.name or "DGP"
    logger.info("Simulated %d×%d panel from %s", panel.n, panel.p, name)
    return EXIT_CODES.ok


def cmd_fit(args) -> int:
    panel = read_panel(args.data)
    config = PipelineConfig(
        lags=args.lags,
        shock_index=args.shocks,
        horizon=args.horizon,
        lambda_grid=args.lambda_grid,
        settings=_settings(),
        n_jobs=args.threads,
    )
    estimates = estimate(panel, config)
    write_fit(estimates, args.out)
    if estimates.fit is not None and not estimates.fit.converged:
        logger.warning("Some lasso rows did not converge; see rows in %s", args.out)
    return EXIT_CODES.ok


def cmd_irf(args) -> int:
    estimates = _load(args)
    shock = _shock_position(estimates, args.shock_of_interest)
    inference = ImpulseInference(estimates)

    records = []
    horizons = range(estimates.config.horizon + 1)
    for target in targets_for(horizons, _variables(estimates, args.variables), shock):
        records.append(
            {
                "h": target.horizon,
                "j": target.variable + 1,
                "r": target.shock + 1,
                "theta_re": inference.theta_re(target),
                "theta_raw": inference.theta_raw(target),
                "theta_de": inference.theta_de(target),
                "se": inference.se_theta(target),
            }
        )
    write_table(records, _output(args.out), IRF_COLUMNS)
    return EXIT_CODES.ok


def cmd_ci(args) -> int:
    if args.method == "boot" and not args.boot_reps:
        raise UsageError("The boot method needs --boot-reps ≥ 1.")

    estimates = _load(args)
    shock = _shock_position(estimates, args.shock_of_interest)
    horizons = range(estimates.config.horizon + 1)
    targets = targets_for(horizons, _variables(estimates, args.variables), shock)
    table = evaluate(estimates, targets)
    centers = {"de": table.theta_de, "re": table.theta_re}

    dist = None
    if args.method == "boot":
        boot = BootstrapConfig(
            reps=args.boot_reps,
            seed=args.seed,
            alpha=args.alpha,
            burn_in=args.burn_in,
            freeze_tuning=args.freeze_tuning,
            n_jobs=args.threads,
        )
        dist = bootstrap_irf(estimates, targets, boot)
        if args.replicates:
            write_replicates(dist, args.replicates)

    records = []
    for k, target in enumerate(targets):
        center = centers[args.center][k]
        if dist is not None:
            ci = ci_boot(center, dist, estimates.n, args.alpha, args.center, target)
        else:
            se = table.se[k]
            ci = ci_gaussian(center, se, estimates.n, args.alpha, args.center, target)
        records.append(
            {
                "h": target.horizon,
                "j": target.variable + 1,
                "r": target.shock + 1,
                "theta_re": table.theta_re[k],
                "theta_de": table.theta_de[k],
                "se": table.se[k],
                "lower": ci.lower,
                "upper": ci.upper,
                "method": ci.method,
                "center": ci.center_kind,
            }
        )
    write_table(records, _output(args.out), CI_COLUMNS)
    return EXIT_CODES.ok


def cmd_fevd_test(args) -> int:
    if not 0 <= args.delta < 1:
        raise UsageError("δ must lie in [0, 1), got {}.".format(args.delta))

    estimates = _load(args)
    shock = _shock_position(estimates, args.shock)
    variable = _variables(estimates, [args.variable])[0]
    fevds = FevdInference(estimates)
    result = fevds.test(variable, shock, args.horizon, args.delta, args.alpha)
    estimate_ = fevds.estimate(variable, shock, args.horizon)

    record = {
        "variable": variable + 1,
        "shock": shock + 1,
        "horizon": args.horizon,
        "fevd": estimate_.value,
        "statistic": result.statistic,
        "critical_value": result.critical_value,
        "p_value": result.p_value,
        "reject": bool(result.reject),
        "variant": result.variant,
        "delta": result.delta,
    }
    if args.out:
        write_json(record, args.out)
    else:
        print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_CODES.ok


def cmd_network(args) -> int:
    if (args.threshold is None) == (args.fdr is None):
        raise UsageError("Give exactly one of --threshold or --fdr.")

    estimates = _load(args)
    fevds = FevdInference(estimates)
    variables = _variables(estimates, args.variables)
    shocks = range(len(estimates.config.shock_index))
    grid = [fevds.estimate(i, j, args.horizon) for i in variables for j in shocks]

    results = [None] * len(grid)
    if args.threshold is not None:
        edges = fevd_network(grid, threshold=args.threshold)
    else:
        pairs = [(w.variable, w.shock) for w in grid]
        results = fevds.test_grid(pairs, args.horizon, 0.0, args.fdr, args.threads)
        p_values = [result.p_value for result in results]
        edges = fevd_network(grid, p_values=p_values, fdr=args.fdr)

    linked = {(edge.variable, edge.shock) for edge in edges}
    records = []
    for w, result in zip(grid, results):
        records.append(
            {
                "i": w.variable + 1,
                "j": w.shock + 1,
                "h": args.horizon,
                "w_hat": w.value,
                "stat": None if result is None else result.statistic,
                "p_value": None if result is None else result.p_value,
                "edge": int((w.variable, w.shock) in linked),
            }
        )
    write_table(records, _output(args.out), NETWORK_COLUMNS)
    if args.edges:
        write_edges(edges, args.edges)
    logger.info("FEVD network has %d edges", len(edges))
    return EXIT_CODES.ok


def cmd_montecarlo(args) -> int:
    document = {}
    if args.config:
        document = read_json(args.config)

    name = args.preset or document.get("preset")
    if name is None and "dgp" not in document:
        raise UsageError("Give --preset or a config file naming a preset or a dgp.")
    spec = preset(name) if name is not None else None

    overrides = {
        "mc_reps": args.mc_reps,
        "alpha": args.alpha,
        "seed": args.seed,
        "n_jobs": args.threads,
        "burn_in": args.burn_in,
    }
    if args.methods is not None:
        overrides["methods"] = args.methods
    if args.horizon is not None:
        overrides["horizons"] = list(range(args.horizon + 1))
    for key, value in overrides.items():
        if value is not None:
            document[key] = value
    document.setdefault("mc_reps", 200)

    methods = document.get("methods", ("boot", "gaussian"))
    if "boot" in methods:
        boot = dict(document.get("bootstrap") or {})
        if args.boot_reps is not None:
            boot["reps"] = args.boot_reps
        boot.setdefault("reps", 500)
        document["bootstrap"] = boot

    config = ExperimentConfig.from_dict(document, dgp=spec)
    report = run(config, trace_path=args.trace)
    emit_report(report, _output(args.out))
    logger.info(
        "Monte Carlo finished in %.1f s with %d failed replicates",
        report.wall_clock,
        report.failures,
    )
    return EXIT_CODES.ok


# ================================ Parser ================================


def _data_arguments(parser, horizon_required: bool = False) -> None:
    parser.add_argument("--data", required=True, help="Panel CSV, one row per time")
    parser.add_argument("--fit", required=True, help="Output of `hdsvar fit`")
    parser.add_argument(
        "--horizon", type=int, required=horizon_required, help="Maximum horizon H"
    )


def _target_arguments(parser) -> None:
    parser.add_argument(
        "--shock-of-interest",
        type=position,
        default=0,
        help="Position r in the shock list",
    )
    parser.add_argument(
        "--variables", type=index_list, help="Responding variables (default all)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdsvar",
        description="Inference on impulse responses of sparse high-dimensional SVARs.",
    )
    version = "%(prog)s " + __version__
    parser.add_argument("--version", action="version", version=version)
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="More logging (repeatable)"
    )
    parser.add_argument("-q", "--quiet", action="count", default=0, help="Less logging")
    parser.add_argument(
        "--threads", type=int, default=-1, help="joblib workers (default all cores)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="Draw a DGP and simulate a panel")
    sim.add_argument(
        "--preset", default="class1-desk", help="DGP preset, e.g. class1B+C"
    )
    sim.add_argument("--dgp", help="Reuse a stored dgp.json instead of drawing one")
    sim.add_argument("--n", type=positive, help="Sample size override")
    sim.add_argument("--burn-in", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="Output directory")
    sim.set_defaults(handler=cmd_simulate)

    fit = commands.add_parser("fit", help="Estimate slopes, impact and covariances")
    fit.add_argument("--data", required=True)
    fit.add_argument("--lags", type=positive, required=True, help="VAR order d")
    fit.add_argument(
        "--shocks", type=index_list, required=True, help="Shock variables, in order"
    )
    fit.add_argument("--horizon", type=int, default=20)
    fit.add_argument(
        "--lambda-grid", type=float_list, help="Descending penalty grid for all rows"
    )
    fit.add_argument("--out", required=True, help="Output directory")
    fit.set_defaults(handler=cmd_fit)

    irf = commands.add_parser("irf", help="Point estimates of impulse responses")
    _data_arguments(irf)
    _target_arguments(irf)
    irf.add_argument("--out", help="Output CSV (stdout by default)")
    irf.set_defaults(handler=cmd_irf)

    ci = commands.add_parser("ci", help="Confidence intervals for impulse responses")
    _data_arguments(ci)
    _target_arguments(ci)
    ci.add_argument("--method", choices=sorted(METHODS), default="boot")
    ci.add_argument("--center", choices=sorted(CENTERS), default="de")
    ci.add_argument("--alpha", type=float, default=0.05)
    ci.add_argument("--boot-reps", type=int, default=0)
    ci.add_argument("--burn-in", type=int, default=200)
    ci.add_argument("--seed", type=int, default=0)
    ci.add_argument(
        "--freeze-tuning", action="store_true", help="Reuse the original penalties"
    )
    ci.add_argument("--replicates", help="Bootstrap replicate dump (CSV)")
    ci.add_argument("--out", help="Output CSV (stdout by default)")
    ci.set_defaults(handler=cmd_ci)

    test = commands.add_parser("fevd-test", help="Test a forecast error variance share")
    _data_arguments(test, horizon_required=True)
    test.add_argument("--variable", type=position, required=True, help="Variable i")
    test.add_argument("--shock", type=position, required=True, help="Shock position j")
    test.add_argument("--delta", type=float, default=0.0)
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--out", help="Output JSON (stdout by default)")
    test.set_defaults(handler=cmd_fevd_test)

    net = commands.add_parser("network", help="FEVD network edges")
    _data_arguments(net, horizon_required=True)
    net.add_argument("--variables", type=index_list)
    net.add_argument("--threshold", type=float, help="Relevance threshold τ")
    net.add_argument("--fdr", type=float, help="Benjamini–Hochberg level")
    net.add_argument("--edges", help="Edge list output, one `i j weight` per line")
    net.add_argument("--out", help="FEVD grid CSV (stdout by default)")
    net.set_defaults(handler=cmd_network)

    mc = commands.add_parser("montecarlo", help="Coverage study")
    mc.add_argument("--preset", help="DGP preset")
    mc.add_argument("--config", help="Experiment JSON")
    mc.add_argument("--mc-reps", type=positive)
    mc.add_argument("--boot-reps", type=positive)
    mc.add_argument("--methods", type=name_list)
    mc.add_argument("--horizon", type=int)
    mc.add_argument("--alpha", type=float)
    mc.add_argument("--burn-in", type=int)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--trace", help="Per-replicate JSONL trace")
    mc.add_argument("--out", help="Report CSV (stdout by default)")
    mc.set_defaults(handler=cmd_montecarlo)

    return parser


def _exit_code(error: BaseException) -> int:
    if isinstance(error, (UsageError, NotImplementedError)):
        return EXIT_CODES.usage
    if isinstance(error, (DataError, OSError)):
        return EXIT_CODES.data
    if isinstance(error, NumericalError):
        return EXIT_CODES.numerical
    raise error


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.WARNING - 10 * args.verbose + 10 * args.quiet
    logging.basicConfig(
        level=min(max(level, logging.DEBUG), logging.CRITICAL),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        return args.handler(args)
    except (UsageError, NotImplementedError, DataError, OSError, NumericalError) as exc:
        logger.error("%s", exc)
        return _exit_code(exc)


if __name__ == "__main__":
    sys.exit(main())
