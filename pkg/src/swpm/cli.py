"""Command line front end: ``swpm {run,table-errors,oracle,equilibrium,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config, serialize_config
from .errors import ConfigError, ParameterError, SWPMError
from .moments import compute_moments
from .particles import RandomSource, sample_initial_state
from .reduction import ReductionScheme
from .reference import equilibrium_moment_set, mixture_moments

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

CSV_HEADER = ("time", "moment", "stat", "value")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(stream, config: ExperimentConfig, rows, extra_comments=()) -> None:
    """Long-format CSV preceded by ``# key=value`` lines holding the resolved config."""
    for line in serialize_config(config).splitlines():
        stream.write(f"# {line}\n")
    for key, value in extra_comments:
        stream.write(f"# {key}={value}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for t, moment, stat, value in rows:
        writer.writerow((fmt17(t), moment, stat, fmt17(value)))


def read_csv(path) -> tuple[dict[str, str], list[tuple[float, str, str, float]]]:
    """Parse a file written by :func:`write_csv` into ``(comments, rows)``."""
    comments: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                comments[key] = value
            else:
                body.append(line)
    reader = csv.reader(io.StringIO("".join(body)))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ConfigError(f"unexpected CSV header {header}")
    return comments, [(float(t), m, s, float(v)) for t, m, s, v in reader]


def _resolve_config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        changes["output_path"] = args.out
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return config.replace(**changes) if changes else config


def _emit(config: ExperimentConfig, series, extra, out) -> None:
    from .ensemble import reference_for

    reference = reference_for(config)
    rows = series.statistics(config.moments, reference)
    if config.output_path == "-":
        write_csv(out, config, rows, extra)
    else:
        with open(config.output_path, "w", encoding="utf-8", newline="") as fh:
            write_csv(fh, config, rows, extra)
        print(f"wrote {len(rows)} rows to {config.output_path}", file=out)
    summary = sys.stderr if config.output_path == "-" else out
    last = {name: (series.relative_error(name, reference)[-1], series.half_width(name, reference)[-1])
            for name in config.moments} if series.n_ensembles >= 2 else {}
    for name, (err, ci) in last.items():
        print(f"t={config.t_end:g} {name}: E={err:.4g} CI={ci:.4g}", file=summary)
    coll = float(series.collision_seconds.sum())
    red = float(series.reduction_seconds.sum())
    print(
        f"timing: collisions {coll:.3f} s, clustering+reduction {red:.3f} s, "
        f"wall per ensemble {float(series.wall_seconds.mean()):.4f} s",
        file=summary,
    )


def cmd_run(args, out) -> int:
    from .ensemble import run_experiment

    config = _resolve_config(args)
    series = run_experiment(config)
    _emit(config, series, [("source", "swpm"), ("version", __version__)], out)
    return EXIT_OK


def cmd_oracle(args, out) -> int:
    from .ensemble import run_oracle

    config = _resolve_config(args)
    series = run_oracle(config)
    _emit(config, series, [("source", "dsmc_oracle"), ("version", __version__)], out)
    return EXIT_OK


def cmd_table_errors(args, out) -> int:
    from .ensemble import table_errors

    seed = 1 if args.seed is None else args.seed
    moments = ("central_heat_flux", "raw_heat_flux")
    result = table_errors(seed, m0=args.m0, n_reductions=args.reductions, moments=moments)
    print(f"# max averaged relative reduction error, first {args.reductions} reductions, m0={args.m0}, seed={seed}", file=out)
    print(f"{'scheme':<10} {'central_hf':>14} {'raw_hf':>14}", file=out)
    for scheme, errs in result.items():
        print(f"{scheme.value:<10} {errs['central_heat_flux']:>14.6g} {errs['raw_heat_flux']:>14.6g}", file=out)
    return EXIT_OK


def cmd_equilibrium(args, out) -> int:
    config = _resolve_config(args)
    eq = equilibrium_moment_set(mixture_moments(config.mixture))
    V = eq.drift_velocity
    print(f"rho = {eq.rho:.6f}", file=out)
    print(f"V = ({V[0]:.6f}, {V[1]:.6f}, {V[2]:.6f})", file=out)
    print(f"E = {eq.energy:.6f}", file=out)
    print(f"T_eq = {eq.temperature:.6f}", file=out)
    print(f"Pi_eq,11 = {eq.momentum_flux[0, 0]:.6f}", file=out)
    print(f"h_eq,2 = {eq.raw_heat_flux[1]:.6f}", file=out)
    print(f"s_eq = {eq.fourth_moment:.6f}", file=out)
    return EXIT_OK


def cmd_validate(args, out) -> int:
    config = _resolve_config(args)
    rng = RandomSource(config.seed).substream(0)
    state = sample_initial_state(config.mixture, config.m0, rng)
    state.check_invariants()
    sampled = compute_moments(state.velocities, state.weights)
    exact = mixture_moments(config.mixture)
    ok = True
    for name, value in sampled.identity_residuals().items():
        good = value <= 1e-10
        ok &= good
        print(f"identity {name:<10} residual {value:.3e} {'ok' if good else 'FAIL'}", file=out)
    for name, value in exact.identity_residuals().items():
        good = value <= 1e-12
        ok &= good
        print(f"analytic {name:<10} residual {value:.3e} {'ok' if good else 'FAIL'}", file=out)
    w_err = abs(sampled.rho - 1.0)
    ok &= w_err <= 1e-12
    print(f"total weight {sampled.rho:.17g} {'ok' if w_err <= 1e-12 else 'FAIL'}", file=out)
    for label, a, b in (
        ("energy", sampled.energy, exact.energy),
        ("s", sampled.fourth_moment, exact.fourth_moment),
        ("Pi11", sampled.momentum_flux[0, 0], exact.momentum_flux[0, 0]),
    ):
        print(f"sample {label:<6} {a:.6g} vs analytic {b:.6g}", file=out)
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="swpm", description="Weighted particle Boltzmann solver with particle reduction.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True, out=True, workers=True):
        p.add_argument("--config", metavar="PATH", help="key=value configuration file")
        if seed:
            p.add_argument("--seed", type=_u64, metavar="U64", help="override the configured seed")
        if out:
            p.add_argument("--out", metavar="PATH", help="CSV output path ('-' for stdout)")
        if workers:
            p.add_argument("--workers", type=int, metavar="INT", help="worker processes (0 = all cores)")

    common(sub.add_parser("run", help="run the configured ensemble experiment and write CSV"))
    common(sub.add_parser("oracle", help="run equal-weight DSMC without reduction and write CSV"))
    p = sub.add_parser("table-errors", help="group-averaged reduction errors for all schemes")
    p.add_argument("--seed", type=_u64, metavar="U64")
    p.add_argument("--m0", type=int, default=10240)
    p.add_argument("--reductions", type=int, default=10)
    common(sub.add_parser("equilibrium", help="print the equilibrium moments of the mixture"), seed=False, out=False, workers=False)
    common(sub.add_parser("validate", help="moment self-checks on the initial state"), out=False, workers=False)
    return parser


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


COMMANDS = {
    "run": cmd_run,
    "oracle": cmd_oracle,
    "table-errors": cmd_table_errors,
    "equilibrium": cmd_equilibrium,
    "validate": cmd_validate,
}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SWPMError, OSError, ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
