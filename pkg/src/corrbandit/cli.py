"""Command-line entry point: run, oracle, bounds, build-pseudo, ingest.

Exit codes: 0 success, 2 config error, 3 I/O or ingest error, 4 domain error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis, data
from .errors import ConfigError, CorrBanditError
from .experiment import ExperimentConfig, build_instance, curve_to_csv, report_oracle, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DOMAIN = 0, 2, 3, 4

# flag -> config key, shared by every subcommand that builds an instance
_CONFIG_FLAGS = {
    "--environment": "environment",
    "--env-file": "env_file",
    "--pseudo": "pseudo",
    "--pseudo-file": "pseudo_file",
    "--grid-n": "grid_n",
    "--bins": "bins",
    "--ratings": "ratings",
    "--split-fraction": "split_fraction",
    "--arm-mode": "arm_mode",
    "--top-n": "top_n",
    "--ingest-seed": "ingest_seed",
    "--pad-fraction": "pad_fraction",
    "--buffer": "buffer",
    "--pseudo-mode": "pseudo_mode",
    "--policies": "policies",
    "--beta": "beta",
    "--horizon": "horizon",
    "--trials": "trials",
    "--seed": "seed",
    "--stride": "stride",
    "--output": "output",
    "--oracle-t": "oracle_t",
}


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    for flag, key in _CONFIG_FLAGS.items():
        p.add_argument(flag, dest=key, default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {key: getattr(args, key) for key in _CONFIG_FLAGS.values() if getattr(args, key) is not None}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    return ExperimentConfig.from_mapping(overrides, base=cfg)


def _write_or_print(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    res = run_experiment(cfg)
    _write_or_print(curve_to_csv(res.curve, cfg.effective_stride), cfg.output or None)
    for p in res.curve.policies:
        logging.info("%s final regret %.4f", p, res.curve.final(p))
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _load_config(args)
    report, c_emp = report_oracle(cfg)
    text = report.to_text() + f"empirical C after {cfg.oracle_t} pulls of arm {report.k_star + 1} = {c_emp}\n"
    _write_or_print(text, cfg.output or None)
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.K is not None:
        # explicit single-arm bound
        if args.pseudo_gap is not None:
            t0 = analysis.t0_threshold(args.K, args.delta_min, args.pseudo_gap)
            value = analysis.bound_noncompetitive_pulls(args.K, args.T, t0)
            print(f"non-competitive t0={t0} bound={value:.6f}")
        else:
            value = analysis.bound_competitive_pulls(args.K, args.T, args.delta, args.delta_min)
            print(f"competitive bound={value:.6f}")
        return EXIT_OK
    cfg = _load_config(args)
    inst = build_instance(cfg)
    report = analysis.classify_instance(inst.env, inst.table)
    K, T = inst.table.K, args.T or cfg.horizon
    gaps = report.gaps
    sub = [k for k in range(K) if k != report.k_star]
    delta_min = min((gaps[k] for k in sub), default=0.0)
    print("arm label gap bound_pulls")
    for k in sub:
        if report.labels[k] == analysis.NON_COMPETITIVE:
            b = analysis.bound_noncompetitive_pulls(K, T, analysis.t0_threshold(K, delta_min, report.pseudo_gap[k]))
        else:
            b = analysis.bound_competitive_pulls(K, T, gaps[k], delta_min)
        print(f"{k + 1} {report.labels[k]} {gaps[k]:.6f} {b:.6f}")
    print(f"regret bound at T={T}: {analysis.bound_total_regret(report, K, T):.6f}")
    return EXIT_OK


def cmd_build_pseudo(args) -> int:
    cfg = _load_config(args)
    inst = build_instance(cfg)
    _write_or_print(inst.table.to_text(), cfg.output or None)
    return EXIT_OK


def cmd_ingest(args) -> int:
    records = data.read_ratings(args.ratings)
    skipped = 0
    if args.arm_mode == "genres":
        records, skipped = data.derive_genre_arms(records, args.seed)
    spec = data.SplitSpec(args.split_fraction, args.arm_mode, args.top_n, args.seed)
    train, test = data.split_by_activity(records, spec)
    arms = data.top_n_items(records, args.top_n) if args.arm_mode == "items" else data.genre_list(records)
    print(f"records {len(records)} skipped {skipped} train {len(train)} test {len(test)}")
    print("arms " + " ".join(arms))
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data.write_ratings(train, out / "train.csv")
        data.write_ratings(test, out / "test.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="corrbandit", description="Correlated bandit experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate policies and emit a regret-curve CSV")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="print the competitiveness report")
    _add_config_args(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bounds", help="evaluate the pull-count and regret bounds")
    _add_config_args(p)
    p.add_argument("--K", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--delta", type=float, help="gap of the arm (competitive bound)")
    p.add_argument("--delta-min", type=float)
    p.add_argument("--pseudo-gap", type=float, help="pseudo-gap of the arm (non-competitive bound)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("build-pseudo", help="write a pseudo-reward table")
    _add_config_args(p)
    p.set_defaults(func=cmd_build_pseudo)

    p = sub.add_parser("ingest", help="parse and split a ratings file")
    p.add_argument("--ratings", required=True)
    p.add_argument("--split-fraction", type=float, default=0.5)
    p.add_argument("--arm-mode", choices=("items", "genres"), default="items")
    p.add_argument("--top-n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "bounds" and args.K is not None:
        missing = [n for n in ("T", "delta_min") if getattr(args, n) is None]
        if args.pseudo_gap is None and args.delta is None:
            missing.append("delta or pseudo-gap")
        if missing:
            print(f"error: bounds with --K also needs {', '.join(missing)}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except CorrBanditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
