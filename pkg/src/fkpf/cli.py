"""Command-line entry point: ``fkpf run``, ``fkpf bounds`` and ``fkpf verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bounds import evaluate_all
from .errors import FkpfError
from .experiments.config import ExperimentConfig
from .experiments.harness import RunCache, Setup, run_monte_carlo
from .experiments.io import emit_results, write_csv, write_run_config
from .experiments.verify import lemma1_suite, mgf_suite

log = logging.getLogger("fkpf")


def cmd_run(args) -> int:
    configs = [ExperimentConfig.load(p) for p in args.config]
    if args.trials is not None:
        configs = [c.with_(trials=args.trials) for c in configs]
    if args.workers is not None:
        configs = [c.with_(workers=args.workers) for c in configs]
    cache = RunCache(args.cache)
    metrics = []
    setups: dict[str, Setup] = {}
    for cfg in configs:
        key = RunCache.world_key(cfg)
        setup = setups.setdefault(key, Setup.from_config(cfg))
        log.info("running mode=%s N=%d N_b=%d N_p=%d trials=%d", cfg.mode, cfg.N, cfg.N_b, cfg.N_p, cfg.trials)
        m = run_monte_carlo(cfg, cache=cache, setup=setup)
        log.info("median deterioration %.4f, q_hat %.4f", m.quantiles["q50"], m.empirical_q)
        metrics.append(m)
    emit_results(metrics, args.out)
    write_run_config(metrics, Path(args.out) / "run_config.json")
    return 0


def cmd_bounds(args) -> int:
    params = json.loads(Path(args.params).read_text())
    rows = evaluate_all(params)
    write_csv(args.out, ("bound", "inputs", "value", "raw_value", "hypothesis_ok", "user_supplied"), (
        (r["bound"], json.dumps(r["inputs"], sort_keys=True), r["value"], r["raw_value"],
         int(r["hypothesis_ok"]), int(r["user_supplied"])) for r in rows))
    return 0


def cmd_verify(args) -> int:
    ok = True
    if args.suite == "lemma1":
        res = lemma1_suite(args.seed, args.reps or 10_000)
        write_csv(args.out, ("distribution", "N", "p", "reps", "empirical", "bound", "pass"), (
            (r.distribution, r.N, r.p, r.reps, r.empirical, r.bound, int(r.passed)) for r in res))
        ok = all(r.passed for r in res)
    else:
        res = mgf_suite(args.seed, args.reps or 100_000)
        write_csv(args.out, ("distribution", "epsilon", "empirical_mgf", "exact_bound", "simple_bound", "pass"), (
            (name, r.epsilon, r.empirical, r.exact_bound, r.simple_bound, int(r.passed))
            for name, rows in res.items() for r in rows))
        ok = all(r.passed for rows in res.values() for r in rows)
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fkpf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo tracking experiment")
    run.add_argument("--config", required=True, nargs="+", help="one or more JSON config files")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--trials", type=int, help="override the trial count")
    run.add_argument("--workers", type=int, help="override the worker count")
    run.add_argument("--cache", help="directory for cached reference/baseline runs")
    run.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="evaluate closed-form bounds")
    b.add_argument("--params", required=True, help="JSON parameter file")
    b.add_argument("--out", required=True, help="CSV output path")
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("verify", help="empirical concentration checks")
    v.add_argument("--suite", required=True, choices=("lemma1", "mgf"))
    v.add_argument("--out", required=True, help="CSV output path")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--reps", type=int)
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FkpfError, OSError) as exc:
        print(f"fkpf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
