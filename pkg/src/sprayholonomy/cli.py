"""Command-line interface: analyze, check-lagrangian, transport, examples."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .analysis import (
    AnalysisError,
    clean_json,
    emit,
    run_analysis,
    run_transport_task,
    transport_line,
)
from .config import ConfigError, load_config
from .examples import EXAMPLE_IDS, compare_expected, example_config

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ANALYSIS = 2
EXIT_MISMATCH = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sprayholonomy", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="run the full analysis for a config file")
    a.add_argument("--config", required=True)
    a.add_argument("--format", choices=("json", "text"), default="json")
    a.add_argument("--out", help="write the report here instead of stdout")
    a.add_argument("--seed", type=_seed)
    a.add_argument("--allow-semispray", action="store_true",
                   help="continue when the coefficients are not 2-homogeneous")

    c = sub.add_parser("check-lagrangian", help="check one candidate Lagrangian")
    c.add_argument("--config", required=True)
    c.add_argument("--candidate", required=True)
    c.add_argument("--format", choices=("json", "text"), default="json")
    c.add_argument("--seed", type=_seed)

    t = sub.add_parser("transport", help="run one transport task with its trace")
    t.add_argument("--config", required=True)
    t.add_argument("--task", required=True)
    t.add_argument("--no-trace", action="store_true", help="omit the per-step states")

    e = sub.add_parser("examples", help="run the builtin examples against their expected verdicts")
    e.add_argument("--filter", type=int, choices=EXAMPLE_IDS)
    e.add_argument("--format", choices=("json", "text"), default="text")
    return p


def _write(text: str, path=None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    report = run_analysis(cfg, seed=args.seed, allow_semispray=args.allow_semispray or None)
    _write(emit(report, args.format), args.out)
    return EXIT_OK


def _cmd_check(args) -> int:
    cfg = load_config(args.config)
    names = [c.name for c in cfg.candidates]
    if args.candidate not in names:
        raise ConfigError(f"--candidate: unknown candidate {args.candidate!r} (have {', '.join(names)})")
    report = run_analysis(cfg, seed=args.seed, run_transport=False).to_dict()
    cand = next(c for c in report["candidates"] if c["name"] == args.candidate)
    out = {
        "version": report["version"],
        "config_hash": report["config_hash"],
        "sampling": report["sampling"],
        "generic_rank": report["distribution"]["generic_rank"],
        "candidate": cand,
    }
    if args.format == "json":
        _write(json.dumps(out, sort_keys=True, indent=2) + "\n")
    else:
        lines = [
            f"candidate {cand['name']}: {'pass' if cand['passes'] else 'fail'}",
            f"  source: {cand['source']}",
            f"  max homogeneity residual: {cand['max_homogeneity']:.3e}",
            f"  max Euler-Lagrange residual: {cand['max_el']:.3e}",
            f"  max invariance residual: {cand['max_invariance']:.3e}",
            f"  Hessian: {cand['definiteness']}",
        ]
        lines += [f"  failure: {f}" for f in cand["failures"]]
        _write("\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_transport(args) -> int:
    cfg = load_config(args.config)
    tasks = {t.name: t for t in cfg.transport}
    if args.task not in tasks:
        raise ConfigError(f"--task: unknown transport task {args.task!r}")
    model = cfg.build_model()
    cands = {c.name: c for c in cfg.build_candidates()}
    res = run_transport_task(model, cands, tasks[args.task], trace=not args.no_trace)
    out = {"version": "spray-holonomy/1", "config_hash": cfg.config_hash(), "result": res}
    _write(json.dumps(clean_json(out), sort_keys=True, indent=2) + "\n")
    return EXIT_ANALYSIS if "error" in res else EXIT_OK


def _cmd_examples(args) -> int:
    ids = [args.filter] if args.filter else list(EXAMPLE_IDS)
    failed = False
    summary = []
    for k in ids:
        cfg = example_config(k)
        t0 = time.perf_counter()
        report = run_analysis(cfg).to_dict()
        elapsed = time.perf_counter() - t0
        bad = compare_expected(report, cfg.expected or {})
        failed |= bool(bad)
        summary.append({"example": k, "ok": not bad, "mismatches": bad, "report": report})
        if args.format == "text":
            v = report["verdict"]
            status = "ok" if not bad else "MISMATCH"
            sys.stdout.write(
                f"example {k}: {status}  vh(2)={v['vh2']} m={v['metrizability']} "
                f"rule {v['rule_label']} rank {report['distribution']['generic_rank']} ({elapsed:.2f} s)\n"
            )
            for b in bad:
                sys.stdout.write(f"  {b}\n")
            for t in report["transport"]:
                sys.stdout.write(f"  {transport_line(t)}\n")
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return EXIT_MISMATCH if failed else EXIT_OK


_COMMANDS = {
    "analyze": _cmd_analyze,
    "check-lagrangian": _cmd_check,
    "transport": _cmd_transport,
    "examples": _cmd_examples,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AnalysisError as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
