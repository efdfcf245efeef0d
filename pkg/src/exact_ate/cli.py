"""Command-line entry point: ``ci``, ``simulate`` and ``oracle-check``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

from . import balanced, general, pairs
from .core import ConfidenceResult, InputError, ObservedCounts, TestLedger, check_alpha, counts_from_units
from .oracle import oracle_confidence_set
from .simulate import WALD_VARIANTS, SimulationConfig, presets, simulate

DESIGN_CHOICES = ("balanced-bernoulli", "matched-pairs", "bernoulli")
ORACLE_DESIGN = {"balanced-bernoulli": "balanced", "matched-pairs": "pairs", "bernoulli": "general"}


class UsageError(Exception):
    """Bad flags or input data; exits with status 2."""


def _parse_ints(text: str, expected: int, what: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"{what}: expected {expected} comma-separated integers, got {text!r}") from exc
    if len(values) != expected:
        raise UsageError(f"{what}: expected {expected} comma-separated integers, got {len(values)}")
    return values


def read_csv(path: str, design: str) -> ObservedCounts | pairs.PairObservedCounts:
    """Load unit data (``y,z``) or pair data (``pair_id,y,z``) from a CSV file."""
    want = ["pair_id", "y", "z"] if design == "matched-pairs" else ["y", "z"]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        if header != want:
            raise UsageError(f"{path}: expected header {','.join(want)}, got {','.join(header) or 'nothing'}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                y, z = int(row["y"]), int(row["z"])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{path}:{lineno}: y and z must be 0 or 1") from exc
            if y not in (0, 1) or z not in (0, 1):
                raise UsageError(f"{path}:{lineno}: y and z must be 0 or 1")
            records.append((row["pair_id"].strip(), y, z) if design == "matched-pairs" else (y, z))
    if design == "matched-pairs":
        return pairs.pair_reduce(records)
    return counts_from_units(records)


def load_counts(args: argparse.Namespace) -> ObservedCounts | pairs.PairObservedCounts:
    if (args.counts is None) == (args.data is None):
        raise UsageError("give exactly one of --counts or --data")
    if args.data is not None:
        return read_csv(args.data, args.design)
    if args.design == "matched-pairs":
        return pairs.PairObservedCounts(*_parse_ints(args.counts, 6, "--counts (n_1,1,n_1,0,n_0,1,n_0,0,n_-1,1,n_-1,0)"))
    return ObservedCounts(*_parse_ints(args.counts, 4, "--counts (n11,n01,n10,n00)"))


def _design_p(args: argparse.Namespace) -> Fraction:
    if args.design == "bernoulli":
        if args.p is None:
            raise UsageError("--design bernoulli requires --p u/q")
        return general.check_probability(args.p)
    if args.p is not None and Fraction(args.p) != Fraction(1, 2):
        raise UsageError(f"--p is only used with --design bernoulli (got {args.p} for {args.design})")
    return Fraction(1, 2)


def run_ci(counts, design: str, p: Fraction, alpha: Fraction, jobs: int = 1) -> ConfidenceResult:
    if design == "balanced-bernoulli":
        return balanced.confidence_set(counts, alpha)
    if design == "matched-pairs":
        return pairs.confidence_set_pairs(counts, alpha)
    return general.confidence_set_general(counts, p, alpha, jobs=jobs)


def pmax_at(counts, design: str, p: Fraction, t: int) -> float:
    """``p_max`` at grid numerator ``t``, computed outside the reported ledger."""
    if design == "balanced-bernoulli":
        return balanced.compute_pmax(counts, t)
    if design == "matched-pairs":
        return pairs.compute_pmax_pairs(counts, t)
    return max(pv for _, pv in general.candidate_pvalues(counts, t, p, TestLedger()))


def ci_report(counts, design: str, p: Fraction, result: ConfidenceResult) -> dict:
    ends = None
    if not result.empty:
        lo, hi = result.interval
        ends = [pmax_at(counts, design, p, lo), pmax_at(counts, design, p, hi)]
    report = {
        "design": design,
        "alpha": float(result.alpha),
        "n": result.denominator,
        "accepted": list(result.accepted),
        "denominator": result.denominator,
        "interval": None if result.empty else list(result.interval),
        "interval_decimal": None if result.empty else [float(v) for v in result.interval_values],
        "pmax_endpoints": ends,
        "ledger": result.ledger.as_dict(),
    }
    if design == "bernoulli":
        report["p"] = str(p)
    return report


def _format_ci(report: dict, fmt: str, show_ledger: bool) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2)
    d = report["denominator"]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["numerator", "denominator", "value"])
        for num in report["accepted"]:
            writer.writerow([num, d, f"{num / d:.6f}"])
        return buf.getvalue().rstrip("\n")
    lines = [f"design: {report['design']}  alpha: {report['alpha']}  n: {report['n']}"]
    if report["interval"] is None:
        lines.append("confidence set: empty")
    else:
        lo, hi = report["interval"]
        lines.append(f"confidence set: [{lo}/{d}, {hi}/{d}] = [{lo / d:.4f}, {hi / d:.4f}]  ({len(report['accepted'])} candidates)")
        plo, phi = report["pmax_endpoints"]
        lines.append(f"p_max at endpoints: {plo:.6g}, {phi:.6g}")
    if show_ledger:
        led = report["ledger"]
        line = f"tests: {led['tail_evaluations']} tail evaluations, {led['pmax_evaluations']} p_max evaluations"
        if led["pmf_updates"]:
            line += f", {led['pmf_updates']} incremental p-values"
        lines.append(line)
    return "\n".join(lines)


def cmd_ci(args: argparse.Namespace) -> int:
    alpha = check_alpha(args.alpha)
    counts = load_counts(args)
    p = _design_p(args)
    result = run_ci(counts, args.design, p, alpha, args.jobs)
    print(_format_ci(ci_report(counts, args.design, p, result), args.format, args.ledger))
    return 0


def cmd_oracle_check(args: argparse.Namespace) -> int:
    alpha = check_alpha(args.alpha)
    counts = load_counts(args)
    p = _design_p(args)
    fast = run_ci(counts, args.design, p, alpha, args.jobs)
    slow = oracle_confidence_set(counts, ORACLE_DESIGN[args.design], p, alpha)
    report = {
        "design": args.design,
        "alpha": float(alpha),
        "denominator": fast.denominator,
        "fast": {"accepted": list(fast.accepted), "ledger": fast.ledger.as_dict()},
        "oracle": {"accepted": list(slow.accepted), "tests": slow.ledger.tail_evaluations},
        "match": fast.accepted == slow.accepted,
    }
    if args.format == "json":
        print(json.dumps(report, indent=2))
    else:
        d = fast.denominator

        def fmt(r: ConfidenceResult) -> str:
            return "empty" if r.empty else f"[{r.interval[0]}/{d}, {r.interval[1]}/{d}]"

        print(f"fast:   {fmt(fast)}  tests={fast.ledger.tail_evaluations}")
        print(f"oracle: {fmt(slow)}  tests={slow.ledger.tail_evaluations}")
        print("match" if report["match"] else "MISMATCH")
    if not report["match"]:
        print("error: fast and brute-force confidence sets differ", file=sys.stderr)
        return 1
    return 0


def _parse_setting(text: str, design: str) -> dict[tuple[int, int], Fraction]:
    """``"1,1:1/2;0,0:1/2"`` -> {(1, 1): 1/2, (0, 0): 1/2}."""
    shares = {}
    for part in text.split(";"):
        try:
            key, share = part.split(":")
            a, b = (int(x) for x in key.split(","))
            shares[(a, b)] = Fraction(share.strip())
        except ValueError as exc:
            raise UsageError(f"--setting: cannot parse {part!r}; use e.g. '1,1:1/2;0,0:1/2'") from exc
    return shares


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.preset:
        if args.setting or args.design:
            raise UsageError("--preset cannot be combined with --design or --setting")
        config = presets(args.preset, args.n, reps=args.reps, seed=args.seed, parallelism=args.jobs, wald=args.wald)
        config = SimulationConfig(**{**config.__dict__, "alpha": args.alpha})
    else:
        if not (args.setting and args.design):
            raise UsageError("give --preset, or both --design and --setting")
        design = {"balanced-bernoulli": "balanced_bernoulli", "matched-pairs": "matched_pairs", "bernoulli": "general_bernoulli"}[args.design]
        p = Fraction(args.p) if args.p else Fraction(1, 2)
        config = SimulationConfig(
            design, args.n, _parse_setting(args.setting, args.design), alpha=args.alpha,
            reps=args.reps, seed=args.seed, p=p, parallelism=args.jobs, wald=args.wald,
        )
    report = simulate(config).as_dict()
    report = {"design": config.design, "n": config.n, "alpha": float(config.alpha), **report}
    if args.format == "json":
        print(json.dumps(report, indent=2))
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(report), lineterminator="\n")
        writer.writeheader()
        writer.writerow(report)
        print(buf.getvalue().rstrip("\n"))
    else:
        print(f"{'n':>6} {'exact cov':>10} {'exact width':>12} {'wald cov':>9} {'wald width':>11} {'mean tests':>11}")
        print(
            f"{report['n']:>6} {report['coverage']:>10.3f} {report['median_width']:>12.3f} "
            f"{report['wald_coverage']:>9.3f} {report['wald_median_width']:>11.3f} {report['mean_tests']:>11.2f}"
        )
        if report["wald_undefined"]:
            print(f"wald undefined in {report['wald_undefined']} replicates (scored as non-covering)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exact-ate",
        description="Exact randomization-based confidence sets for the ATE with binary outcomes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--alpha", default="0.05", help="level, e.g. 0.05 or 1/20 (default 0.05)")
    shared.add_argument("--seed", type=int, default=0, help="RNG seed (simulate only)")
    shared.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    shared.add_argument("--format", choices=("json", "csv", "text"), default="text")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--design", choices=DESIGN_CHOICES, default="balanced-bernoulli")
    data.add_argument("--counts", help="n11,n01,n10,n00 (pairs: n_{1,1},n_{1,0},n_{0,1},n_{0,0},n_{-1,1},n_{-1,0})")
    data.add_argument("--data", help="CSV with header y,z (pairs: pair_id,y,z)")
    data.add_argument("--p", help="treatment probability u/q (bernoulli design)")

    ci = sub.add_parser("ci", parents=[shared, data], help="exact confidence set for observed data")
    ci.add_argument("--ledger", action="store_true", help="report randomization-test counts")
    ci.set_defaults(func=cmd_ci)

    orc = sub.add_parser("oracle-check", parents=[shared, data], help="compare against brute-force enumeration")
    orc.set_defaults(func=cmd_oracle_check)

    sim = sub.add_parser("simulate", parents=[shared], help="coverage simulation")
    sim.add_argument("--preset", choices=("bernoulli-even", "bernoulli-sparse", "pairs-even", "pairs-skewed"))
    sim.add_argument("--design", choices=DESIGN_CHOICES)
    sim.add_argument("--setting", help="type shares, e.g. '1,1:1/2;0,0:1/2' (pairs use W types)")
    sim.add_argument("--n", type=int, required=True, help="number of units")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--p", help="treatment probability u/q (bernoulli design)")
    sim.add_argument("--wald", choices=WALD_VARIANTS, default="neyman", help="Wald baseline variance")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InputError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, OSError) as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
