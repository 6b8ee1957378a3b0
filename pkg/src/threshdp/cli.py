"""Command-line entry point: ``ipp``, ``release``, ``learn``, ``attack``, ``audit``, ``bench``."""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import attacks
from .audit import (AuditConfig, ConstantMechanism, LaplaceCount, RecPrefixMechanism,
                    binned_cells, element_cells, estimate_epsilon, median_mechanism,
                    run_benchmark)
from .domain import Dataset, OrderedDomain, read_dataset, read_labeled_dataset
from .errors import ThreshDPError
from .interior_point import run_rec_prefix
from .learning import ErrorReport, pac_learn
from .primitives import PrivacyBudget, make_rng
from .release import AccuracyParams, thresh2_release, thresh_release


def _budget_args(p, alpha=False):
    if alpha:
        p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unsafe-utility", action="store_true",
                   help="allow inputs below the size that guarantees utility")


def _cmd_ipp(a):
    data = read_dataset(a.input, a.width)
    run = run_rec_prefix(data, a.beta, a.eps, a.delta, make_rng(a.seed),
                         unsafe_utility=a.unsafe_utility)
    if a.json:
        print(json.dumps({"value": run.value, "depth": run.depth, "level_sizes": run.level_sizes,
                          "level_ks": run.level_ks, "prefix_lengths": run.prefix_lengths,
                          "fallbacks": run.fallbacks}))
    else:
        print(run.value)


def _cmd_release(a):
    data = read_dataset(a.input, a.width)
    fn = thresh_release if a.algorithm == "thresh" else thresh2_release
    cdf = fn(data, AccuracyParams(a.alpha, a.beta), a.eps, a.delta, make_rng(a.seed),
             unsafe_utility=a.unsafe_utility)
    if a.json:
        print(json.dumps({"thresholds": [str(t) for t in cdf.breakpoints.tolist()],
                          "answers": cdf.values.tolist()}))
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["threshold", "answer"])
        for t, v in cdf.rows():
            w.writerow([t, repr(float(v))])


def _cmd_learn(a):
    data = read_labeled_dataset(a.input, a.width)
    h = pac_learn(data, a.alpha, a.beta, a.eps, a.delta, make_rng(a.seed),
                  unsafe_utility=a.unsafe_utility)
    report = ErrorReport(h.error_on(data.rows, data.labels))
    print(json.dumps({"cutoff": h.cutoff, "empirical_error": report.empirical_error,
                      "generalization_error": report.generalization_error}))


def _cmd_attack(a):
    report = attacks.attack_mechanism(attacks.PIRATES[a.pirate], a.users, a.xi, a.trials, a.seed)
    if a.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["trial", "feasible", "accused"])
        for t, feasible, accused in report.records:
            w.writerow([t, int(feasible), "" if accused is None else accused])
    else:
        print(json.dumps(report.summary()))


def _audit_setup(a):
    dom = OrderedDomain(a.width)
    rows = np.linspace(0, dom.max_element, a.rows).round().astype(np.uint64)
    other = rows.copy()
    if a.mech in ("laplace", "constant"):
        rows[:] = 0
        other[:] = 0
        other[-1] = 1
        cells = binned_cells(np.arange(-4.0, 5.0, 0.5))
    else:
        other[0] = dom.max_element
        cells = element_cells(dom)
    mechs = {
        "laplace": lambda: LaplaceCount(a.eps),
        "constant": lambda: ConstantMechanism(),
        "rec_prefix": lambda: RecPrefixMechanism(a.beta, a.eps, a.mech_delta),
        "median": lambda: median_mechanism,
    }
    return mechs[a.mech](), AuditConfig(Dataset(dom, rows), Dataset(dom, other), *cells,
                                        trials=a.trials, claimed=PrivacyBudget(a.eps, a.mech_delta),
                                        delta=a.delta)


def _cmd_audit(a):
    mech, config = _audit_setup(a)
    est = estimate_epsilon(mech, config, a.seed)
    print(json.dumps({"mechanism": a.mech, "eps_lower": est.eps_lower, "eps_point": est.eps_point,
                      "cell": est.cell, "trials": est.trials, "claimed_eps": a.eps}))


def _cmd_bench(a):
    with open(a.spec) as f:
        spec = json.load(f)
    result = run_benchmark(spec, a.seed if a.seed is not None else spec.get("seed", 0))
    text = result.to_csv()
    if a.out:
        with open(a.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ipp = sub.add_parser("ipp", help="interior point").add_subparsers(dest="action", required=True)
    solve = ipp.add_parser("solve")
    _budget_args(solve)
    solve.add_argument("--input", required=True)
    solve.add_argument("--json", action="store_true")
    solve.set_defaults(func=_cmd_ipp)

    rel = sub.add_parser("release", help="threshold query release")
    rel.add_argument("algorithm", choices=["thresh", "thresh2"])
    _budget_args(rel, alpha=True)
    rel.add_argument("--input", required=True)
    fmt = rel.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true", help="threshold,answer rows (default)")
    rel.set_defaults(func=_cmd_release)

    learn = sub.add_parser("learn", help="private threshold learning")
    learn.add_argument("concept", choices=["threshold"])
    _budget_args(learn, alpha=True)
    learn.add_argument("--input", required=True)
    learn.set_defaults(func=_cmd_learn)

    att = sub.add_parser("attack", help="fingerprinting-code attacks")
    att.add_argument("code", choices=["fpc"])
    att.add_argument("--users", type=int, default=3)
    att.add_argument("--xi", type=float, default=0.05)
    att.add_argument("--pirate", choices=sorted(attacks.PIRATES), default="median")
    att.add_argument("--trials", type=int, default=1000)
    att.add_argument("--seed", type=int, default=0)
    att.add_argument("--csv", action="store_true")
    att.set_defaults(func=_cmd_attack)

    aud = sub.add_parser("audit", help="empirical privacy audit")
    aud.add_argument("what", choices=["eps"])
    aud.add_argument("--mech", choices=["laplace", "constant", "rec_prefix", "median"],
                     required=True)
    aud.add_argument("--width", type=int, default=4)
    aud.add_argument("--rows", type=int, default=8)
    aud.add_argument("--trials", type=int, default=100000)
    aud.add_argument("--eps", type=float, default=1.0)
    aud.add_argument("--beta", type=float, default=0.1)
    aud.add_argument("--delta", type=float, default=0.0, help="delta allowed by the audit")
    aud.add_argument("--mech-delta", type=float, default=1e-6,
                     help="delta handed to mechanisms that need one")
    aud.add_argument("--seed", type=int, default=0)
    aud.set_defaults(func=_cmd_audit)

    bench = sub.add_parser("bench", help="run a benchmark spec")
    bench.add_argument("--spec", required=True)
    bench.add_argument("--out")
    bench.add_argument("--seed", type=int)
    bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ThreshDPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
