"""Command-line interface: ``gmmpef <subcommand> [options]``.

Exit codes: 0 on success, 2 on invalid input, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import asdict

import numpy as np

from . import bench
from .divergences import (
    jeffreys_heuristic,
    jeffreys_mc,
    jeffreys_mle_variant,
    jeffreys_sme_variant,
    mle_natural,
    select_order,
)
from .errors import NumericalError, ValidationError
from .estimators import convert_pair, mle_convert, sme_convert_direct, sme_convert_hankel
from .gmm import load_gmm
from .ped import load_ped, ped_to_dict
from .sampling import sample_ped

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

logger = logging.getLogger("gmmpef")


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _emit_json(obj, args):
    with _output(args.out) as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _rng(args):
    return np.random.default_rng(args.seed)


def cmd_convert(args):
    m = load_gmm(args.gmm)
    if args.to_natural and args.method != "mle":
        raise ValidationError("--to-natural applies to --method mle only")
    if args.method == "mle" and args.to_natural:
        theta, eta, diag, init = mle_natural(m, args.order)
        logger.info("ILSM converged in %d iterations from the %s start", diag.iterations, init)
        out = {"theta": ped_to_dict(theta), "eta": eta.eta.tolist(), "iterations": diag.iterations, "residual": diag.residual}
    elif args.method == "mle":
        out = {"eta": mle_convert(m, args.order).eta.tolist()}
    elif args.method == "pair":
        pair = convert_pair(m, args.order)
        out = {"theta": ped_to_dict(pair.theta_sme), "eta": pair.eta_mle.eta.tolist()}
    else:
        conv = sme_convert_direct if args.method == "sme" else sme_convert_hankel
        out = ped_to_dict(conv(m, args.order))
    _emit_json(out, args)


def cmd_jeffreys(args):
    m1, m2 = load_gmm(args.m1), load_gmm(args.m2)
    if args.method == "mc":
        est = jeffreys_mc(m1, m2, _rng(args), args.samples)
    elif args.method in ("pair", "heuristic"):
        est = jeffreys_heuristic(m1, m2, args.order)
    elif args.method == "mle":
        est = jeffreys_mle_variant(m1, m2, args.order)
    else:
        est = jeffreys_sme_variant(m1, m2, args.order, n=args.samples, rng=_rng(args))
    _emit_json(est.to_dict(), args)


def cmd_modelselect(args):
    sel = select_order(load_gmm(args.gmm), args.orders, args.epsilon)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order", "hyvarinen2", "status"])
        for D in sorted(set(sel.scores) | set(sel.failures)):
            if D in sel.scores:
                w.writerow([D, repr(sel.scores[D]), "best" if D == sel.best_order else "ok"])
            else:
                w.writerow([D, "", "failed: " + sel.failures[D]])
    if sel.within_epsilon is False:
        logger.warning("no order scored within epsilon; reporting the minimum at D=%d", sel.best_order)


def cmd_sample(args):
    res = sample_ped(load_ped(args.ped), _rng(args), args.n)
    logger.info("acceptance rate %.4f over %d proposals", res.acceptance_rate, res.proposals)
    with _output(args.out) as fh:
        fh.writelines(f"{x!r}\n" for x in res.samples.tolist())


def cmd_bench(args):
    seed = 0 if args.seed is None else args.seed
    summaries, records = bench.run_bench(args.k, args.trials, args.samples, seed, args.workers)
    if args.trials_csv:
        bench.write_trials_csv(records, args.trials_csv)
    if args.out:
        bench.write_summary_csv(summaries, args.out)
    else:
        _emit_json([asdict(s) for s in summaries], args)


def cmd_golden(args):
    report = bench.run_golden()
    _emit_json(report, args)
    for c in report["checks"]:
        if not c["ok"]:
            logger.error("golden check failed: %s = %r, expected %r", c["name"], c["value"], c["expected"])
    return EXIT_OK if report["ok"] else EXIT_NUMERICAL


def cmd_faithful(args):
    report = bench.run_faithful(args.data, args.sigma, args.order)
    ped_path = args.out or "faithful_ped.json"
    bench.write_faithful(report, ped_path, args.curve)
    logger.info("interior modes at %s", ", ".join(f"{x:.4f}" for x in report.modes))
    if not args.quiet:
        print(json.dumps({"ped": ped_path, "curve": args.curve, "modes": report.modes, "bimodal": report.bimodal}))


def _parse_model(text):
    name, sep, path = text.partition("=")
    if not sep:
        raise ValidationError(f"model must be given as name=path, got {text!r}")
    with open(path) as fh:
        d = json.load(fh)
    if "components" in d:
        return name, load_gmm(path)
    return name, load_ped(path)


def cmd_curves(args):
    models = dict(_parse_model(s) for s in args.model)
    grid = np.linspace(args.lo, args.hi, args.points)
    bench.emit_curves(models, grid, args.out or sys.stdout)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (unsigned 64-bit)")
    common.add_argument("--quiet", action="store_true", help="only print errors")
    common.add_argument("--out", default=None, help="output path (default: stdout)")

    p = argparse.ArgumentParser(prog="gmmpef", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("convert", parents=[common], help="convert a mixture to a polynomial exponential density")
    s.add_argument("--gmm", required=True)
    s.add_argument("--order", type=int, required=True)
    s.add_argument("--method", choices=["sme", "sme-hankel", "mle", "pair"], default="sme")
    s.add_argument("--to-natural", action="store_true", help="with --method mle, also solve for theta by ILSM")
    s.set_defaults(func=cmd_convert)

    s = sub.add_parser("jeffreys", parents=[common], help="Jeffreys divergence between two mixtures")
    s.add_argument("--m1", "--gmm1", dest="m1", required=True)
    s.add_argument("--m2", "--gmm2", dest="m2", required=True)
    s.add_argument("--order", type=int, default=None)
    s.add_argument("--method", choices=["pair", "heuristic", "mc", "mle", "sme"], default="pair")
    s.add_argument("--samples", type=int, default=100_000)
    s.set_defaults(func=cmd_jeffreys)

    s = sub.add_parser("modelselect", parents=[common], help="choose a PED order by Hyvarinen divergence")
    s.add_argument("--gmm", required=True)
    s.add_argument("--orders", type=_int_list, default=[4, 8, 10, 12, 14, 16])
    s.add_argument("--epsilon", type=float, default=None)
    s.set_defaults(func=cmd_modelselect)

    s = sub.add_parser("sample", parents=[common], help="rejection-sample a PED")
    s.add_argument("--ped", required=True)
    s.add_argument("--n", type=int, required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("bench", parents=[common], help="random-mixture benchmark")
    s.add_argument("--k", type=_int_list, default=[2, 3, 4, 5])
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--samples", type=int, default=100_000)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--trials-csv", default=None, help="also write per-trial records")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("golden", parents=[common], help="reference-example regression")
    s.set_defaults(func=cmd_golden)

    s = sub.add_parser("faithful", parents=[common], help="Old Faithful KDE to PED")
    s.add_argument("--data", default=None, help="one value per line (default: bundled data)")
    s.add_argument("--sigma", type=float, default=0.05)
    s.add_argument("--order", type=int, default=10)
    s.add_argument("--curve", default="faithful_curve.csv")
    s.set_defaults(func=cmd_faithful)

    s = sub.add_parser("curves", parents=[common], help="tabulate model densities on a grid")
    s.add_argument("--model", action="append", default=[], help="name=path to a GMM or PED JSON file")
    s.add_argument("--lo", type=float, default=-10.0)
    s.add_argument("--hi", type=float, default=10.0)
    s.add_argument("--points", type=int, default=512)
    s.set_defaults(func=cmd_curves)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(levelname)s: %(message)s")
    try:
        code = args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
