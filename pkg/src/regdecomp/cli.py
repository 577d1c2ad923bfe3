"""Command-line entry point: one library operation per invocation, reported
as JSON (or flat CSV)."""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time

from . import __version__
from .errors import BudgetExceeded, IngestError, PreconditionError
from .io import (
    decomposition_to_dict,
    ingest,
    oracle_to_dict,
    read_rows,
    sparsify_to_dict,
    tensor_to_dict,
)
from .orbit import greedy_cover, interp_exponents, orbit_distance, riesz_thorin_check
from .regularity import greedy_decompose, strong_decompose, weak_banach_approx
from .seminorms import EXACT, Heuristic, SeminormFamily, best_response, operator_norm
from .tensorspace import INF, Measure, as_exponent, lp_norm, random_ball_sample
from .truncation import k_bound, rank1_split, threshold_split, top_k_sparsify

EXIT_OK, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_IO = 0, 1, 2, 3

TAGS = {
    "norm": "lp-norm",
    "opnorm": "operator-norm",
    "cutnorm": "cut-norm",
    "rnorm": "r-seminorm",
    "decompose": "greedy-weak-regularity",
    "pipeline": "hilbert-small-approximation",
    "strong": "strong-regularity",
    "truncate": "threshold-truncation",
    "rank1split": "rank1-truncation",
    "sparsify": "top-k-sparsification",
    "kbound": "top-k-support-bound",
    "orbitdist": "orbit-pseudometric",
    "cover": "orbit-epsilon-net",
    "interp": "interpolation-exponents",
    "rtcheck": "interpolation-norm-check",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise PreconditionError(message)


def _exponent(s):
    return as_exponent(s)


def _positive(s):
    v = float(s)
    if not v > 0 or math.isnan(v):
        raise PreconditionError(f"expected a positive number, got {s}")
    return v


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise PreconditionError(f"expected a positive integer, got {s}")
    return v


def _fmt_exp(p):
    return "inf" if p == INF else p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regdecomp", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help, inputs=1):
        sp = sub.add_parser(name, help=help)
        if inputs:
            sp.add_argument("--input", action="append", default=[], help="data file (repeat for several)")
            sp.add_argument("--format", choices=("csv", "json", "edges"), help="input format hint")
        sp.add_argument("--output", help="write the report here instead of stdout")
        sp.add_argument("--output-format", choices=("json", "csv"), default="json")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    def add_mode(sp, default="exact"):
        sp.add_argument("--mode", choices=("exact", "heuristic"), default=default)
        sp.add_argument("--restarts", type=_positive_int, default=32)

    sp = add("norm", "L^p norm of a tensor")
    sp.add_argument("--p", type=_exponent, required=True)

    sp = add("opnorm", "p -> q operator norm of a kernel matrix")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--q", type=_exponent, required=True)
    add_mode(sp, "heuristic")

    sp = add("cutnorm", "cut norm of a matrix")
    add_mode(sp)

    sp = add("rnorm", "seminorm induced by a test family")
    sp.add_argument("--family", default="cut", help="cut | rectangle | sign | holder:Q")
    add_mode(sp)

    sp = add("decompose", "greedy weak-regularity decomposition")
    sp.add_argument("--family", default="cut")
    sp.add_argument("--k", type=_positive_int, required=True)
    add_mode(sp)

    sp = add("pipeline", "bounded-part + greedy approximation with a 2*eps guarantee")
    sp.add_argument("--family", default="cut")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)
    add_mode(sp)

    sp = add("strong", "strong regularity: R-close w' that is L2-close to a step function")
    sp.add_argument("--family", default="cut")
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--h", choices=("constant", "inverse"), default="constant",
                    help="h(eps, m) = eps (constant) or eps/(m+1) (inverse)")
    add_mode(sp)

    sp = add("truncate", "threshold split into bounded part and small tail")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--p-prime", type=_exponent, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)

    sp = add("rank1split", "split a rank-one tensor (factor rows in CSV) into bounded and small terms")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--s", type=_exponent, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)

    sp = add("sparsify", "top-k sparsification of a counting-measure vector")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--q", type=_exponent, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)

    sp = add("kbound", "support size for top-k sparsification", inputs=0)
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--q", type=_exponent, required=True)
    sp.add_argument("--epsilon", type=_positive, required=True)

    sp = add("orbitdist", "orbit distance inf_g ||a - g b||_R between two tensors")
    sp.add_argument("--family", default="cut")
    add_mode(sp)

    sp = add("cover", "greedy epsilon-net of samples in the orbit pseudometric")
    sp.add_argument("--family", default="cut")
    sp.add_argument("--epsilon", type=_positive, required=True)
    sp.add_argument("--random", type=_positive_int, help="draw this many random unit-ball samples instead of reading inputs")
    sp.add_argument("--resolution", type=_positive_int, default=8)
    sp.add_argument("--order", type=_positive_int, default=2)
    sp.add_argument("--sample-p", type=_exponent, default=4.0)
    sp.add_argument("--mode", choices=("exact", "heuristic"), default="heuristic")
    sp.add_argument("--restarts", type=_positive_int, default=2)

    sp = add("interp", "interpolation exponents", inputs=0)
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--q", type=_exponent, required=True)
    sp.add_argument("--theta", type=float, required=True)

    sp = add("rtcheck", "scan one matrix for interpolation-inequality anomalies")
    sp.add_argument("--p", type=_exponent, required=True)
    sp.add_argument("--q", type=_exponent, required=True)
    sp.add_argument("--theta", type=float, required=True)
    sp.add_argument("--restarts", type=_positive_int, default=64)
    return parser


def _mode(args):
    if getattr(args, "mode", "exact") == "exact":
        return EXACT
    return Heuristic(restarts=args.restarts, seed=args.seed)


def _one_input(args):
    if len(args.input) != 1:
        raise PreconditionError(f"{args.command} takes exactly one --input")
    return ingest(args.input[0], args.format)


def _family(args, t):
    return SeminormFamily.parse(args.family, t.order, t.resolution)


def _h(name):
    if name == "constant":
        return lambda eps, m: eps
    return lambda eps, m: eps / (m + 1)


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def run_command(args) -> tuple:
    """Dispatch ``args``; returns ``(outputs, certified)``."""
    cmd = args.command
    if cmd == "norm":
        t = _one_input(args)
        return {"value": lp_norm(t, args.p), "order": t.order, "resolution": t.resolution}, True
    if cmd == "opnorm":
        t = _one_input(args)
        mode = _mode(args)
        return {"value": operator_norm(t, args.p, args.q, mode)}, mode is EXACT
    if cmd in ("cutnorm", "rnorm"):
        t = _one_input(args)
        fam = SeminormFamily.cut(t.resolution) if cmd == "cutnorm" else _family(args, t)
        res = best_response(fam, t, _mode(args))
        return {"value": res.value, "witness": oracle_to_dict(res, fam)}, res.exact
    if cmd == "decompose":
        t = _one_input(args)
        dec = greedy_decompose(t, _family(args, t), args.k, _mode(args))
        out = decomposition_to_dict(dec)
        out["n_terms"] = len(dec.terms)
        return out, dec.certified
    if cmd == "pipeline":
        t = _one_input(args)
        res = weak_banach_approx(t, args.p, _family(args, t), args.epsilon, _mode(args))
        return {
            "scale_c": res.scale_c,
            "k": res.k,
            "n_terms": len(res.terms),
            "coefficients": [c for c, _ in res.terms],
            "error_bound": res.error_bound,
            "measured_error": res.measured_error,
            "approximant": tensor_to_dict(res.approximant),
        }, res.certified
    if cmd == "strong":
        t = _one_input(args)
        res = strong_decompose(t, _family(args, t), args.epsilon, _h(args.h), _mode(args))
        return {
            "m": res.m,
            "partition": res.partition,
            "r_error": res.r_error,
            "l2_error": res.l2_error,
            "rounds": res.rounds,
            "k": res.k,
            "w_prime": tensor_to_dict(res.w_prime),
            "y": tensor_to_dict(res.y),
        }, res.certified
    if cmd == "truncate":
        t = _one_input(args)
        sp = threshold_split(t, args.p, args.p_prime, args.epsilon)
        return {
            "threshold_K": sp.threshold_K,
            "tail_norm_bound": sp.tail_norm_bound,
            "tail_norm": lp_norm(sp.tail, args.p_prime),
            "bounded": tensor_to_dict(sp.bounded),
            "tail": tensor_to_dict(sp.tail),
        }, True
    if cmd == "rank1split":
        if len(args.input) != 1:
            raise PreconditionError("rank1split takes exactly one --input")
        res = rank1_split(read_rows(args.input[0]), args.p, args.s, args.epsilon)
        return {
            "constant": res.constant,
            "small_budget": res.small_budget,
            "p_prime": res.p_prime,
            "delta": res.delta,
            "eta": res.eta,
            "terms": [{"tag": t.tag, "bound": t.bound, "factors": [list(map(float, f)) for f in t.factors]}
                      for t in res.terms],
        }, True
    if cmd == "sparsify":
        t = _one_input(args)
        return sparsify_to_dict(top_k_sparsify(t, args.p, args.q, args.epsilon)), True
    if cmd == "kbound":
        return {"k_bound": k_bound(args.p, args.q, args.epsilon)}, True
    if cmd == "orbitdist":
        if len(args.input) != 2:
            raise PreconditionError("orbitdist takes exactly two --input files")
        a, b = (ingest(p, args.format) for p in args.input)
        res = orbit_distance(a, b, _family(args, a), _mode(args))
        return {"distance": res.distance, "aligner": res.aligner.perm.tolist(),
                "inner_exact": res.inner_exact}, res.exact
    if cmd == "cover":
        if args.random:
            samples = [random_ball_sample(args.order, args.resolution, args.sample_p, Measure.PROBABILITY,
                                          seed=args.seed + i) for i in range(args.random)]
        else:
            if not args.input:
                raise PreconditionError("cover needs --input files or --random N")
            samples = [ingest(p, args.format) for p in args.input]
        fam = _family(args, samples[0])
        res = greedy_cover(samples, fam, args.epsilon, _mode(args))
        return res.to_dict(), res.distance_mode == "exact"
    if cmd == "interp":
        pt, qt = interp_exponents(args.p, args.q, args.theta)
        return {"p_theta": _num(float(pt)), "q_theta": _num(float(qt)),
                "p_theta_exact": str(pt), "q_theta_exact": str(qt)}, True
    if cmd == "rtcheck":
        t = _one_input(args)
        rep = riesz_thorin_check(t, args.p, args.q, args.theta, Heuristic(restarts=args.restarts, seed=args.seed))
        return {k: _num(v) for k, v in rep.__dict__.items()}, False
    raise PreconditionError(f"unknown command {cmd}")


def _config(args) -> dict:
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("output",):
            continue
        cfg[k] = _num(v) if isinstance(v, float) else v
    return cfg


def _flatten(prefix, obj, rows):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], rows)
    elif isinstance(obj, (list, tuple)):
        rows.append((prefix, json.dumps(obj)))
    else:
        rows.append((prefix, obj))


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    rows = []
    _flatten("", report, rows)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("key", "value"))
    w.writerows(rows)
    return buf.getvalue()


def run(argv=None) -> tuple:
    """Parse, dispatch and report; returns ``(exit code, report or None)``."""
    start = time.perf_counter()
    args = None
    try:
        args = build_parser().parse_args(argv)
        outputs, certified = run_command(args)
    except PreconditionError as exc:
        print(f"error: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION, None
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET, None
    except (IngestError, OSError) as exc:
        print(f"error: input/output: {exc}", file=sys.stderr)
        return EXIT_IO, None
    report = {
        "operation": args.command,
        "tag": TAGS[args.command],
        "version": __version__,
        "config": _config(args),
        "inputs": list(getattr(args, "input", []) or []),
        "outputs": outputs,
        "certified": bool(certified),
        "seed": args.seed,
        "duration_s": time.perf_counter() - start,
    }
    text = render(report, args.output_format)
    try:
        if args.output:
            with open(args.output, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: input/output: {exc}", file=sys.stderr)
        return EXIT_IO, report
    return EXIT_OK, report


def main(argv=None):
    code, _ = run(argv)
    sys.exit(code)


if __name__ == "__main__":
    main()
