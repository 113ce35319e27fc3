"""``perc-lab`` command line.

Exit codes: 0 ok, 1 usage error, 2 numerical tolerance failure, 3 a bound or
certification check that should hold failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

from . import analytic as an
from . import experiments as ex
from . import hierarchy as hi
from . import oracle as orc
from .dynamics import UpdateRule
from .lattice import Rectangle

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE, EXIT_CERTIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        out = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    if min(out) < 1:
        raise argparse.ArgumentTypeError("dims must be positive")
    return out


def _box(text: str) -> Rectangle:
    """``WxH`` or ``WxH@X,Y`` (lower-left corner, default 1,1)."""
    dims, _, at = text.partition("@")
    w, h = _dims(dims)
    x, y = (1, 1)
    if at:
        try:
            x, y = (int(v) for v in at.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected X,Y after @, got {at!r}")
    return Rectangle.from_dims(w, h, x, y)


def _rule(text: str) -> UpdateRule:
    try:
        return UpdateRule.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _float_or_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _emit(records, args):
    text = (ex.records_to_csv(records) if args.format == "csv"
            else ex.records_to_jsonl(records, getattr(args, "timing", False)))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _common(p, sim=True):
    p.add_argument("--rule", type=_rule, default=UpdateRule("standard"),
                   help="standard | modified | frobose | kcross:K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None, help="write records here instead of stdout")
    p.add_argument("--format", choices=("csv", "jsonl"), default="jsonl")
    p.add_argument("--timing", action="store_true", help="include wall time in JSON records")
    if sim:
        p.add_argument("--trials", type=int, default=10_000)
        p.add_argument("--confidence", type=float, default=0.95)


def build_parser() -> argparse.ArgumentParser:
    P = _Parser(prog="perc-lab", description=__doc__.splitlines()[0])
    sub = P.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="percolation probability on [n]^2 at one or more p")
    _common(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=float, nargs="+", required=True)

    s = sub.add_parser("pc", help="critical probability by stochastic bisection")
    _common(s)
    s.add_argument("--n", type=_int_list, required=True, help="one n or a comma list")
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--max-trials", type=int, default=1_000_000)
    s.add_argument("--max-rounds", type=int, default=20)

    s = sub.add_parser("sweep", help="p_c over an n list with the second-term fit")
    _common(s)
    s.add_argument("--n", type=_int_list, required=True)
    s.add_argument("--tol", type=float, default=1e-3)
    s.add_argument("--max-trials", type=int, default=1_000_000)
    s.add_argument("--max-rounds", type=int, default=20)
    s.add_argument("--fit-out", default=None, help="write the exponent fit as JSON here")

    s = sub.add_parser("event", help="Monte Carlo frequency of I(S), D(S,R) or a crossing")
    _common(s)
    s.add_argument("kind", choices=("I", "D", "crossing"))
    s.add_argument("--rect", type=_box, required=True, help="WxH[@X,Y]; the box R (or S for I)")
    s.add_argument("--helper", type=_box, default=None, help="S for D(S,R), WxH[@X,Y]")
    s.add_argument("--p", type=float, required=True)

    s = sub.add_parser("exact", help="exact enumeration and transfer-matrix results")
    v = s.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name in ("min-span", "summary", "probability"):
        e = v.add_parser(name)
        e.add_argument("--dims", type=_dims, required=True)
        e.add_argument("--rule", type=_rule, default=UpdateRule("standard"))
        e.add_argument("--cap", type=int, default=orc.DEFAULT_CAP)
        e.add_argument("--threads", type=int, default=1)
        if name == "probability":
            e.add_argument("--p", type=float, required=True)
            e.add_argument("--check", action="store_true", help="exit 3 unless the seeds bound dominates")
    e = v.add_parser("crossing")
    e.add_argument("--a", type=int, required=True)
    e.add_argument("--b", type=int, required=True)
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--check", action="store_true",
                   help="exit 2 on disagreement with brute force, 3 if the crossing bound fails")

    s = sub.add_parser("analytic", help="rate functions, integrals, path functional and bounds")
    v = s.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    e = v.add_parser("integral")
    e.add_argument("--from", dest="a", type=_float_or_inf, default=0.0)
    e.add_argument("--to", dest="b", type=_float_or_inf, default=math.inf)
    e.add_argument("--function", default="g", help="g | h | kcross:K")
    e.add_argument("--expect", type=float, default=None)
    e.add_argument("--tol", type=float, default=1e-6)
    e = v.add_parser("g")
    e.add_argument("z", type=float, nargs="+")
    e = v.add_parser("lambda")
    e.add_argument("--k", type=int, default=2)
    e = v.add_parser("wg")
    e.add_argument("--a", type=float, nargs=2, required=True)
    e.add_argument("--b", type=float, nargs=2, required=True)
    e.add_argument("--grid-steps", type=int, default=512)
    e = v.add_parser("window")
    e.add_argument("--n", type=float, default=None)
    e.add_argument("--log-n", type=float, default=None)
    e = v.add_parser("bound")
    e.add_argument("which", choices=("seeds", "crossing", "helper", "integral"))
    e.add_argument("--dims", type=_dims, default=None)
    e.add_argument("--inner", type=_dims, default=None, help="S dims for the helper bound")
    e.add_argument("--q", type=float, default=None)
    e.add_argument("--p", type=float, default=None)

    s = sub.add_parser("hierarchy", help="good hierarchies: bound, enumerate, build, pod")
    v = s.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for name in ("bound", "enumerate", "build", "pod"):
        e = v.add_parser(name)
        e.add_argument("--dims", type=_dims, required=True)
        e.add_argument("--T", type=float, required=True)
        e.add_argument("--Z", type=float, required=True)
        if name == "bound":
            e.add_argument("--p", type=float, required=True)
            e.add_argument("--mode", choices=("exact", "bound"), default="exact")
            e.add_argument("--check", action="store_true",
                           help="exit 3 unless the sum dominates the exact spanning probability")
        if name == "enumerate":
            e.add_argument("--max-count", type=int, default=100_000)
            e.add_argument("--list", action="store_true")
        if name == "build":
            e.add_argument("--sites", required=True, help="x,y;x,y;... inside the box")
        if name == "pod":
            e.add_argument("--q", type=float, required=True)
            e.add_argument("--max-count", type=int, default=100_000)
    return P


# -- handlers ----------------------------------------------------------------------

def _simulate(a):
    recs = [ex.mc_percolation_probability(a.n, p, a.trials, a.rule, a.seed, a.threads, a.confidence)
            for p in a.p]
    _emit(recs, a)
    return EXIT_OK


def _pc(a):
    recs = [ex.estimate_pc(n, a.rule, a.trials, a.tol, a.seed, a.confidence, a.max_rounds,
                           a.max_trials, a.threads) for n in a.n]
    _emit(recs, a)
    return EXIT_OK


def _sweep(a):
    cfg = ex.ExperimentConfig(rule=str(a.rule), n=a.n, trials=a.trials, seed=a.seed,
                              confidence=a.confidence, tol=a.tol, max_rounds=a.max_rounds,
                              max_trials=a.max_trials, threads=a.threads)
    res = ex.sweep_second_term(a.n, a.rule, cfg)
    _emit(res.records, a)
    fit = {"exponent": res.exponent, "exponent_se": res.exponent_se,
           "residuals": {str(k): v for k, v in res.residuals.items()}, "note": res.note}
    if a.fit_out:
        with open(a.fit_out, "w", encoding="utf-8") as fh:
            json.dump(fit, fh, sort_keys=True)
            fh.write("\n")
    else:
        sys.stderr.write(json.dumps(fit, sort_keys=True) + "\n")
    return EXIT_OK


def _event(a):
    if a.kind == "D":
        if a.helper is None:
            raise UsageError("event D needs --helper")
        geometry = (a.helper, a.rect)
    else:
        geometry = a.rect
    _emit([ex.mc_event_probability(a.kind, geometry, a.p, a.trials, a.seed, a.rule,
                                   a.confidence, a.threads)], a)
    return EXIT_OK


def _exact(a):
    if a.verb == "crossing":
        val = orc.exact_crossing_probability(a.a, a.b, a.p)
        print(_fmt(val))
        if a.check:
            if a.a * a.b <= 16:
                brute = orc.exact_crossing_probability_bruteforce(a.a, a.b, a.p)
                if abs(brute - val) > 1e-12:
                    return EXIT_TOLERANCE
            if not an.crossing_bound(a.a, a.b, an.q_of_p(a.p)).dominates(val):
                return EXIT_CERTIFY
        return EXIT_OK
    summ = orc.enumerate_spanning(a.dims, a.rule, a.cap,
                                  method="naive" if a.threads > 1 else "pruned", threads=a.threads)
    if a.verb == "min-span":
        print(summ.min_size if summ.min_size is not None else "none")
    elif a.verb == "summary":
        print(json.dumps(summ.to_dict(), sort_keys=True))
    else:
        val = summ.probability(a.p)
        print(_fmt(val))
        if a.check:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", an.RegimeWarning)
                if not an.seeds_bound(a.dims, an.q_of_p(a.p)).dominates(val):
                    return EXIT_CERTIFY
    return EXIT_OK


def _analytic(a):
    if a.verb == "integral":
        f = a.function.lower()
        if f == "g":
            val = an.integral_g(a.a, a.b)
        elif f == "h":
            val = an.integral_h(a.a, a.b)
        elif f.startswith("kcross:") and f[7:].isdigit():
            val = an.integral_g_kcross(int(f[7:]), a.a, a.b)
        else:
            raise UsageError(f"unknown function {a.function!r}")
        print(_fmt(val))
        if a.expect is not None and abs(val - a.expect) > a.tol:
            return EXIT_TOLERANCE
    elif a.verb == "g":
        for z in a.z:
            print(_fmt(float(an.g(z))))
    elif a.verb == "lambda":
        print(_fmt(an.lambda_k(a.k)))
    elif a.verb == "wg":
        r = an.wg(tuple(a.a), tuple(a.b), a.grid_steps)
        print(json.dumps(r._asdict(), sort_keys=True))
    elif a.verb == "window":
        if (a.n is None) == (a.log_n is None):
            raise UsageError("give exactly one of --n and --log-n")
        w = an.theorem_window(a.n, log_n=a.log_n)
        print(json.dumps(w._asdict(), sort_keys=True))
    else:
        q = a.q if a.q is not None else (an.q_of_p(a.p) if a.p is not None else None)
        if q is None or a.dims is None:
            raise UsageError("bounds need --dims and one of --q, --p")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", an.RegimeWarning)
            if a.which == "seeds":
                rep = an.seeds_bound(a.dims, q)
            elif a.which == "crossing":
                rep = an.crossing_bound(a.dims[0], a.dims[1], q)
            elif a.which == "helper":
                if a.inner is None:
                    raise UsageError("the helper bound needs --inner")
                rep = an.d_bound(a.inner, a.dims, q)
            else:
                rep = an.prop_integral_bound(a.dims[0], a.dims[1], q)
        print(json.dumps(rep.to_dict(), sort_keys=True, default=str))
    return EXIT_OK


def _parse_sites(text: str):
    out = []
    for part in text.replace(" ", "").split(";"):
        if part:
            x, y = part.split(",")
            out.append((int(x), int(y)))
    return out


def _hierarchy(a):
    from .lattice import Configuration

    R = Rectangle.from_dims(*a.dims)
    params = hi.GoodnessParams(a.T, a.Z)
    if a.verb == "bound":
        b = hi.basic_upper_bound(R, params, a.p, a.mode)
        exact = orc.exact_spanning_probability(a.dims, a.p) if R.area <= orc.DEFAULT_CAP else None
        print(json.dumps({"dims": list(a.dims), "T": a.T, "Z": a.Z, "p": a.p, "mode": a.mode,
                          "sum": b.value, "hierarchies": b.hierarchies, "certifying": b.certifying,
                          "notes": list(b.notes), "exact_spanning": exact}, sort_keys=True))
        if a.check and (exact is None or not b.value >= exact):
            return EXIT_CERTIFY
    elif a.verb == "enumerate":
        en = hi.enumerate_good(R, params, max_count=a.max_count)
        print(json.dumps({"dims": list(a.dims), "T": a.T, "Z": a.Z, "count": en.count,
                          "complete": en.complete, "exact_count": hi.count_good(R, params)},
                         sort_keys=True))
        if a.list:
            for H in en.hierarchies:
                print(json.dumps(H.to_dict()))
    elif a.verb == "build":
        A = Configuration.from_sites(R, _parse_sites(a.sites))
        H = hi.build_hierarchy(A, R, params)
        if H is None:
            print("null")
            return EXIT_CERTIFY
        print(json.dumps({"hierarchy": H.to_dict(), "stats": hi.stats(H, params).to_dict()}, sort_keys=True))
    else:
        en = hi.enumerate_good(R, params, max_count=a.max_count)
        missing = 0
        for H in en.hierarchies:
            missing += hi.pod_search(H, a.q, params) is None
        print(json.dumps({"dims": list(a.dims), "q": a.q, "hierarchies": en.count,
                          "complete": en.complete, "without_pod": missing}, sort_keys=True))
        if missing:
            return EXIT_CERTIFY
    return EXIT_OK


HANDLERS = {"simulate": _simulate, "pc": _pc, "sweep": _sweep, "event": _event,
            "exact": _exact, "analytic": _analytic, "hierarchy": _hierarchy}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    try:
        return HANDLERS[args.command](args)
    except (UsageError, ValueError) as e:
        sys.stderr.write(f"perc-lab: error: {e}\n")
        return EXIT_USAGE


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
