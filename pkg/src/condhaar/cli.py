"""Command-line front end: ``sample``, ``verify``, ``density``, ``clt``, ``list``.

Exit codes: 0 when every report passes, 1 on a failed verification, 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import harness
from .charpoly import (alpha_schedule_general, sample_jacobi_det_pair,
                       sample_z_product_unitary, so_usp_derivative_pair, z_derivative)
from .errors import DomainError
from .measures import eigenangles, sample_conditional_orthogonal

GROUPS = ["unitary", "unitary-conditional", "orthogonal-conditional", "so", "usp", "jacobi"]


class UsageError(Exception):
    pass


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", metavar="PATH")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--n", type=int)
    params.add_argument("--p", type=int)
    params.add_argument("--p-plus", type=int)
    params.add_argument("--p-minus", type=int)
    params.add_argument("--beta", type=float)
    params.add_argument("--a", type=float)
    params.add_argument("--b", type=float)
    params.add_argument("--count", type=int)

    ap = argparse.ArgumentParser(prog="condhaar", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", parents=[common, params], help="dump draws")
    sp.add_argument("--group", choices=GROUPS, required=True)

    vp = sub.add_parser("verify", parents=[common, params], help="run experiments")
    who = vp.add_mutually_exclusive_group(required=True)
    who.add_argument("--all", action="store_true")
    who.add_argument("--id", action="append", dest="ids")
    vp.add_argument("--scale", type=float, default=1.0,
                    help="multiply every sample count (floored per experiment)")
    vp.add_argument("--timing", action="store_true", help="record runtime_ms")

    dp = sub.add_parser("density", parents=[common, params], help="tail-slope experiment")
    dp.add_argument("--group", choices=GROUPS, required=True)
    dp.add_argument("--timing", action="store_true")

    cp = sub.add_parser("clt", parents=[common, params], help="central limit suites")
    cp.add_argument("--group", choices=sorted(harness.CLT_IDS), action="append", dest="groups")
    cp.add_argument("--timing", action="store_true")

    lp = sub.add_parser("list", help="experiment ids and anchors")
    lp.add_argument("--format", choices=["text", "json"], default="text")
    lp.add_argument("--out", metavar="PATH")
    return ap


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _reports_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment_id", "statistic", "value", "stderr", "threshold", "op", "passed", "seed"])
    for r in reports:
        for s in r.statistics:
            w.writerow([r.experiment_id, s.name, repr(s.value),
                        "" if s.stderr is None else repr(s.stderr),
                        "" if s.threshold is None else repr(s.threshold), s.op, s.passed, r.seed])
    return buf.getvalue()


def _finish(reports, args):
    text = harness.reports_to_json(reports) + "\n" if args.format == "json" else _reports_csv(reports)
    _emit(text, args.out)
    failed = [r.experiment_id for r in reports if not r.pass_]
    ks = sum(1 for r in reports for s in r.statistics if s.name.endswith(".p") and s.op == ">=")
    print(f"{len(reports) - len(failed)}/{len(reports)} experiments passed; "
          f"{ks} KS gates at level {harness.KS_LEVEL} (expected false failures {ks * harness.KS_LEVEL:.2f})",
          file=sys.stderr)
    for eid in failed:
        print(f"FAILED {eid}", file=sys.stderr)
    return 1 if failed else 0


def _overrides(args):
    names = {"n": "n", "p": "p", "p_plus": "p_plus", "p_minus": "p_minus",
             "beta": "beta", "a": "a", "b": "b", "count": "count"}
    return {key: getattr(args, attr) for attr, key in names.items()
            if getattr(args, attr, None) is not None}


def _cmd_verify(args):
    over = _overrides(args)
    ids = list(harness.REGISTRY) if args.all else args.ids
    reports = []
    for eid in ids:
        if eid not in harness.REGISTRY:
            raise UsageError(f"unknown experiment id {eid!r} (see 'list')")
        defaults = harness.REGISTRY[eid].defaults
        if args.all:
            params = {k: v for k, v in over.items() if k in defaults}
        else:
            unknown = sorted(set(over) - set(defaults))
            if unknown:
                raise UsageError(f"experiment {eid!r} does not take {', '.join(unknown)}")
            params = over
        reports.append(harness.run_experiment(eid, params, args.seed, args.threads,
                                              args.scale, args.timing))
    return _finish(reports, args)


def _cmd_density(args):
    group = {"unitary-conditional": "unitary"}.get(args.group, args.group)
    if group not in ("unitary", "so", "usp", "jacobi"):
        raise UsageError(f"no density experiment for group {args.group!r}")
    p = args.p if args.p is not None else (args.p_plus if args.p_plus is not None else 1)
    n = args.n if args.n is not None else (p + 2 if group == "unitary" else 1)
    rep = harness.run_density(group, n, p, args.count or 1_000_000, args.seed, args.threads,
                              beta=args.beta if args.beta is not None else 2.0,
                              a=args.a if args.a is not None else 0.5,
                              b=args.b if args.b is not None else 0.5, timing=args.timing)
    return _finish([rep], args)


def _cmd_clt(args):
    over = _overrides(args)
    reports = []
    for group in args.groups or list(harness.CLT_IDS):
        eid = harness.CLT_IDS[group]
        defaults = harness.REGISTRY[eid].defaults
        params = {k: v for k, v in over.items() if k in defaults}
        reports.append(harness.run_experiment(eid, params, args.seed, args.threads,
                                              timing=args.timing))
    return _finish(reports, args)


def _sample_rows(args):
    gen = np.random.default_rng(np.random.SeedSequence(args.seed))
    count = args.count or 1000
    n = args.n
    if n is None:
        raise UsageError("--n is required for sampling")
    g = args.group
    if g in ("unitary", "unitary-conditional"):
        p = 0 if g == "unitary" else (args.p if args.p is not None else 1)
        z = sample_z_product_unitary(n, p, gen, count)
        return ["re_z", "im_z"], np.column_stack([z.real, z.imag]), {"n": n, "p": p}
    if g == "orthogonal-conditional":
        p = args.p if args.p is not None else 1
        z = z_derivative(eigenangles(sample_conditional_orthogonal(n, p, gen, count)), p)
        return ["re_z", "im_z"], np.column_stack([z.real, z.imag]), {"n": n, "p": p}
    if g in ("so", "usp"):
        pp = args.p_plus if args.p_plus is not None else (args.p or 0)
        pm = args.p_minus or 0
        pair = so_usp_derivative_pair(g, n, pp, pm, gen, count)
        return (["z_plus", "z_minus"], np.column_stack([pair.z_plus, pair.z_minus]),
                {"n": n, "p_plus": pp, "p_minus": pm})
    beta = args.beta if args.beta is not None else 2.0
    a = args.a if args.a is not None else 0.0
    b = args.b if args.b is not None else 0.0
    pair = sample_jacobi_det_pair(alpha_schedule_general(beta, a, b, n), gen, count)
    return (["det_plus", "det_minus"], np.column_stack([pair.z_plus, pair.z_minus]),
            {"n": n, "beta": beta, "a": a, "b": b})


def _cmd_sample(args):
    cols, rows, params = _sample_rows(args)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        w.writerows([[repr(float(v)) for v in r] for r in rows])
        text = buf.getvalue()
    else:
        text = json.dumps({"schema": harness.SCHEMA_VERSION, "group": args.group,
                           "params": params, "seed": args.seed, "columns": cols,
                           "rows": rows.tolist()}) + "\n"
    _emit(text, args.out)
    return 0


def _cmd_list(args):
    items = harness.list_experiments()
    if args.format == "json":
        text = json.dumps([{"experiment_id": e, "anchor": a} for e, a in items], indent=1) + "\n"
    else:
        width = max(len(e) for e, _ in items)
        text = "".join(f"{e:<{width}}  {a}\n" for e, a in items)
    _emit(text, args.out)
    return 0


def main(argv=None):
    ap = _parser()
    args = ap.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        ap.error("--threads must be >= 1")
    try:
        return {"sample": _cmd_sample, "verify": _cmd_verify, "density": _cmd_density,
                "clt": _cmd_clt, "list": _cmd_list}[args.command](args)
    except (UsageError, harness.UnknownExperimentError, harness.InvalidParamsError) as exc:
        msg = exc.args[0] if exc.args else exc
        print(f"{ap.prog}: error: {msg}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"{ap.prog}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
