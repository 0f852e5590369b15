"""Command-line front end: ``agmonlab gen|spectrum|hardy|agmon-metric|verify|report``.

Exit codes: 0 all checks pass, 1 an inequality is violated, 2 a hypothesis
failed, 3 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

EXIT_OK, EXIT_VIOLATION, EXIT_HYPOTHESIS, EXIT_USAGE = 0, 1, 2, 3
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _exhaustion_spec(text):
    """'a:b:c' -> [a, a+c, ..., <= b]; 'a,b,c' -> [a, b, c]."""
    try:
        if ":" in text:
            lo, hi, step = (int(t) for t in text.split(":"))
            if step <= 0 or lo < 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1, step))
        vals = [int(t) for t in text.split(",")]
        if any(v < 0 for v in vals) or vals != sorted(vals):
            raise ValueError
        return vals
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exhaustion spec {text!r}; use start:stop:step or r1,r2,...")


def _graph_args(p):
    src = p.add_argument_group("graph source")
    src.add_argument("--graph", metavar="FILE", help="graph JSON file")
    src.add_argument("--lattice", type=int, metavar="D", help="generate the box {-N..N}^D")
    src.add_argument("--radius", type=int, default=None, metavar="N", help="box radius")
    src.add_argument("--well", type=float, default=None, metavar="C", help="potential C at the origin")
    src.add_argument("--family", choices=("path", "cycle", "tree", "star", "complete"))
    src.add_argument("--n", type=int, help="vertex count (path, cycle, complete) or leaves (star)")
    src.add_argument("--depth", type=int, help="tree depth")
    src.add_argument("--branching", type=int, default=2, help="tree branching")


def build_parser() -> argparse.ArgumentParser:
    from . import __version__
    from .suites import SUITES

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=None, help="stability threshold for certificates")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")

    p = _Parser(prog="agmonlab", description="Decay certificates for Schrodinger operators on weighted graphs.")
    p.add_argument("--version", action="version", version=f"agmonlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common], help="write a graph file")
    _graph_args(g)

    s = sub.add_parser("spectrum", parents=[common], help="lowest eigenpairs and essential-spectrum estimate")
    _graph_args(s)
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--exhaustion", type=_exhaustion_spec, help="radii of the balls K_j removed")
    s.add_argument("--vectors", action="store_true", help="include eigenvectors")

    h = sub.add_parser("hardy", parents=[common], help="Hardy weight CSV from the truncated Green function")
    _graph_args(h)
    h.add_argument("--alpha", type=float, default=0.5)

    a = sub.add_parser("agmon-metric", parents=[common], help="Agmon distance CSV")
    _graph_args(a)
    a.add_argument("--w", type=float, default=None, help="constant Hardy weight (default: the Green-function weight)")
    a.add_argument("--variant", choices=("cutoff", "intro"), default="cutoff")

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    _graph_args(v)
    v.add_argument("--suite", required=True, choices=SUITES)
    v.add_argument("--exhaustion", type=_exhaustion_spec, help="ball radii of the exhaustion")
    v.add_argument("--gap", type=float, default=None, help="spectral gap a (estimated if omitted)")
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--alpha", type=float, default=0.5)
    v.add_argument("--perturb-rhs", type=float, default=None, metavar="F",
                   help="scale the right-hand sides of the main checks by F (testing aid)")

    r = sub.add_parser("report", parents=[common], help="merge verify reports into a summary")
    r.add_argument("reports", nargs="+", metavar="REPORT")
    return p


def _load_graph(args, required=True):
    from .graph_core import gen_family, gen_lattice_box, load_graph, well

    given = [args.graph is not None, args.lattice is not None, args.family is not None]
    if sum(given) > 1:
        raise UsageError("give only one of --graph, --lattice, --family")
    if args.graph is not None:
        return load_graph(args.graph)
    if args.lattice is not None:
        if args.radius is None:
            raise UsageError("--lattice needs --radius")
        return gen_lattice_box(args.lattice, args.radius, q=None if args.well is None else well(args.well))
    if args.family is not None:
        params = {}
        if args.family == "tree":
            if args.depth is None:
                raise UsageError("--family tree needs --depth")
            params = {"depth": args.depth, "branching": args.branching}
        elif args.family == "star":
            params = {"k": args.n}
        else:
            params = {"n": args.n}
        if any(v is None for v in params.values()):
            raise UsageError(f"--family {args.family} needs --n")
        g = gen_family(args.family, **params)
        if args.well is not None:
            q = g.q.copy()
            q[g.origin] = args.well
            g = g.with_q(q)
        return g
    if required:
        raise UsageError("no graph: pass --graph FILE, --lattice D --radius N, or --family")
    return None


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("out",)}
    return json.loads(json.dumps(cfg, default=str))


def _dump(doc, out):
    text = json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(header, rows, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])
    finally:
        if out:
            fh.close()


def _envelope(args, body):
    from . import __version__
    return {"agmonlab_version": __version__, "config": _config(args), **body}


# -- subcommands -----------------------------------------------------------


def cmd_gen(args):
    from .graph_core import graph_to_dict, save_graph

    g = _load_graph(args)
    if args.out:
        save_graph(g, args.out)
    else:
        _dump(graph_to_dict(g), None)
    return EXIT_OK


def cmd_spectrum(args):
    from . import spectral
    from .agmon import _jsonable
    from .graph_core import ball, combinatorial_distance

    g = _load_graph(args)
    if not 1 <= args.k <= g.n:
        raise UsageError(f"--k must lie in 1..{g.n}")
    res = spectral.eigensolve_lowest(g, args.k)
    body = {"eigenvalues": _jsonable(res.eigenvalues), "residuals": _jsonable(res.residuals),
            "method": res.method}
    if args.vectors:
        body["eigenvectors"] = _jsonable(res.eigenvectors.T)
    if g.origin is not None:
        dist = combinatorial_distance(g, [g.origin])
        R = int(dist.max())
        radii = args.exhaustion or [r for r in (1, 2, 4, 8) if r < R]
        if radii:
            est = spectral.lambda0_ess_estimate(g, [ball(g, r, dist) for r in radii])
            body["lambda0_ess_estimate"] = _jsonable(est.estimate)
            body["essential"] = {"radii": radii[:est.levels_used], "sequence": _jsonable(est.sequence),
                                 "estimate": _jsonable(est.estimate), "gap": _jsonable(est.gap),
                                 "notes": est.notes}
    _dump(_envelope(args, body), args.out)
    return EXIT_OK


def _green_weight(g, alpha):
    import numpy as np
    from . import hardy
    from .suites import green_fixture

    if g.origin is None:
        raise UsageError("the graph has no origin")
    sub, v = green_fixture(g)
    hw = hardy.supersolution_hardy(sub, v, alpha, check_positivity=False)
    full_v = np.zeros(g.n)
    full_w = np.zeros(g.n)
    full_v[sub.source_index] = v
    full_w[sub.source_index] = hw.w
    return full_v, full_w


def cmd_hardy(args):
    import numpy as np

    g = _load_graph(args)
    v, w = _green_weight(g, args.alpha)
    header = ["vertex", "label", "v", "w", "v_alpha"]
    cols = [v, w, v ** args.alpha]
    if g.coords is not None:
        r = np.linalg.norm(np.asarray(g.coords, float).reshape(g.n, -1), axis=1)
        header += ["norm_x", "w_norm_x_sq"]
        cols += [r, w * r * r]
    rows = ((i, g.labels[i], *(float(c[i]) for c in cols)) for i in range(g.n))
    _write_csv(header, rows, args.out)
    return EXIT_OK


def cmd_agmon_metric(args):
    import numpy as np
    from .metrics import agmon_metric, scaled_combinatorial_metric

    g = _load_graph(args)
    if g.origin is None:
        raise UsageError("the graph has no origin")
    w = np.full(g.n, args.w) if args.w is not None else _green_weight(g, 0.5)[1]
    d = scaled_combinatorial_metric(g).edge_lengths
    mf = agmon_metric(g, d, w, variant=args.variant)
    rows = ((i, g.labels[i], float(mf.dist[i]), int(mf.pred[i])) for i in range(g.n))
    _write_csv(("vertex_id", "label", "dist", "pred"), rows, args.out)
    return EXIT_OK


def cmd_verify(args):
    from .suites import SuiteConfig, run_suite

    g = _load_graph(args, required=False)
    cfg = SuiteConfig(seed=args.seed, trials=args.trials, radii=args.exhaustion, gap=args.gap,
                      alpha=args.alpha, perturb=args.perturb_rhs)
    if args.tol is not None:
        cfg.stability = args.tol
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    res = run_suite(args.suite, g, cfg)
    _dump(_envelope(args, res.to_dict()), args.out)
    for c in res.checks:
        print(c.line(), file=sys.stderr)
    print(f"suite {args.suite}: {res.status}", file=sys.stderr)
    return res.exit_code


def cmd_report(args):
    docs = []
    for path in args.reports:
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: not JSON ({exc.msg}, line {exc.lineno})")
        if not isinstance(doc, dict) or "status" not in doc:
            raise UsageError(f"{path}: not a verify report")
        docs.append((path, doc))
    code = EXIT_OK
    rank = {"pass": EXIT_OK, "violation": EXIT_VIOLATION, "hypothesis": EXIT_HYPOTHESIS}
    for _, doc in docs:
        c = rank.get(doc["status"])
        if c is None:
            raise UsageError(f"unknown status {doc['status']!r}")
        # a violation outranks a hypothesis failure
        if c == EXIT_VIOLATION or (c == EXIT_HYPOTHESIS and code == EXIT_OK):
            code = c
    summary = {
        "reports": [{"file": p, "suite": d.get("suite"), "status": d["status"],
                     "failed_checks": [c["check"] for c in d.get("checks", []) if not c.get("pass")]}
                    for p, d in docs],
        "all_pass": code == EXIT_OK,
        "exit_code": code,
    }
    _dump(_envelope(args, summary), args.out)
    return code


COMMANDS = {"gen": cmd_gen, "spectrum": cmd_spectrum, "hardy": cmd_hardy,
            "agmon-metric": cmd_agmon_metric, "verify": cmd_verify, "report": cmd_report}


def main(argv=None) -> int:
    threads = os.environ.get("AGMONLAB_THREADS")
    if threads:
        for var in THREAD_VARS:
            os.environ.setdefault(var, threads)
    args = build_parser().parse_args(argv)
    from .errors import AgmonLabError, HypothesisFailed

    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"agmonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisFailed as exc:
        print(f"agmonlab: hypothesis failed: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (AgmonLabError, OSError) as exc:
        print(f"agmonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
