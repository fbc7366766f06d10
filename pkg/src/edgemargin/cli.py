"""Command line interface: ``edgemargin {analyze,bound,rank,simulate,nyquist}``.

Exit codes: 0 success, 1 usage or input error, 2 analysis impossible
(no rooted in-branching, wrong graph class), 3 numeric failure.
"""
import argparse
import csv
import json
import math
import sys

import numpy as np

from . import dynamics, generators, numerics, robustness
from .errors import AnalysisImpossible, EdgeMarginError, GraphError, ParseError
from .factorization import reduced_matrix
from .graph import Digraph, structure_report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IMPOSSIBLE = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# edge-list files


def parse_edge_list(text):
    """Parse ``tail head weight`` lines; ``#`` starts a comment.

    Nodes are numbered by first appearance and keep their text labels.
    """
    labels = {}
    edges = []
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"expected 'tail head weight', got {len(parts)} field(s)", lineno)
        tail, head, wtext = parts
        try:
            w = float(wtext)
        except ValueError:
            raise ParseError(f"weight {wtext!r} is not a number", lineno) from None
        if not math.isfinite(w) or w <= 0:
            raise ParseError(f"weight must be finite and positive, got {wtext}", lineno)
        if tail == head:
            raise ParseError(f"self-loop on {tail!r}", lineno)
        if (tail, head) in seen:
            raise ParseError(f"duplicate edge {tail} -> {head} (first on line {seen[(tail, head)]})", lineno)
        seen[(tail, head)] = lineno
        for lab in (tail, head):
            if lab not in labels:
                labels[lab] = len(labels)
        edges.append((labels[tail], labels[head], w))
    if not labels:
        raise ParseError("no edges found")
    return Digraph(len(labels), tuple(edges), tuple(labels))


def format_edge_list(g):
    lines = [f"{g.labels[t]} {g.labels[h]} {w!r}" for t, h, w in g.edges]
    return "\n".join(lines) + "\n"


def read_graph(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_edge_list(text)


# ---------------------------------------------------------------------------
# JSON rendering


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def dump_json(obj, stream):
    # floats go out via repr: shortest string that round-trips exactly
    json.dump(_clean(obj), stream, indent=2, allow_nan=False)
    stream.write("\n")


def graph_class(reach):
    if reach.is_simple_cycle:
        return "cycle"
    if reach.is_acyclic and len(reach.globally_reachable) == 1:
        return "acyclic"
    return "general"


def bound_record(g, bounds):
    p, q = bounds.primary, bounds.nyquist
    tail, head = g.edge_label(bounds.edge)
    details = dict(p.details)
    if "parent" in details:
        details["parent"] = g.labels[details["parent"]]
    return {
        "tail": tail,
        "head": head,
        "weight": g.edges[bounds.edge][2],
        "method": p.method,
        "delta_min": p.delta_min,
        "delta_max": p.delta_max,
        "crossover_freq": p.crossover_freq,
        "m_at_crossover": p.m_at_crossover,
        "details": details,
        "nyquist": {
            "gain_margin": q.delta_max,
            "delta_min": q.delta_min,
            "delta_max": q.delta_max,
            "crossover_freq": q.crossover_freq,
            "m_at_crossover": q.m_at_crossover,
        },
    }


def graph_summary(g, ctx):
    reach = ctx.reach
    return {
        "n": g.n,
        "m": g.m,
        "nodes": list(g.labels),
        "class": graph_class(reach),
        "is_acyclic": reach.is_acyclic,
        "is_simple_cycle": reach.is_simple_cycle,
        "globally_reachable": [g.labels[v] for v in sorted(reach.globally_reachable)],
        "root": g.labels[ctx.dec.root],
        "in_branching": [list(g.edge_label(k)) for k in ctx.dec.tau_edges],
    }


def analysis_report(g, ctx):
    rep = structure_report(g)
    warnings = []
    edges = []
    for e in range(g.m):
        b = robustness.bound_for_edge(g, e, ctx)
        rec = bound_record(g, b)
        if b.primary.method != robustness.NYQUIST and abs(b.primary.delta_min - b.nyquist.delta_min) > 1e-6 * max(
            1.0, abs(b.primary.delta_min)
        ):
            warnings.append(f"edge {rec['tail']}->{rec['head']}: closed form and Nyquist margin differ")
        edges.append(rec)
    if graph_class(ctx.reach) == "general":
        warnings.append("general digraph: only the symmetric Nyquist interval is certified; larger positive perturbations are uncertified")
    return {
        "graph": graph_summary(g, ctx),
        "structure": {
            "rank_graph_laplacian": rep.rank_graph_laplacian,
            "null_edge_laplacian": rep.null_edge_laplacian,
            "null_aw": rep.null_aw,
            "out_degree": dict(zip(g.labels, rep.out_degree)),
            "checks": rep.checks,
        },
        "edges": edges,
        "warnings": warnings,
    }


# ---------------------------------------------------------------------------
# commands


def _edge_arg(g, pair):
    tail, head = pair
    index = {lab: i for i, lab in enumerate(g.labels)}
    try:
        return g.edge_id(index[tail], index[head])
    except KeyError:
        raise ParseError(f"no edge {tail} -> {head} in the graph") from None


def cmd_analyze(args, out):
    g = read_graph(args.file)
    ctx = robustness.analyze(g, _root(g, args))
    dump_json(analysis_report(g, ctx), out)


def cmd_bound(args, out):
    g = read_graph(args.file)
    ctx = robustness.analyze(g, _root(g, args))
    e = _edge_arg(g, args.edge)
    dump_json(bound_record(g, robustness.bound_for_edge(g, e, ctx)), out)


def cmd_rank(args, out):
    g = read_graph(args.file)
    ctx = robustness.analyze(g, _root(g, args))
    ranking = []
    for pos, (e, b) in enumerate(robustness.rank_edges(g, ctx), start=1):
        rec = bound_record(g, b)
        rec["rank"] = pos
        ranking.append(rec)
    dump_json({"graph": graph_summary(g, ctx), "ranking": ranking}, out)


def _initial_state(g, spec):
    if spec is None or spec == "spread":
        return np.arange(1, g.n + 1, dtype=float)
    try:
        vals = [float(v) for v in spec.split(",")]
    except ValueError:
        raise ParseError(f"--x0 must be 'spread' or {g.n} comma-separated numbers") from None
    if len(vals) != g.n:
        raise ParseError(f"--x0 has {len(vals)} values, graph has {g.n} nodes")
    return np.array(vals)


def write_trajectory_csv(traj, stream):
    n = traj.states.shape[1]
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["t"] + [f"x_{i}" for i in range(1, n + 1)] + ["spread"])
    for t, x, s in zip(traj.times, traj.states, traj.spread):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(s))])


def cmd_simulate(args, out):
    g = read_graph(args.file)
    ctx = robustness.analyze(g, _root(g, args))
    e = _edge_arg(g, args.edge) if args.edge else None
    delta = args.delta if e is not None else 0.0
    x0 = _initial_state(g, args.x0)
    traj = dynamics.simulate(g, x0, e, delta, t_end=args.t_end, dt=args.dt, ctx=ctx)
    outcome = dynamics.classify(traj, g, ctx=ctx)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_trajectory_csv(traj, fh)
    dump_json(
        {
            "outcome": outcome.kind,
            "consensus_value": outcome.consensus_value,
            "cluster_count": outcome.cluster_count,
            "spectral_prediction": outcome.spectral_kind,
            "edge": list(g.edge_label(e)) if e is not None else None,
            "delta": delta,
            "t_end": float(traj.times[-1]),
            "sample_step": traj.dt,
            "samples": len(traj.times),
            "diverged": traj.diverged,
            "consistency_error": traj.consistency_error,
            "final_state": dict(zip(g.labels, traj.states[-1])),
            "columns": {f"x_{i + 1}": lab for i, lab in enumerate(g.labels)},
        },
        out,
    )


def write_nyquist_csv(samples, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["omega", "re", "im"])
    for s in samples:
        w.writerow([repr(s.omega), repr(s.value.real), repr(s.value.imag)])


def cmd_nyquist(args, out):
    g = read_graph(args.file)
    ctx = robustness.analyze(g, _root(g, args))
    e = _edge_arg(g, args.edge)
    delta = args.delta
    if delta is None:
        delta = robustness.bound_for_edge(g, e, ctx).primary.delta_min
    sys_ = robustness.build_uncertain_system(ctx.fac, e)
    samples = dynamics.nyquist_samples(sys_, delta, args.points)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_nyquist_csv(samples, fh)
        dist = min(abs(s.value + 1.0) for s in samples)
        dump_json({"edge": list(g.edge_label(e)), "delta": delta, "points": len(samples), "min_distance_to_critical": dist}, out)
    else:
        write_nyquist_csv(samples, out)


def cmd_selftest(args, out):
    """Randomised dual-route checks; seeded by ``EDGEMARGIN_SEED``."""
    rng = generators.default_rng()
    failures = []
    checked = 0
    for i in range(args.count):
        kind = generators.KINDS[i % len(generators.KINDS)]
        g = generators.random_graph(rng, kind)
        ctx = robustness.analyze(g)
        rep = structure_report(g)
        bad = [k for k, v in rep.checks.items() if v is False]
        if bad:
            failures.append({"graph": i, "kind": kind, "failed": bad})
        e = int(rng.integers(0, g.m))
        b = robustness.bound_for_edge(g, e, ctx)
        if b.primary.method != robustness.NYQUIST:
            if abs(b.primary.delta_min - b.nyquist.delta_min) > 1e-6 * max(1.0, abs(b.primary.delta_min)):
                failures.append({"graph": i, "kind": kind, "failed": ["closed_form_vs_nyquist"]})
        if ctx.fac.R_tilde is not None:
            D, _ = robustness.sherman_morrison_inverse(ctx.fac)
            direct = numerics.inverse(ctx.fac.R_tilde @ ctx.fac.W @ ctx.fac.R.T)
            if np.max(np.abs(D - direct)) > 1e-10 * max(1.0, np.max(np.abs(direct))):
                failures.append({"graph": i, "kind": kind, "failed": ["sherman_morrison"]})
        ev = numerics.eigenvalues(reduced_matrix(ctx.fac))
        if ev.size and ev.real.min() <= 0:
            failures.append({"graph": i, "kind": kind, "failed": ["reduced_not_stable"]})
        checked += 1
    dump_json({"checked": checked, "failures": failures, "ok": not failures}, out)
    return EXIT_OK if not failures else EXIT_NUMERIC


def _root(g, args):
    lab = getattr(args, "root", None)
    if lab is None:
        return None
    try:
        return g.labels.index(lab)
    except ValueError:
        raise ParseError(f"unknown root node {lab!r}") from None


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="edgemargin", description="Single-edge robustness margins for weighted directed consensus.")
    sub = p.add_subparsers(dest="command", metavar="{analyze,bound,rank,simulate,nyquist}", parser_class=_Parser)
    sub.required = True

    def common(sp):
        sp.add_argument("file", help="edge-list file: 'tail head weight' per line")
        sp.add_argument("--root", help="label of the in-branching root (default: smallest globally reachable node)")

    sp = sub.add_parser("analyze", help="structure report and bounds for every edge")
    common(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("bound", help="bound for one edge")
    common(sp)
    sp.add_argument("--edge", nargs=2, metavar=("TAIL", "HEAD"), required=True)
    sp.set_defaults(func=cmd_bound)

    sp = sub.add_parser("rank", help="edges ordered most vulnerable first")
    common(sp)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("simulate", help="integrate the (perturbed) consensus dynamics")
    common(sp)
    sp.add_argument("--edge", nargs=2, metavar=("TAIL", "HEAD"))
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--x0", default="spread", help="'spread' (x_i = i) or comma-separated initial states")
    sp.add_argument("--t-end", type=float, default=None)
    sp.add_argument("--dt", type=float, default=None)
    sp.add_argument("--out", help="trajectory CSV path")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("nyquist", help="loop-gain samples -delta*M(jw) as CSV")
    common(sp)
    sp.add_argument("--edge", nargs=2, metavar=("TAIL", "HEAD"), required=True)
    sp.add_argument("--delta", type=float, default=None, help="default: the edge's delta_min")
    sp.add_argument("--points", type=int, default=500)
    sp.add_argument("--out", help="CSV path (default: stdout)")
    sp.set_defaults(func=cmd_nyquist)

    sp = sub.add_parser("selftest")
    sp.add_argument("--count", type=int, default=40)
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None, stdout=None):
    out = sys.stdout if stdout is None else stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code not in (None, 0) else EXIT_OK
    try:
        code = args.func(args, out)
    except GraphError as exc:
        dump_json({"error": {"type": type(exc).__name__, "line": getattr(exc, "line", None), "message": str(exc)}}, out)
        return EXIT_USAGE
    except AnalysisImpossible as exc:
        dump_json({"error": {"type": type(exc).__name__, "message": str(exc)}}, out)
        return EXIT_IMPOSSIBLE
    except EdgeMarginError as exc:
        dump_json({"error": {"type": type(exc).__name__, "message": str(exc)}}, out)
        return EXIT_NUMERIC
    except ValueError as exc:
        dump_json({"error": {"type": "ValueError", "message": str(exc)}}, out)
        return EXIT_USAGE
    return EXIT_OK if code is None else code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
