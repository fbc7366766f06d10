"""Acceptance suite: one test per criterion, each printed as PASS/FAIL in the summary."""
import io
import json
import time
from pathlib import Path

import numpy as np

from conftest import graphs_of
from edgemargin import cli, generators, numerics, robustness
from edgemargin.errors import NoConvergence
from edgemargin.graph import incidence_matrices
from edgemargin.dynamics import classify, simulate
from edgemargin.factorization import similarity_check_edge, similarity_check_graph
from edgemargin.graph import reachability, structure_report
from oracle import critical_delta

DATA = Path(generators.__file__).parent / "data"


def test_ac1_closed_forms_and_nyquist_match_oracle(acceptance):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_closed, nyquist_violations, count = 0.0, 0, 0
    for i in range(200):
        kind = generators.KINDS[i % len(generators.KINDS)]
        g = generators.random_graph(rng, kind, n_range=(3, 8), m_max=16, low=0.1, high=3.0)
        assert g.m <= 16
        ctx = robustness.analyze(g)
        e = int(rng.integers(0, g.m))
        b = robustness.bound_for_edge(g, e, ctx)
        d_star = critical_delta(ctx.fac, g, e)
        if kind in ("dag", "cycle"):
            assert b.method != robustness.NYQUIST
            worst_closed = max(worst_closed, abs(b.primary.delta_min - d_star) / abs(d_star))
        if b.nyquist.delta_min < d_star - 1e-4 * abs(d_star):
            nyquist_violations += 1
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst_closed <= 1e-4 and nyquist_violations == 0 and elapsed < 60
    acceptance(
        "AC1", ok, f"{count} graphs, worst closed-form rel err {worst_closed:.2e}, "
        f"nyquist past oracle {nyquist_violations}, {elapsed:.1f}s"
    )
    assert ok


def test_ac2_matrix_bound_equals_out_weight_sum(acceptance):
    worst = 0.0
    for g in graphs_of("dag", 100, 202):
        reach = reachability(g)
        assert reach.is_acyclic and len(reach.globally_reachable) == 1
        ctx = robustness.analyze(g)
        for e in range(g.m):
            direct = robustness.matrix_bound(ctx.fac, e)
            worst = max(worst, abs(direct - g.out_weight_sum(g.edges[e][0])))
    ok = worst <= 1e-9
    acceptance("AC2", ok, f"100 DAGs, worst |matrix form - out-weight sum| {worst:.2e}")
    assert ok


def test_ac3_cycle_closed_form(acceptance):
    rng = np.random.default_rng(303)
    worst_formula = worst_gm = worst_w = 0.0
    for n in range(3, 11):
        for _ in range(3):
            g = generators.random_cycle(rng, n)
            w = g.weights
            ctx = robustness.analyze(g)
            for j in range(n):
                b = robustness.cycle_bound(g, j)
                expected = -w[j] - 1.0 / np.sum(1.0 / np.delete(w, j))
                worst_formula = max(worst_formula, abs(b.delta_min - expected))
                gm, omega, _ = robustness.gain_margin(robustness.build_uncertain_system(ctx.fac, j))
                worst_gm = max(worst_gm, abs(gm - abs(b.delta_min)) / abs(b.delta_min))
                worst_w = max(worst_w, omega)
    ok = worst_formula <= 1e-9 and worst_gm <= 1e-6 and worst_w == 0.0
    acceptance(
        "AC3", ok, f"cycles n=3..10, formula err {worst_formula:.2e}, gm rel err {worst_gm:.2e}, max omega_pc {worst_w}"
    )
    assert ok


def _sibling_rows_ok(fac, trace):
    allowed = set()
    for step in trace:
        allowed.add(step["sibling_row"])
        if not set(step["changed_rows"]) <= allowed:
            return False
    return True


def test_ac4_sherman_morrison(acceptance):
    worst, pattern_bad = 0.0, 0
    for g in graphs_of("dag", 100, 404):
        fac = robustness.analyze(g).fac
        D, trace = robustness.sherman_morrison_inverse(fac)
        direct = numerics.inverse(fac.R_tilde @ fac.W @ fac.R.T)
        worst = max(worst, float(np.max(np.abs(D - direct))))
        pattern_bad += not _sibling_rows_ok(fac, trace)
    ok = worst <= 1e-10 and pattern_bad == 0
    acceptance("AC4", ok, f"100 DAGs, worst |D - inverse| {worst:.2e}, trace pattern violations {pattern_bad}")
    assert ok


def test_ac5_structural_suite(acceptance):
    failed = []
    worst_sim = 0.0
    rng = np.random.default_rng(505)
    for i in range(100):
        kind = generators.KINDS[i % len(generators.KINDS)]
        g = generators.random_graph(rng, kind)
        rep = structure_report(g)
        failed += [(i, k) for k, v in rep.checks.items() if v is False]
        fac = robustness.analyze(g).fac
        cyc = kind == "cycle"
        res = {**similarity_check_graph(fac, cyc), **similarity_check_edge(fac, cyc)}
        worst_sim = max(worst_sim, max(res.values()))
    # multi-root graphs exercise the out-degree / range-of-A check in every case
    for g in graphs_of("multi_root", 100, 506):
        if structure_report(g).checks["multi_root_out_degrees"] is not True:
            failed.append(("multi_root", "multi_root_out_degrees"))
    ok = not failed and worst_sim <= 1e-9
    acceptance("AC5", ok, f"structural checks failed {len(failed)}, worst similarity residual {worst_sim:.2e}")
    assert ok


def test_ac6_three_regimes_on_desk_dag(acceptance):
    g = cli.read_graph(DATA / "desk_dag.txt")
    e = g.edge_id(g.labels.index("6"), g.labels.index("11"))
    assert g.edges[e][2] == 0.10
    assert abs(g.out_weight_sum(g.edges[e][0]) - 0.70) < 1e-12
    ctx = robustness.analyze(g)
    b = robustness.bound_for_edge(g, e, ctx)
    x0 = np.arange(1.0, g.n + 1)
    simulate(g, x0, e, -0.5, t_end=0.01, ctx=ctx)  # compile warm-up, not timed
    kinds, times = [], []
    for delta in (-0.50, -0.70, -1.00):
        t0 = time.perf_counter()
        traj = simulate(g, x0, e, delta, ctx=ctx)
        out = classify(traj, g, ctx=ctx)
        times.append(time.perf_counter() - t0)
        kinds.append(out.kind)
        assert out.agrees_with_spectrum
    ok = (
        abs(b.primary.delta_min + 0.70) < 1e-12
        and kinds == ["consensus", "clustering", "divergence"]
        and max(times) < 1.0
    )
    acceptance("AC6", ok, f"bound {b.primary.delta_min:.2f}, regimes {kinds}, slowest run {max(times):.3f}s")
    assert ok


def test_ac7_node_edge_consistency(acceptance):
    rng = np.random.default_rng(707)
    worst, runs = 0.0, 0
    while runs < 20:
        g = generators.random_graph(rng, generators.KINDS[runs % len(generators.KINDS)], n_range=(3, 6))
        ctx = robustness.analyze(g)
        e = int(rng.integers(0, g.m))
        b = robustness.bound_for_edge(g, e, ctx)
        delta = float(rng.uniform(0.3, 0.9)) * b.primary.delta_min
        x0 = rng.uniform(-1, 1, g.n)
        traj = simulate(g, x0, e, delta, ctx=ctx)
        assert classify(traj, g, ctx=ctx).kind == "consensus"
        E, _ = incidence_matrices(g.n, g.tails, g.heads)
        proj = E[:, list(ctx.dec.tau_edges)].T
        direct = np.max(np.abs(traj.states @ proj.T - traj.edge_states))
        worst = max(worst, float(direct), traj.consistency_error)
        runs += 1
    ok = worst <= 1e-6
    acceptance("AC7", ok, f"{runs} convergent runs, worst |x_tau - E_tau^T x| {worst:.2e}")
    assert ok


def _run(argv):
    buf = io.StringIO()
    code = cli.main(argv, stdout=buf)
    return code, buf.getvalue()


def test_ac8_cli_contract(acceptance, tmp_path, monkeypatch):
    problems = []
    # round-trip on shipped and random graphs
    rng = np.random.default_rng(808)
    samples = [cli.read_graph(DATA / "desk_dag.txt"), cli.read_graph(DATA / "cycle3.txt")]
    samples += [generators.random_graph(rng) for _ in range(20)]
    for g in samples:
        text = cli.format_edge_list(g)
        h = cli.parse_edge_list(text)
        labelled = [(g.labels[t], g.labels[u], w) for t, u, w in g.edges]
        if [(h.labels[t], h.labels[u], w) for t, u, w in h.edges] != labelled or cli.format_edge_list(h) != text:
            problems.append("round-trip")
    # exit codes
    cycle = str(DATA / "cycle3.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("a b 1\na b 2\n")
    split = tmp_path / "split.txt"
    split.write_text("a b 1\nc d 1\n")
    expect = [
        (["analyze", cycle], 0),
        (["analyze", str(bad)], 1),
        (["bogus"], 1),
        (["analyze", str(split)], 2),
    ]
    for argv, code in expect:
        got, _ = _run(argv)
        if got != code:
            problems.append(f"exit {argv[0]} {got}!={code}")
    # numeric failures map to 3
    def broken(*a, **k):
        raise NoConvergence("forced")

    with monkeypatch.context() as mp:
        mp.setattr(robustness, "bound_for_edge", broken)
        got, _ = _run(["analyze", cycle])
    if got != 3:
        problems.append(f"numeric exit {got}")
    # nyquist locus at delta_min touches (-1, 0)
    worst = 0.0
    files = [DATA / "cycle3.txt", DATA / "desk_dag.txt"]
    for k, g in enumerate(graphs_of("general", 5, 809) + graphs_of("cycle", 5, 810)):
        p = tmp_path / f"g{k}.txt"
        p.write_text(cli.format_edge_list(g))
        files.append(p)
    for f in files:
        g = cli.read_graph(f)
        for e in range(g.m):
            t, h = g.edge_label(e)
            code, text = _run(["nyquist", str(f), "--edge", t, h, "--out", str(tmp_path / "n.csv")])
            if code != 0:
                problems.append(f"nyquist exit {code}")
                continue
            worst = max(worst, json.loads(text)["min_distance_to_critical"])
    ok = not problems and worst <= 1e-6
    acceptance("AC8", ok, f"round-trip/exit-code problems {problems or 'none'}, nyquist distance to (-1,0) {worst:.2e}")
    assert ok
