import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graphs_of
from edgemargin import generators, numerics
from edgemargin.factorization import (
    factorize,
    reduced_matrix,
    signed_path,
    similarity_check_edge,
    similarity_check_graph,
)
from edgemargin.graph import build_incidence, digraph, find_in_branching, graph_laplacian, multiset_close, reachability


def fac_of(g, root=None):
    dec = find_in_branching(g, root)
    return factorize(g, dec), dec


def test_path_has_identity_factor():
    fac, _ = fac_of(digraph(3, [(0, 1, 1.0), (1, 2, 1.0)]))
    assert np.array_equal(fac.R, np.eye(2))
    assert fac.T_tau.shape == (2, 0) and fac.N_tau.shape == (2, 0)


def test_three_cycle_closing_edge_runs_backwards():
    g = digraph(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)])
    fac, dec = fac_of(g, root=2)
    assert dec.tau_edges == (0, 1) and dec.c_edges == (2,)
    assert np.array_equal(signed_path(g, dec, 2), [-1, -1])
    assert np.array_equal(fac.R[:, 2], [-1, -1])


def test_encoding_through_two_branches():
    # branching: 0->1->2->6 and 3->4->5->6; edge 1->4 runs up one branch and down the other
    edges = [(0, 1, 1.0), (1, 2, 1.0), (2, 6, 1.0), (3, 4, 1.0), (4, 5, 1.0), (5, 6, 1.0), (3, 0, 1.0), (1, 4, 1.0)]
    g = digraph(7, edges)
    dec = find_in_branching(g)
    assert dec.c_edges == (6, 7)
    r = signed_path(g, dec, 7)
    used = {dec.tau_edges[k]: int(v) for k, v in enumerate(r) if v}
    assert used == {1: 1, 2: 1, 4: -1, 5: -1}
    assert dec.sibling_in_tau[7] == 1


def test_duplicate_route_is_a_basis_vector():
    g = digraph(3, [(0, 2, 1.0), (0, 1, 1.0), (1, 2, 1.0)])
    dec = find_in_branching(g)
    r = signed_path(g, dec, 1)
    assert np.array_equal(np.abs(r), [1, 1])
    # 0->1 then 1->2 replays the branching edge 0->2 as a two-step detour
    g2 = digraph(4, [(0, 3, 1.0), (1, 3, 1.0), (2, 3, 1.0), (0, 1, 1.0)])
    dec2 = find_in_branching(g2)
    k = dec2.node_order.index(0)
    r2 = signed_path(g2, dec2, 3)
    assert r2[k] == 1 and np.sum(np.abs(r2)) == 2


def test_signed_path_rejects_branching_edges():
    g = digraph(2, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        signed_path(g, find_in_branching(g), 0)


def _check_factorization(g, root=None):
    fac, dec = fac_of(g, root)
    n = g.n
    assert np.max(np.abs(fac.E - fac.E_tau @ fac.R)) <= 1e-10
    assert np.array_equal(np.rint(fac.T_tau_ls), fac.T_tau)
    assert np.max(np.abs(fac.R @ fac.N_tau), initial=0) <= 1e-10
    k = fac.N_tau.shape[1]
    assert np.max(np.abs(fac.N_tau.T @ fac.N_tau - np.eye(k)), initial=0) <= 1e-10
    assert np.array_equal(fac.A_tau, np.vstack([np.eye(n - 1), np.zeros((1, n - 1))]))
    if fac.R_tilde is not None:
        assert np.max(np.abs(fac.A - fac.A_tau @ fac.R_tilde)) <= 1e-10
        for j, c in enumerate(dec.c_edges):
            col = fac.R_tilde[:, n - 1 + j]
            s = dec.sibling_in_tau[c]
            assert np.allclose(col, np.eye(n - 1)[fac.position(s)])
    return fac, dec


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(generators.KINDS))
def test_factorization_identities(seed, kind):
    g = generators.random_graph(np.random.default_rng(seed), kind)
    fac, _ = _check_factorization(g)
    assert (fac.R_tilde is not None) == (len(reachability(g).globally_reachable) == 1)


def test_acyclic_sibling_entry_is_forward():
    for g in graphs_of("dag", 40, 71):
        fac, dec = fac_of(g)
        for c in dec.c_edges:
            s = dec.sibling_in_tau[c]
            assert signed_path(g, dec, c)[fac.position(s)] == 1


def test_acyclic_sibling_paths_exclude_each_other():
    # c-edges t, s with siblings p, q: the path of s may use p or the path of t may use q, never both
    for g in graphs_of("dag", 60, 72, n_range=(4, 8)):
        fac, dec = fac_of(g)
        pos = fac.position
        for t in dec.c_edges:
            for s in dec.c_edges:
                if s == t:
                    continue
                p, q = pos(dec.sibling_in_tau[t]), pos(dec.sibling_in_tau[s])
                if p == q:
                    continue
                r_s, r_t = fac.signed_paths[s], fac.signed_paths[t]
                if r_s[p] != 0:
                    assert r_t[q] == 0


def test_reduced_matrix_small_cases():
    fac, _ = fac_of(digraph(2, [(0, 1, 2.5)]))
    assert np.array_equal(reduced_matrix(fac), [[2.5]])
    g = digraph(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 0, 3.0)])
    fac, _ = fac_of(g)
    assert np.allclose(reduced_matrix(fac), fac.E_tau.T @ fac.W @ fac.R.T)


def test_reduced_matrix_carries_nonzero_spectrum():
    for g in graphs_of(None, 60, 73):
        fac, _ = fac_of(g)
        red = reduced_matrix(fac)
        ev_r = numerics.eigenvalues(red)
        ev_g = numerics.eigenvalues(graph_laplacian(build_incidence(g)))
        assert np.all(ev_r.real > 0)
        assert multiset_close(ev_r, ev_g[np.abs(ev_g) > 1e-9], 1e-8)
        assert abs(np.linalg.det(red)) > 1e-12 * max(1.0, np.max(np.abs(red))) ** (g.n - 1)


def test_reduced_matrix_takes_input_order_weights():
    g = digraph(3, [(0, 2, 1.0), (1, 2, 2.0), (0, 1, 3.0)])
    fac, _ = fac_of(g)
    w = np.array([1.5, 2.0, 3.0])
    g2 = digraph(3, [(0, 2, 1.5), (1, 2, 2.0), (0, 1, 3.0)])
    assert np.allclose(reduced_matrix(fac, w), reduced_matrix(fac_of(g2)[0]))


def test_similarity_residuals():
    for kind in generators.KINDS:
        for g in graphs_of(kind, 15, 74):
            fac, _ = fac_of(g)
            cyc = kind == "cycle"
            res = {**similarity_check_graph(fac, cyc), **similarity_check_edge(fac, cyc)}
            assert max(res.values()) <= 1e-9, res
            if cyc:
                assert "cycle_similarity" in res
            assert ("single_root_form" in res) == (fac.R_tilde is not None)


def test_cycle_spectra_coincide():
    for g in graphs_of("cycle", 20, 75):
        inc = build_incidence(g)
        eg = numerics.eigenvalues(graph_laplacian(inc))
        ee = numerics.eigenvalues(inc.E.T @ inc.A @ inc.W)
        assert multiset_close(eg, ee, 1e-8)


def test_path_similarity_is_exact():
    fac, _ = fac_of(digraph(4, [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0)]))
    assert similarity_check_graph(fac)["upper_right"] == 0.0
