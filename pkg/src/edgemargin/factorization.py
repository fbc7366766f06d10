"""Incidence factorisations over a rooted in-branching.

All matrices here live in the *branching frame*: nodes ordered by
``dec.node_order`` (branching edge ``k`` leaves node ``k``, root last) and
edges ordered by ``dec.edge_order`` (branching edges first, then the
complement edges).  Use :meth:`Factorization.position` to go from an input
edge id to its column in this frame.
"""
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import IllConditioned, SingularMatrix
from .graph import incidence_matrices, reachability


@dataclass(frozen=True)
class Factorization:
    dec: object
    E: np.ndarray
    A: np.ndarray
    weights: np.ndarray
    R: np.ndarray
    T_tau: np.ndarray
    T_tau_ls: np.ndarray
    R_tilde: np.ndarray
    T_tilde: np.ndarray
    N_tau: np.ndarray
    signed_paths: dict
    single_root: bool

    @property
    def n(self):
        return self.E.shape[0]

    @property
    def m(self):
        return self.E.shape[1]

    @property
    def E_tau(self):
        return self.E[:, : self.n - 1]

    @property
    def A_tau(self):
        return self.A[:, : self.n - 1]

    @property
    def E_c(self):
        return self.E[:, self.n - 1 :]

    @property
    def W(self):
        return np.diag(self.weights)

    def position(self, edge):
        return self.dec.permutation[edge]

    def frame_weights(self, weights):
        """Reorder an input-order weight vector into the branching frame."""
        w = np.asarray(weights, dtype=float)
        return w[list(self.dec.edge_order)]


def signed_path(g, dec, c_edge):
    """Signed encoding of complement edge ``c_edge`` by branching edges.

    Walks the unoriented branching tree from the edge's tail to its head:
    +1 where a branching edge is crossed along its direction, -1 against it,
    0 elsewhere.  Index ``k`` refers to ``dec.tau_edges[k]``.
    """
    if c_edge not in dec.sibling_in_tau:
        raise ValueError(f"edge {c_edge} is not a complement edge of this branching")
    tail, head, _ = g.edges[c_edge]
    pos = dec.node_position
    nxt = dec.next_node
    up_from_tail = [tail]
    while up_from_tail[-1] != dec.root:
        up_from_tail.append(nxt[up_from_tail[-1]])
    on_tail_side = {v: i for i, v in enumerate(up_from_tail)}
    up_from_head = [head]
    while up_from_head[-1] not in on_tail_side:
        up_from_head.append(nxt[up_from_head[-1]])
    meet = up_from_head[-1]
    r = np.zeros(g.n - 1, dtype=int)
    for v in up_from_tail[: on_tail_side[meet]]:
        r[pos[v]] = 1
    for v in up_from_head[:-1]:
        r[pos[v]] = -1
    return r


def factorize(g, dec, reach=None):
    """Build ``R = [I T_tau]``, ``R_tilde`` (single globally reachable node only) and ``N_tau``."""
    reach = reachability(g) if reach is None else reach
    n, m = g.n, g.m
    node_order = list(dec.node_order)
    edge_order = list(dec.edge_order)
    E0, A0 = incidence_matrices(n, g.tails, g.heads)
    E = E0[node_order][:, edge_order]
    A = A0[node_order][:, edge_order]
    w = g.weights[edge_order]
    E_tau, E_c = E[:, : n - 1], E[:, n - 1 :]
    A_tau, A_c = A[:, : n - 1], A[:, n - 1 :]

    paths = {c: signed_path(g, dec, c) for c in dec.c_edges}
    T_tau = np.zeros((n - 1, m - n + 1))
    for j, c in enumerate(dec.c_edges):
        T_tau[:, j] = paths[c]

    # least-squares form, kept as the cross-check on the tree walk
    try:
        T_ls = numerics.solve_linear(E_tau.T @ E_tau, E_tau.T @ E_c) if n > 1 else np.zeros((0, m - n + 1))
    except SingularMatrix as exc:
        raise IllConditioned("E_tau^T E_tau is singular; the branching is malformed") from exc
    if T_ls.size and np.max(np.abs(np.rint(T_ls) - T_tau)) > 1e-8:
        raise IllConditioned("signed paths disagree with the least-squares encoding")

    R = np.hstack([np.eye(n - 1), T_tau])

    single = len(reach.globally_reachable) == 1
    if single:
        try:
            T_tilde = numerics.solve_linear(A_tau.T @ A_tau, A_tau.T @ A_c) if n > 1 else np.zeros((0, m - n + 1))
        except SingularMatrix as exc:
            raise IllConditioned("A_tau^T A_tau is singular") from exc
        R_tilde = np.hstack([np.eye(n - 1), T_tilde])
    else:
        T_tilde = R_tilde = None

    cycles = np.vstack([-T_tau, np.eye(m - n + 1)])
    N_tau = numerics.orthonormalize(cycles) if cycles.shape[1] else np.zeros((m, 0))

    return Factorization(
        dec=dec,
        E=E,
        A=A,
        weights=w,
        R=R,
        T_tau=T_tau,
        T_tau_ls=T_ls,
        R_tilde=R_tilde,
        T_tilde=T_tilde,
        N_tau=N_tau,
        signed_paths=paths,
        single_root=single,
    )


def reduced_matrix(fac, weights=None):
    """``E_tau^T A W R^T``: the branching-edge dynamics matrix.

    ``weights`` are in input edge order; the nominal weights are used when omitted.
    """
    w = fac.weights if weights is None else fac.frame_weights(weights)
    return fac.E_tau.T @ fac.A @ (w[:, None] * fac.R.T)


def _inf_norm(x):
    return float(np.max(np.abs(x))) if x.size else 0.0


def similarity_check_graph(fac, is_cycle=False):
    """Residuals of the block-triangular similarity of the graph Laplacian.

    ``S^-1 = [E_tau 1]^T`` and ``S = [E_tau (E_tau^T E_tau)^-1, 1/n]``.  For a
    simple cycle the weighted transform that also clears the lower-left block
    is checked as well.
    """
    n = fac.n
    W = fac.W
    Lg = fac.A @ W @ fac.E.T
    ones = np.ones((n, 1))
    S_inv = np.hstack([fac.E_tau, ones]).T
    S = np.hstack([fac.E_tau @ numerics.inverse(fac.E_tau.T @ fac.E_tau), ones / n])
    B = S_inv @ Lg @ S
    red = reduced_matrix(fac)
    out = {
        "upper_right": _inf_norm(B[: n - 1, n - 1 :]),
        "inverse": _inf_norm(S_inv @ S - np.eye(n)),
        "upper_left": _inf_norm(B[: n - 1, : n - 1] - red),
        "lower_left": _inf_norm(B[n - 1 :, : n - 1] - ones.T @ fac.A @ W @ fac.R.T),
    }
    if fac.R_tilde is not None:
        out["single_root_form"] = _inf_norm(fac.E_tau.T @ fac.A_tau @ fac.R_tilde @ W @ fac.R.T - red)
    if is_cycle:
        Wn = fac.A @ W @ fac.A.T
        cond = 1.0 / np.sum(1.0 / fac.weights)
        S1 = np.hstack([Wn @ fac.E_tau @ numerics.inverse(fac.E_tau.T @ Wn @ fac.E_tau), ones * cond])
        S1_inv = np.vstack([fac.E_tau.T, (1.0 / np.diag(Wn))[None, :]])
        B1 = S1_inv @ Lg @ S1
        out["cycle_off_diagonal"] = max(_inf_norm(B1[: n - 1, n - 1 :]), _inf_norm(B1[n - 1 :, : n - 1]))
        out["cycle_inverse"] = _inf_norm(S1_inv @ S1 - np.eye(n))
        out["cycle_upper_left"] = _inf_norm(B1[: n - 1, : n - 1] - fac.E_tau.T @ W @ fac.R.T)
    return out


def similarity_check_edge(fac, is_cycle=False):
    """Residuals of the block-triangular similarity of the edge Laplacian, ``V = [R^T N_tau]``."""
    n, m = fac.n, fac.m
    W = fac.W
    Le = fac.E.T @ fac.A @ W
    V = np.hstack([fac.R.T, fac.N_tau])
    left = numerics.solve_linear(fac.R @ fac.R.T, fac.R)
    V_inv = np.vstack([left, fac.N_tau.T])
    B = V_inv @ Le @ V
    red = reduced_matrix(fac)
    out = {
        "lower_block": _inf_norm(B[n - 1 :, :]),
        "inverse": _inf_norm(V_inv @ V - np.eye(m)),
        "upper_left": _inf_norm(B[: n - 1, : n - 1] - red),
        "upper_right": _inf_norm(B[: n - 1, n - 1 :] - fac.E_tau.T @ fac.A @ W @ fac.N_tau),
        "null_basis": max(_inf_norm(fac.R @ fac.N_tau), _inf_norm(fac.N_tau.T @ fac.N_tau - np.eye(m - n + 1))),
    }
    if is_cycle:
        w = fac.weights
        cond = 1.0 / np.sum(1.0 / w)
        S2 = np.hstack([fac.R.T, (1.0 / w)[:, None]])
        S2_inv = np.vstack([numerics.solve_linear(fac.R @ W @ fac.R.T, fac.R @ W), cond * np.ones((1, m))])
        B2 = S2_inv @ Le @ S2
        out["cycle_off_diagonal"] = max(_inf_norm(B2[: n - 1, n - 1 :]), _inf_norm(B2[n - 1 :, :]))
        out["cycle_inverse"] = _inf_norm(S2_inv @ S2 - np.eye(m))
        out["cycle_upper_left"] = _inf_norm(B2[: n - 1, : n - 1] - fac.E_tau.T @ W @ fac.R.T)
        # graph and edge Laplacian related through S2 S1^-1
        Lg = fac.A @ W @ fac.E.T
        Wn = fac.A @ W @ fac.A.T
        ones = np.ones((n, 1))
        S1 = np.hstack([Wn @ fac.E_tau @ numerics.inverse(fac.E_tau.T @ Wn @ fac.E_tau), ones * cond])
        S1_inv = np.vstack([fac.E_tau.T, (1.0 / np.diag(Wn))[None, :]])
        T = S2 @ S1_inv
        T_inv = S1 @ S2_inv
        out["cycle_similarity"] = _inf_norm(T_inv @ Le @ T - Lg)
    return out
