"""Weighted digraphs, incidence matrices, Laplacians and rooted in-branchings.

Nodes and edges are 0-based integer ids.  Edge ``k`` is ``g.edges[k]`` and
that id is what every report refers to; the in-branching relabeling is kept
as an explicit permutation and never rewrites ``g``.
"""
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import GraphError, NoInBranching, RootNotReachable


@dataclass(frozen=True)
class Digraph:
    """Weighted digraph with strictly positive nominal weights.

    ``edges`` holds ``(tail, head, weight)`` triples; self-loops and parallel
    edges are rejected.
    """

    n: int
    edges: tuple
    labels: tuple = None

    def __post_init__(self):
        if self.n < 1:
            raise GraphError("a digraph needs at least one node")
        edges = tuple((int(t), int(h), float(w)) for t, h, w in self.edges)
        seen = set()
        for k, (t, h, w) in enumerate(edges):
            if not (0 <= t < self.n and 0 <= h < self.n):
                raise GraphError(f"edge {k} references a node outside [0, {self.n})")
            if t == h:
                raise GraphError(f"edge {k} is a self-loop on node {t}")
            if (t, h) in seen:
                raise GraphError(f"edge {k} duplicates the pair ({t}, {h})")
            if not np.isfinite(w) or w <= 0:
                raise GraphError(f"edge {k} has non-positive or non-finite weight {w}")
            seen.add((t, h))
        object.__setattr__(self, "edges", edges)
        labels = self.labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(self.n))
        labels = tuple(str(s) for s in labels)
        if len(labels) != self.n:
            raise GraphError("one label per node is required")
        object.__setattr__(self, "labels", labels)

    @property
    def m(self):
        return len(self.edges)

    @property
    def tails(self):
        return np.array([e[0] for e in self.edges], dtype=int)

    @property
    def heads(self):
        return np.array([e[1] for e in self.edges], dtype=int)

    @property
    def weights(self):
        return np.array([e[2] for e in self.edges], dtype=float)

    def out_degree(self):
        return np.bincount(self.tails, minlength=self.n) if self.m else np.zeros(self.n, dtype=int)

    def in_degree(self):
        return np.bincount(self.heads, minlength=self.n) if self.m else np.zeros(self.n, dtype=int)

    def out_edges(self, node):
        return [k for k, (t, _, _) in enumerate(self.edges) if t == node]

    def edge_id(self, tail, head):
        for k, (t, h, _) in enumerate(self.edges):
            if t == tail and h == head:
                return k
        raise KeyError(f"no edge {tail}->{head}")

    def edge_label(self, k):
        t, h, _ = self.edges[k]
        return (self.labels[t], self.labels[h])

    def out_weight_sum(self, node, weights=None):
        w = self.weights if weights is None else np.asarray(weights, dtype=float)
        return float(sum(w[k] for k in self.out_edges(node)))

    def perturbed_weights(self, edge=None, delta=0.0):
        w = self.weights
        if edge is not None:
            w[edge] += delta
        return w


def digraph(n, edges, labels=None):
    return Digraph(n, tuple(edges), None if labels is None else tuple(labels))


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class IncidenceSet:
    E: np.ndarray
    A: np.ndarray
    W: np.ndarray


def incidence_matrices(n, tails, heads):
    m = len(tails)
    E = np.zeros((n, m))
    A = np.zeros((n, m))
    cols = np.arange(m)
    E[tails, cols] = 1.0
    E[heads, cols] = -1.0
    A[tails, cols] = 1.0
    return E, A


def build_incidence(g, weights=None):
    """Incidence ``E``, out-incidence ``A`` and weight matrix ``W`` in edge order.

    ``weights`` overrides the nominal weights (used for perturbed systems).
    """
    E, A = incidence_matrices(g.n, g.tails, g.heads)
    w = g.weights if weights is None else np.asarray(weights, dtype=float)
    return IncidenceSet(E, A, np.diag(w))


def graph_laplacian(inc):
    return inc.A @ inc.W @ inc.E.T


def edge_laplacian(inc):
    return inc.E.T @ inc.A @ inc.W


# ---------------------------------------------------------------------------
# reachability


@dataclass(frozen=True)
class ReachabilityReport:
    globally_reachable: frozenset
    is_acyclic: bool
    is_simple_cycle: bool
    is_weakly_connected: bool

    @property
    def has_in_branching(self):
        return bool(self.globally_reachable)


def _reverse_adjacency(g):
    radj = [[] for _ in range(g.n)]
    for k, (t, h, _) in enumerate(g.edges):
        radj[h].append((t, k))
    return radj


def distances_to(g, root):
    """Directed hop distance from every node to ``root`` (-1 if unreachable)."""
    radj = _reverse_adjacency(g)
    dist = np.full(g.n, -1, dtype=int)
    dist[root] = 0
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for u, _ in radj[v]:
            if dist[u] < 0:
                dist[u] = dist[v] + 1
                queue.append(u)
    return dist


def _topological_order(g):
    indeg = g.in_degree().copy()
    adj = [[] for _ in range(g.n)]
    for t, h, _ in g.edges:
        adj[t].append(h)
    queue = deque(v for v in range(g.n) if indeg[v] == 0)
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for h in adj[v]:
            indeg[h] -= 1
            if indeg[h] == 0:
                queue.append(h)
    return order if len(order) == g.n else None


def _weakly_connected(g):
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, h, _ in g.edges:
        parent[find(t)] = find(h)
    return len({find(v) for v in range(g.n)}) == 1


def reachability(g):
    gr = frozenset(v for v in range(g.n) if np.all(distances_to(g, v) >= 0))
    acyclic = _topological_order(g) is not None
    connected = _weakly_connected(g)
    simple_cycle = (
        g.m == g.n
        and g.n >= 2
        and connected
        and np.all(g.out_degree() == 1)
        and np.all(g.in_degree() == 1)
    )
    return ReachabilityReport(gr, acyclic, bool(simple_cycle), connected)


def topological_order(g):
    return _topological_order(g)


# ---------------------------------------------------------------------------
# rooted in-branching


@dataclass(frozen=True)
class BranchingDecomposition:
    """A rooted in-branching and the edge/node relabeling built from it.

    ``tau_edges[k]`` is the branching edge leaving node ``node_order[k]``;
    the root is ``node_order[-1]``.  ``permutation[e]`` is the position of
    original edge ``e`` in ``tau_edges + c_edges``.  ``sibling_in_tau`` maps a
    complement edge to the branching edge sharing its tail, or ``None`` when
    the complement edge leaves the root.
    """

    root: int
    tau_edges: tuple
    c_edges: tuple
    node_order: tuple
    parent_of_edge: dict = field(repr=False)
    sibling_in_tau: dict = field(repr=False)
    permutation: dict = field(repr=False)
    next_node: tuple = field(repr=False, default=())

    @property
    def edge_order(self):
        return self.tau_edges + self.c_edges

    @property
    def node_position(self):
        pos = [0] * len(self.node_order)
        for k, v in enumerate(self.node_order):
            pos[v] = k
        return pos


def find_in_branching(g, root=None, reach=None):
    """Build a rooted in-branching by reverse BFS from ``root``.

    Each non-root node keeps the out-edge whose head is closest to the root
    (ties: smallest edge id).  Default root is the smallest globally
    reachable node.
    """
    reach = reachability(g) if reach is None else reach
    if not reach.globally_reachable:
        raise NoInBranching("no globally reachable node, so no rooted in-branching exists")
    if root is None:
        root = min(reach.globally_reachable)
    elif root not in reach.globally_reachable:
        raise RootNotReachable(f"node {root} is not globally reachable")
    dist = distances_to(g, root)
    chosen = {}
    for k, (t, h, _) in enumerate(g.edges):
        if t == root:
            continue
        key = (dist[h], k)
        if t not in chosen or key < chosen[t][0]:
            chosen[t] = (key, k)
    node_order = tuple(v for v in range(g.n) if v != root) + (root,)
    tau = tuple(chosen[v][1] for v in node_order[:-1])
    tau_set = set(tau)
    c_edges = tuple(k for k in range(g.m) if k not in tau_set)
    tau_of_node = {g.edges[k][0]: k for k in tau}
    parent_of_edge = {k: g.edges[k][0] for k in range(g.m)}
    sibling = {k: tau_of_node.get(g.edges[k][0]) for k in c_edges}
    perm = {e: pos for pos, e in enumerate(tau + c_edges)}
    nxt = [-1] * g.n
    for k in tau:
        nxt[g.edges[k][0]] = g.edges[k][1]
    return BranchingDecomposition(root, tau, c_edges, node_order, parent_of_edge, sibling, perm, tuple(nxt))


def is_valid_branching(g, dec):
    if len(dec.tau_edges) != g.n - 1:
        return False
    outdeg = np.zeros(g.n, dtype=int)
    nxt = [-1] * g.n
    for k in dec.tau_edges:
        t, h, _ = g.edges[k]
        outdeg[t] += 1
        nxt[t] = h
    if outdeg[dec.root] != 0 or np.any(np.delete(outdeg, dec.root) != 1):
        return False
    for v in range(g.n):
        seen = 0
        while v != dec.root:
            v = nxt[v]
            seen += 1
            if v < 0 or seen > g.n:
                return False
    return True


# ---------------------------------------------------------------------------
# structural report


@dataclass
class StructureReport:
    n: int
    m: int
    rank_graph_laplacian: int
    null_edge_laplacian: int
    null_aw: int
    out_degree: list
    checks: dict

    @property
    def all_satisfied(self):
        return all(v for v in self.checks.values() if v is not None)


def _has_identical_columns(A):
    cols = {tuple(col) for col in A.T}
    return len(cols) < A.shape[1]


def ones_in_range(A):
    """Whether ``1_n`` lies in the column space of ``A`` (solved, not assumed)."""
    gram = A @ A.T
    try:
        y = numerics.solve_linear(gram, np.ones(A.shape[0]))
    except Exception:
        return False
    x = A.T @ y
    return bool(np.max(np.abs(A @ x - 1.0)) < 1e-9)


def structure_report(g, weights=None, zero_tol=1e-8):
    """Ranks and nullities of the Laplacian family plus structural checks.

    Every entry of ``checks`` is True/False, or None when the check's
    hypothesis does not hold for ``g``.
    """
    inc = build_incidence(g, weights)
    Lg = graph_laplacian(inc)
    Le = edge_laplacian(inc)
    AW = inc.A @ inc.W
    reach = reachability(g)
    outdeg = g.out_degree()
    r = int(np.sum(outdeg >= 1))
    rank_lg = numerics.rank(Lg)
    n_le = numerics.null_space_orthonormal(Le)
    n_aw = numerics.null_space_orthonormal(AW)
    dim_le, dim_aw = n_le.shape[1], n_aw.shape[1]
    null_a = numerics.null_space_orthonormal(inc.A).shape[1]
    scale = max(1.0, float(np.max(np.abs(Le))) if Le.size else 1.0)

    checks = {}
    contained = bool(n_aw.size == 0 or np.max(np.abs(Le @ n_aw)) < 1e-9 * scale)
    if reach.is_weakly_connected:
        if np.any(outdeg == 0):
            checks["null_aw_in_null_le"] = contained and dim_le == dim_aw
        else:
            checks["null_aw_in_null_le"] = contained and ones_in_range(inc.A) and dim_le > dim_aw
    else:
        checks["null_aw_in_null_le"] = contained
    ident = _has_identical_columns(inc.A)
    checks["identical_columns_iff_branching"] = ident == bool(np.any(outdeg > 1)) == (null_a > 0)
    checks["edge_nullity_lower_bound"] = dim_le >= g.m - r
    if len(reach.globally_reachable) > 1:
        checks["multi_root_out_degrees"] = bool(np.all(outdeg >= 1)) and ones_in_range(inc.A)
    else:
        checks["multi_root_out_degrees"] = None

    if reach.has_in_branching:
        ev_g = numerics.eigenvalues(Lg)
        ev_e = numerics.eigenvalues(Le)
        zs = zero_tol * max(1.0, float(np.max(np.abs(Lg))))
        zero_g = np.abs(ev_g) < zs
        checks["spectrum_closed_rhp"] = bool(np.all(ev_g.real >= -1e-9) and np.sum(zero_g) == 1)
        nz_g = np.sort_complex(ev_g[~zero_g])
        nz_e = np.sort_complex(ev_e[np.abs(ev_e) >= zs])
        checks["shared_nonzero_spectrum"] = bool(nz_g.shape == nz_e.shape and (nz_g.size == 0 or multiset_close(nz_g, nz_e, 1e-8)))
        alg = int(np.sum(np.abs(ev_e) < zs))
        checks["zero_eigen_multiplicity"] = rank_lg == g.n - 1 and dim_le == g.m - g.n + 1 and alg == g.m - g.n + 1
    else:
        checks["spectrum_closed_rhp"] = checks["shared_nonzero_spectrum"] = checks["zero_eigen_multiplicity"] = None

    return StructureReport(
        n=g.n,
        m=g.m,
        rank_graph_laplacian=rank_lg,
        null_edge_laplacian=dim_le,
        null_aw=dim_aw,
        out_degree=[int(d) for d in outdeg],
        checks=checks,
    )


def multiset_close(a, b, tol):
    """Greedy matching of two complex multisets; True when every pair is within ``tol`` (relative to 1 + |x|)."""
    remaining = list(b)
    for x in a:
        d = [abs(x - y) for y in remaining]
        j = int(np.argmin(d))
        if d[j] > tol * (1 + abs(x)):
            return False
        remaining.pop(j)
    return True


