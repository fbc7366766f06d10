"""Random weighted digraphs for self-tests and property checks."""
import os

import numpy as np

from .graph import digraph

SEED_ENV = "EDGEMARGIN_SEED"


def default_rng(seed=None):
    if seed is None:
        env = os.environ.get(SEED_ENV)
        seed = int(env) if env not in (None, "") else None
    return np.random.default_rng(seed)


def _weights(rng, k, low, high):
    return rng.uniform(low, high, size=k)


def _relabel(rng, n, edges):
    perm = rng.permutation(n)
    return [(int(perm[t]), int(perm[h]), w) for t, h, w in edges]


def random_dag(rng, n, m_max=None, low=0.1, high=3.0):
    """Acyclic digraph whose unique globally reachable node is its only sink."""
    m_max = 2 * n if m_max is None else m_max
    pairs = set()
    for i in range(n - 1):
        pairs.add((i, int(rng.integers(i + 1, n))))
    candidates = [(i, j) for i in range(n - 1) for j in range(i + 1, n) if (i, j) not in pairs]
    extra = max(0, min(len(candidates), m_max - len(pairs)))
    if extra:
        k = int(rng.integers(0, extra + 1))
        for idx in rng.choice(len(candidates), size=k, replace=False):
            pairs.add(candidates[idx])
    pairs = sorted(pairs)
    w = _weights(rng, len(pairs), low, high)
    edges = [(i, j, float(x)) for (i, j), x in zip(pairs, w)]
    return digraph(n, _relabel(rng, n, edges))


def random_cycle(rng, n, low=0.1, high=3.0):
    w = _weights(rng, n, low, high)
    return digraph(n, [(i, (i + 1) % n, float(w[i])) for i in range(n)])


def random_with_branching(rng, n, m_max=None, low=0.1, high=3.0):
    """Random in-branching towards a random root, plus random extra edges in any direction."""
    m_max = 2 * n if m_max is None else m_max
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        child = int(order[k])
        parent = int(order[rng.integers(0, k)])
        pairs.add((child, parent))
    candidates = [(i, j) for i in range(n) for j in range(n) if i != j and (i, j) not in pairs]
    extra = max(0, min(len(candidates), m_max - len(pairs)))
    if extra:
        k = int(rng.integers(0, extra + 1))
        for idx in rng.choice(len(candidates), size=k, replace=False):
            pairs.add(candidates[idx])
    pairs = sorted(pairs)
    w = _weights(rng, len(pairs), low, high)
    return digraph(n, [(i, j, float(x)) for (i, j), x in zip(pairs, w)])


def random_multi_root(rng, n, m_max=None, low=0.1, high=3.0):
    """Digraph with at least two globally reachable nodes (a directed cycle among them)."""
    m_max = 2 * n if m_max is None else m_max
    k = int(rng.integers(2, n + 1))
    order = [int(v) for v in rng.permutation(n)]
    core = order[:k]
    pairs = {(core[i], core[(i + 1) % k]) for i in range(k)}
    for idx in range(k, n):
        pairs.add((order[idx], order[int(rng.integers(0, idx))]))
    candidates = [(i, j) for i in range(n) for j in range(n) if i != j and (i, j) not in pairs]
    extra = max(0, min(len(candidates), m_max - len(pairs)))
    if extra:
        c = int(rng.integers(0, extra + 1))
        for idx in rng.choice(len(candidates), size=c, replace=False):
            pairs.add(candidates[idx])
    pairs = sorted(pairs)
    w = _weights(rng, len(pairs), low, high)
    return digraph(n, [(i, j, float(x)) for (i, j), x in zip(pairs, w)])


KINDS = ("dag", "cycle", "general", "multi_root")


def random_graph(rng, kind=None, n_range=(3, 8), m_max=16, low=0.1, high=3.0):
    kind = KINDS[int(rng.integers(0, len(KINDS)))] if kind is None else kind
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    if kind == "dag":
        return random_dag(rng, n, m_max, low, high)
    if kind == "cycle":
        return random_cycle(rng, n, low, high)
    if kind == "general":
        return random_with_branching(rng, n, m_max, low, high)
    if kind == "multi_root":
        return random_multi_root(rng, n, m_max, low, high)
    raise ValueError(f"unknown graph kind {kind!r}")
