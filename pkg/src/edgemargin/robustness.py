"""Single-edge perturbation bounds for weighted directed consensus.

Perturbing the weight of one edge by ``delta`` is modelled as a static
feedback ``u = delta * y`` around a SISO plant ``M(s)`` built from the
reduced branching-edge dynamics.  Closing the loop gives the characteristic
factor ``1 - delta * M(s)``, so a negative real-axis crossing of ``M`` at
magnitude ``|M|`` is exactly where ``delta = -1/|M|`` puts a closed-loop pole
on the imaginary axis.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, numerics
from .errors import (
    DegenerateUpdate,
    MultipleGloballyReachable,
    NoInBranching,
    NotAcyclic,
    NotSimpleCycle,
    NumericalError,
    SingularAtS,
)
from .factorization import factorize, reduced_matrix
from .graph import find_in_branching, reachability

GRID_POINTS = 2000
GRID_LOW = 1e-6
GRID_HIGH = 1e3
BISECT_RTOL = 1e-10

NYQUIST = "nyquist_gm"
DAG = "dag_closed_form"
CYCLE = "cycle_closed_form"


@dataclass(frozen=True)
class Context:
    """Everything derived once per graph: reachability, branching, factorisation."""

    g: object
    reach: object
    dec: object
    fac: object


def analyze(g, root=None):
    reach = reachability(g)
    if not reach.has_in_branching:
        raise NoInBranching("no globally reachable node: consensus analysis needs a rooted in-branching")
    dec = find_in_branching(g, root, reach)
    return Context(g, reach, dec, factorize(g, dec, reach))


# ---------------------------------------------------------------------------
# plant


@dataclass(frozen=True)
class UncertainEdgeSystem:
    a_mat: np.ndarray
    b_vec: np.ndarray
    c_vec: np.ndarray
    edge: int
    position: int
    weight: float

    def closed_loop(self, delta):
        """System matrix with the feedback ``u = delta * y`` closed."""
        return self.a_mat + delta * np.outer(self.b_vec, self.c_vec)


def build_uncertain_system(fac, edge):
    p = fac.position(edge)
    a = -reduced_matrix(fac)
    b = -(fac.E_tau.T @ fac.A[:, p])
    c = fac.R[:, p].astype(float)
    return UncertainEdgeSystem(a, b, c, edge, p, float(fac.weights[p]))


def eval_transfer(sys, s):
    """``M(s) = c (sI - a)^-1 b`` for one complex ``s``."""
    s = complex(s)
    n = sys.a_mat.shape[0]
    shifted = s * np.eye(n, dtype=complex) - sys.a_mat
    scale = max(1.0, float(np.max(np.abs(shifted))))
    x = kernels.complex_solve_vec(np.ascontiguousarray(shifted), sys.b_vec.astype(complex))
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e12 * scale * max(1.0, np.max(np.abs(sys.b_vec))):
        raise SingularAtS(f"s = {s} is (numerically) a pole of the plant")
    return complex(sys.c_vec @ x)


def frequency_response(sys, omegas):
    return kernels.freq_response(sys.a_mat, sys.b_vec, sys.c_vec, np.asarray(omegas, dtype=float))


def _bisect_imag_zero(sys, lo, hi, f_lo):
    for _ in range(200):
        if hi - lo <= BISECT_RTOL * hi:
            break
        mid = 0.5 * (lo + hi)
        f_mid = eval_transfer(sys, 1j * mid).imag
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def phase_crossovers(sys):
    """All frequencies where ``M(jw)`` lies on the negative real axis.

    ``w = 0`` is tested directly; further crossings are located by sign
    changes of ``Im M`` on a log grid and refined by bisection.
    Returns a list of ``(omega, M(j omega))`` pairs.
    """
    out = []
    m0 = eval_transfer(sys, 0.0).real
    if m0 < 0:
        out.append((0.0, complex(m0)))
    rho = numerics.spectral_radius(sys.a_mat)
    if rho == 0.0:
        return out
    omegas = np.logspace(math.log10(GRID_LOW * rho), math.log10(GRID_HIGH * rho), GRID_POINTS)
    resp = frequency_response(sys, omegas)
    im = resp.imag
    for k in range(len(omegas) - 1):
        if im[k] == 0.0:
            if resp[k].real < 0:
                out.append((float(omegas[k]), complex(resp[k])))
            continue
        if (im[k] > 0) != (im[k + 1] > 0) and im[k + 1] != 0.0:
            w = _bisect_imag_zero(sys, float(omegas[k]), float(omegas[k + 1]), im[k])
            val = eval_transfer(sys, 1j * w)
            if val.real < 0:
                out.append((w, complex(val.real)))
    return out


def gain_margin(sys):
    """``(gm, omega_pc, M(j omega_pc))``; the binding crossover has the largest ``|M|``.

    ``gm`` is ``inf`` (and the frequency ``nan``) when ``M`` never reaches
    the negative real axis.
    """
    crossings = phase_crossovers(sys)
    if not crossings:
        return math.inf, math.nan, math.nan
    omega, val = max(crossings, key=lambda c: (abs(c[1]), -c[0]))
    return 1.0 / abs(val), omega, float(val.real)


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class PerturbationBound:
    """Admissible open interval ``(delta_min, delta_max)`` for one edge."""

    edge: int
    delta_min: float
    delta_max: float
    method: str
    crossover_freq: float
    m_at_crossover: float
    details: dict = field(default_factory=dict, compare=False)

    def contains(self, delta):
        return self.delta_min < delta < self.delta_max


def nyquist_bound(fac, edge):
    sys = build_uncertain_system(fac, edge)
    gm, omega, val = gain_margin(sys)
    return PerturbationBound(edge, -gm, gm, NYQUIST, omega, val)


def _require_dag(reach):
    if not reach.is_acyclic:
        raise NotAcyclic("closed form needs an acyclic digraph")
    if len(reach.globally_reachable) != 1:
        raise MultipleGloballyReachable("closed form needs exactly one globally reachable node")


def matrix_bound(fac, edge):
    """``|(P^T R^T (R~ W R^T)^-1 R~ P)^-1|`` for a single-root digraph."""
    if fac.R_tilde is None:
        raise MultipleGloballyReachable("R~ is undefined with several globally reachable nodes")
    p = fac.position(edge)
    D = numerics.inverse(fac.R_tilde @ fac.W @ fac.R.T)
    val = fac.R[:, p] @ D @ fac.R_tilde[:, p]
    return abs(1.0 / val)


def dag_bound(g, dec, fac, edge, reach=None):
    """Acyclic closed form: the bound is the out-weight sum of the edge's tail.

    Computed from the matrix formula and from the graph, and the two must
    agree to 1e-9 (relative).
    """
    reach = reachability(g) if reach is None else reach
    _require_dag(reach)
    matrix_form = float(matrix_bound(fac, edge))
    tail = g.edges[edge][0]
    out_sum = g.out_weight_sum(tail)
    if abs(matrix_form - out_sum) > 1e-9 * max(1.0, out_sum):
        raise NumericalError(f"matrix bound {matrix_form!r} disagrees with out-weight sum {out_sum!r}")
    return PerturbationBound(
        edge,
        -out_sum,
        math.inf,
        DAG,
        0.0,
        -1.0 / out_sum,
        {"out_weight_sum": out_sum, "matrix_form": matrix_form, "parent": tail},
    )


def sherman_morrison_inverse(fac, order=None, tol=1e-12):
    """``(R~ W R^T)^-1`` built by rank-one updates, one complement edge at a time.

    Starts from ``W_tau^-1``.  ``order`` lists complement edges (input ids);
    defaults to ``dec.c_edges``.  Returns ``(D, trace)`` where each trace
    entry records the edge added, its sibling's row and the rows that changed.
    """
    if fac.R_tilde is None:
        raise MultipleGloballyReachable("R~ is undefined with several globally reachable nodes")
    n = fac.n
    D = np.diag(1.0 / fac.weights[: n - 1])
    order = fac.dec.c_edges if order is None else tuple(order)
    trace = []
    for e in order:
        p = fac.position(e)
        r = fac.R[:, p]
        rt = fac.R_tilde[:, p]
        wq = fac.weights[p]
        Drt = D @ rt
        denom = 1.0 + wq * (r @ Drt)
        if abs(denom) < tol:
            raise DegenerateUpdate(f"denominator {denom!r} while adding edge {e}")
        update = wq * np.outer(Drt, r @ D) / denom
        D = D - update
        changed = np.flatnonzero(np.any(update != 0.0, axis=1))
        trace.append(
            {
                "edge": e,
                "sibling_row": int(np.argmax(rt)),
                "changed_rows": [int(i) for i in changed],
                "changed_cols": [int(j) for j in np.flatnonzero(np.any(update != 0.0, axis=0))],
            }
        )
    return D, trace


def cycle_bound(g, edge, reach=None):
    """Simple-cycle closed form ``delta_min = -w_j - 1 / sum_{i != j} 1/w_i``.

    ``sum 1/w_i`` over the other edges is the series resistance of the path
    left after removing the edge (weights read as conductances).
    """
    reach = reachability(g) if reach is None else reach
    if not reach.is_simple_cycle:
        raise NotSimpleCycle("closed form needs a simple directed cycle")
    w = g.weights
    resistance = float(np.sum(1.0 / np.delete(w, edge)))
    wj = float(w[edge])
    delta_min = -wj - 1.0 / resistance
    return PerturbationBound(
        edge,
        delta_min,
        math.inf,
        CYCLE,
        0.0,
        -resistance / (1.0 + wj * resistance),
        {"equivalent_resistance": resistance, "min_perturbed_weight": -1.0 / resistance},
    )


@dataclass(frozen=True)
class EdgeBounds:
    """Primary bound for an edge plus the general Nyquist bound alongside it."""

    edge: int
    primary: PerturbationBound
    nyquist: PerturbationBound

    @property
    def method(self):
        return self.primary.method

    def status(self, delta):
        """``certified``, ``unstable`` or ``uncertified`` for perturbation ``delta``.

        Closed forms are two-sided facts about the sign of the reduced
        determinant, so crossing ``delta_min`` is reported unstable.  The
        Nyquist interval is symmetric and only certifies what lies inside.
        """
        if self.primary.contains(delta):
            return "certified"
        if self.primary.method != NYQUIST and delta <= self.primary.delta_min:
            return "unstable"
        return "uncertified"


def bound_for_edge(g, edge, ctx=None):
    ctx = analyze(g) if ctx is None else ctx
    nyq = nyquist_bound(ctx.fac, edge)
    if ctx.reach.is_simple_cycle:
        primary = cycle_bound(g, edge, ctx.reach)
    elif ctx.reach.is_acyclic and len(ctx.reach.globally_reachable) == 1:
        primary = dag_bound(g, ctx.dec, ctx.fac, edge, ctx.reach)
    else:
        primary = nyq
    return EdgeBounds(edge, primary, nyq)


def _sort_key(item):
    edge, bounds = item
    return (float(f"{abs(bounds.primary.delta_min):.12g}"), edge)


def rank_edges(g, ctx=None):
    """Edges ordered most vulnerable first (smallest tolerated negative perturbation)."""
    ctx = analyze(g) if ctx is None else ctx
    return sorted(((e, bound_for_edge(g, e, ctx)) for e in range(g.m)), key=_sort_key)
