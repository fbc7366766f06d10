"""Time-domain consensus runs and outcome classification."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels, numerics
from .errors import NumericalError
from .factorization import reduced_matrix
from .graph import build_incidence, graph_laplacian, incidence_matrices
from .robustness import analyze, frequency_response, phase_crossovers

BLOWUP = 1e6
CLUSTER_GAP = 1e-3
CONSENSUS_SPREAD = 1e-6
SPECTRAL_TOL = 1e-9
MAX_SAMPLES = 2001


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    edge_states: np.ndarray
    spread: np.ndarray
    diverged: bool
    consistency_error: float
    dt: float
    edge: int = None
    delta: float = 0.0


@dataclass
class Outcome:
    kind: str
    consensus_value: float = None
    cluster_count: int = None
    spectral_kind: str = None

    @property
    def agrees_with_spectrum(self):
        return self.spectral_kind is None or self.spectral_kind == self.kind


def _positive_real_parts(mat):
    ev = numerics.eigenvalues(mat)
    return ev.real[ev.real > SPECTRAL_TOL]


def default_step(g, edge=None, delta=0.0, ctx=None):
    """``(dt, t_end)`` defaults: ``dt = 1e-3 / rho(L_g)`` and ``t_end = 50 / slowest decay rate``.

    The decay rate is the smallest positive real part over the nominal and
    the perturbed reduced spectra, so a perturbation that slows convergence
    still gets a long enough horizon.
    """
    ctx = analyze(g) if ctx is None else ctx
    rho = numerics.spectral_radius(graph_laplacian(build_incidence(g)))
    dt = 1e-3 / rho
    rates = list(_positive_real_parts(reduced_matrix(ctx.fac)))
    rates += list(_positive_real_parts(reduced_matrix(ctx.fac, g.perturbed_weights(edge, delta))))
    rate = min(rates) if rates else 1.0
    return dt, 50.0 / rate


def simulate(g, x0, edge=None, delta=0.0, t_end=None, dt=None, ctx=None, max_samples=MAX_SAMPLES, blowup=BLOWUP):
    """Integrate ``x' = -L_g(W + delta P P^T) x`` with classical RK4.

    The branching-edge system ``x_tau' = -E_tau^T A W R^T x_tau`` is
    integrated alongside from ``x_tau(0) = E_tau^T x0``; the two pictures
    must agree to 1e-6 (relative to the state scale) at every recorded
    sample.  At most ``max_samples`` samples are kept, evenly strided.
    Integration stops once the spread exceeds ``blowup``.
    """
    ctx = analyze(g) if ctx is None else ctx
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.n,):
        raise ValueError(f"x0 must have length {g.n}")
    if dt is None or t_end is None:
        dt0, t0 = default_step(g, edge, delta, ctx)
        dt = dt0 if dt is None else dt
        t_end = t0 if t_end is None else t_end
    if dt <= 0 or t_end < dt:
        raise ValueError("need dt > 0 and t_end >= dt")
    w = g.perturbed_weights(edge, delta)
    a_node = -graph_laplacian(build_incidence(g, w))
    a_edge = -reduced_matrix(ctx.fac, w)
    E, _ = incidence_matrices(g.n, g.tails, g.heads)
    proj = E[:, list(ctx.dec.tau_edges)].T
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    stride = max(1, int(math.ceil(steps / (max(2, max_samples) - 1))))
    n_records = int(math.ceil(steps / stride)) + 1
    # shrink the step slightly so the last sample lands exactly on t_end
    dt = t_end / ((n_records - 1) * stride)
    states, edge_states, err = kernels.integrate_linear(a_node, a_edge, proj, x0, dt, n_records, stride, blowup)
    times = np.arange(states.shape[0]) * stride * dt
    spread = states.max(axis=1) - states.min(axis=1)
    diverged = bool(not np.all(np.isfinite(spread)) or spread[-1] > blowup)
    scale = 1.0 + float(np.nanmax(np.abs(states)))
    if not (err <= 1e-6 * scale):
        raise NumericalError(f"node and edge pictures drifted apart by {err!r}")
    return Trajectory(times, states, edge_states, spread, diverged, float(err), stride * dt, edge, delta)


def spectral_kind(g, edge=None, delta=0.0, ctx=None, tol=SPECTRAL_TOL):
    """Regime predicted by the perturbed reduced spectrum."""
    ctx = analyze(g) if ctx is None else ctx
    ev = numerics.eigenvalues(reduced_matrix(ctx.fac, g.perturbed_weights(edge, delta)))
    lo = float(ev.real.min()) if ev.size else 1.0
    if lo > tol:
        return "consensus"
    if lo < -tol:
        return "divergence"
    return "clustering"


def count_clusters(values, gap=CLUSTER_GAP):
    v = np.sort(np.asarray(values, dtype=float))
    return int(1 + np.sum(np.diff(v) > gap))


def classify(traj, g=None, edge=None, delta=None, ctx=None, gap=CLUSTER_GAP):
    """Label a run as consensus, clustering or divergence.

    Passing ``g`` adds the spectral prediction for the same perturbation so
    callers can compare the two.
    """
    spread = traj.spread
    tail = spread[int(0.9 * (len(spread) - 1)) :]
    s_end = float(spread[-1])
    grew = bool(np.all(np.diff(tail) >= 0) and s_end > tail[0] * (1 + 1e-6))
    if traj.diverged or not np.isfinite(s_end):
        out = Outcome("divergence")
    elif s_end < CONSENSUS_SPREAD and s_end <= tail[0]:
        out = Outcome("consensus", consensus_value=float(np.mean(traj.states[-1])))
    elif grew:
        out = Outcome("divergence")
    else:
        out = Outcome("clustering", cluster_count=count_clusters(traj.states[-1], gap))
    if g is not None:
        e = traj.edge if edge is None else edge
        d = traj.delta if delta is None else delta
        out.spectral_kind = spectral_kind(g, e, d, ctx)
    return out


@dataclass(frozen=True)
class FrequencyResponseSample:
    omega: float
    value: complex


def nyquist_samples(sys, delta, n_points=500):
    """Loop gain ``-delta * M(j w)`` on ``[1e-4 rho, 1e4 rho]`` plus ``w = 0``.

    Sign convention: the closed loop is ``1 + L(s)`` with ``L = -delta M``,
    so the critical point is ``(-1, 0)``.  Phase-crossover frequencies are
    inserted into the grid so the locus hits them exactly.
    """
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    rho = numerics.spectral_radius(sys.a_mat)
    rho = rho if rho > 0 else 1.0
    grid = np.logspace(math.log10(1e-4 * rho), math.log10(1e4 * rho), n_points)
    extra = [w for w, _ in phase_crossovers(sys) if w > 0]
    omegas = np.unique(np.concatenate([[0.0], grid, extra]))
    values = -delta * frequency_response(sys, omegas)
    return [FrequencyResponseSample(float(w), complex(v)) for w, v in zip(omegas, values)]
