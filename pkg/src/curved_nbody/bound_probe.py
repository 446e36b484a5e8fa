"""Empirical probes of the uniform lower bound on pairwise distances.

``scan_bound`` multi-starts the equilibrium solver and records the
smallest pairwise distance among the distinct solutions found.
``blowup_diagnostic`` and ``shrink_family_probe`` evaluate, for a body
cluster collapsing onto body 0, both sides of the norm identity obtained
by rotating body 0 to e1 and dropping the first coordinate; the cluster
side grows like d^-4 while the other side stays bounded.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .dynamics import BodySystem, check_singular, pair_denominators
from .equilibria import REProblem, dedup, solve_re
from .errors import InvalidArgumentError
from .geometry import random_sphere_point

START_SEPARATION = 1e-4


@dataclass
class BoundScanResult:
    problem: REProblem
    seed: int
    n_starts: int
    n_converged: int
    solutions: list
    min_distances: list
    empirical_c: float | None
    empirical_c_by_label: dict = field(default_factory=dict)
    flagged: str | None = None


def start_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def random_start(problem: REProblem, rng: np.random.Generator) -> np.ndarray:
    while True:
        Q = np.vstack([random_sphere_point(problem.k, rng).coords for _ in range(problem.n)])
        if problem.n < 2:
            return Q
        den = pair_denominators(Q, 1)
        if den[np.triu_indices(problem.n, 1)].min() >= START_SEPARATION:
            return Q


def _solve_start(args):
    problem, seed, index, tol, max_iter = args
    Q0 = random_start(problem, start_rng(seed, index))
    return solve_re(problem, Q0, tol=tol, max_iter=max_iter)


def scan_bound(
    problem: REProblem,
    n_starts: int,
    seed: int,
    tol: float = 1e-13,
    max_iter: int = 200,
    match_tol: float = 1e-6,
    workers: int = 1,
) -> BoundScanResult:
    """Multi-start search for relative equilibria and their minimum spacing.

    Start ``i`` draws from the substream ``(seed, i)``, so results do not
    depend on ``workers``.
    """
    if n_starts < 1:
        raise InvalidArgumentError("n_starts must be >= 1")
    jobs = [(problem, seed, i, tol, max_iter) for i in range(n_starts)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(_solve_start, jobs, chunksize=max(1, n_starts // (4 * workers))))
    else:
        sols = [_solve_start(j) for j in jobs]
    converged = [s for s in sols if s.converged]
    reps = dedup(converged, problem, match_tol)
    if problem.n < 2:
        return BoundScanResult(
            problem, seed, n_starts, len(converged), reps, [None] * len(reps), None,
            {}, "no pairs: n < 2",
        )
    dists = [s.min_distance() for s in reps]
    by_label = {}
    for s, d in zip(reps, dists):
        by_label[s.classification] = min(d, by_label.get(s.classification, math.inf))
    c = min(dists) if dists else None
    flag = None if dists else "no converged starts"
    return BoundScanResult(problem, seed, n_starts, len(converged), reps, dists, c, by_label, flag)


def frame_rotation(q0) -> np.ndarray:
    """Proper rotation R with R @ q0 = e1.

    Householder reflection onto e1 followed by negating the last row,
    which keeps e1 fixed and flips the determinant to +1.
    """
    q0 = np.asarray(q0, dtype=float)
    k = q0.size
    e1 = np.zeros(k)
    e1[0] = 1.0
    v = q0 - e1
    vv = v @ v
    if vv < 1e-30:
        return np.eye(k)
    R = np.eye(k) - 2.0 * np.outer(v, v) / vv
    R[-1] *= -1.0
    return R


@dataclass
class BlowupDiagnostic:
    cluster: tuple
    frame: np.ndarray
    V: np.ndarray  # rows R @ Q_j
    W: np.ndarray
    lhs_value: float
    rhs_value: float
    rhs_lower_half: float
    cos_alphas: dict

    @property
    def V_first(self):
        return self.V[:, 0]

    @property
    def V_hat(self):
        return self.V[:, 1:]

    @property
    def w_norm(self) -> float:
        return float(np.linalg.norm(self.W))

    @property
    def min_cos_alpha(self) -> float:
        # the double sums include i == j, where the cosine is 1
        return min([1.0, *self.cos_alphas.values()])


def blowup_diagnostic(problem: REProblem, config: BodySystem, cluster) -> BlowupDiagnostic:
    """Both sides of the truncated norm identity for body 0 and ``cluster``.

    ``cluster`` is a set of 0-based body indices that must contain 0. The
    identity lhs == rhs holds on exact equilibria only; the diagnostic is
    defined on any nonsingular configuration.
    """
    cluster = tuple(sorted(set(int(c) for c in cluster)))
    if 0 not in cluster:
        raise InvalidArgumentError("cluster must contain body 0")
    if cluster[-1] >= config.n:
        raise InvalidArgumentError("cluster index out of range")
    Q, m = config.positions, config.masses
    check_singular(Q, 1)
    R = frame_rotation(Q[0])
    V = Q @ R.T
    V[0] = 0.0
    V[0, 0] = 1.0
    Vh = V[:, 1:]
    # |V_hat_j|^2 equals 1 - V_j1^2 on the sphere and avoids cancellation
    s = np.einsum("ij,ij->i", Vh, Vh)
    W = -(R @ (problem.rates_sq * Q[0]))[1:]
    inner = [j for j in cluster if j != 0]
    outer = [j for j in range(config.n) if j not in cluster]
    out_sum = sum((m[j] * Vh[j] / s[j] ** 1.5 for j in outer), np.zeros(config.k - 1))
    lhs_vec = W - out_sum
    lhs = float(lhs_vec @ lhs_vec)
    rhs = 0.0
    lower = 0.0
    cos = {}
    for i in inner:
        for j in inner:
            rhs += m[i] * m[j] * (Vh[i] @ Vh[j]) / (s[i] ** 1.5 * s[j] ** 1.5)
            lower += m[i] * m[j] / (s[i] * s[j])
            if i < j:
                cos[(i, j)] = float((Vh[i] @ Vh[j]) / math.sqrt(s[i] * s[j]))
    return BlowupDiagnostic(cluster, R, V, W, lhs, float(rhs), 0.5 * float(lower), cos)


def _slerp(a, b, s):
    theta = math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b)) * 2
    if theta < 1e-15:
        return b.copy()
    out = (math.sin((1 - s) * theta) * a + math.sin(s * theta) * b) / math.sin(theta)
    return out / np.linalg.norm(out)


def _cluster_diameter(Q, cluster):
    pts = Q[list(cluster)]
    d = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    return float(d.max())


def contract_cluster(config: BodySystem, cluster, d: float) -> BodySystem:
    """Slide cluster bodies along geodesics toward body 0 until the
    cluster's chordal diameter equals ``d``."""
    Q = config.positions
    base = _cluster_diameter(Q, cluster)
    if not 0 < d <= base:
        raise InvalidArgumentError(f"d must lie in (0, {base:.6g}]")

    def shrunk(s):
        P = Q.copy()
        for j in cluster:
            if j != 0:
                P[j] = _slerp(Q[0], Q[j], s)
        return P

    if d == base:
        return config
    s = brentq(lambda s: _cluster_diameter(shrunk(s), cluster) - d, 0.0, 1.0, xtol=1e-16, rtol=1e-15)
    return config.with_positions(shrunk(s))


@dataclass
class ProbeRow:
    d: float
    lhs_value: float
    rhs_value: float
    rhs_lower_half: float
    min_cos_alpha: float
    w_norm: float


@dataclass
class ProbeTable:
    rows: list
    w_bound: float

    def loglog_slope(self) -> float:
        """Least-squares slope of log(rhs_lower_half) against log(d)."""
        x = np.log([r.d for r in self.rows])
        y = np.log([r.rhs_lower_half for r in self.rows])
        return float(np.polyfit(x, y, 1)[0])


def shrink_family_probe(problem: REProblem, base: BodySystem, cluster, d_values) -> ProbeTable:
    d_values = [float(d) for d in d_values]
    if not d_values or any(d <= 0 for d in d_values):
        raise InvalidArgumentError("d_values must be positive")
    if any(b >= a for a, b in zip(d_values, d_values[1:])):
        raise InvalidArgumentError("d_values must be strictly decreasing")
    rows = []
    for d in d_values:
        diag = blowup_diagnostic(problem, contract_cluster(base, cluster, d), cluster)
        rows.append(
            ProbeRow(d, diag.lhs_value, diag.rhs_value, diag.rhs_lower_half, diag.min_cos_alpha, diag.w_norm)
        )
    return ProbeTable(rows, float(problem.rates_sq.max()))
