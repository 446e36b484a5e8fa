"""Relative equilibria on the sphere: residual, solver, verification, dedup.

A configuration Q rotated rigidly by ``rotation_at(spec, t)`` solves the
equations of motion exactly when, for every body,

    F_i = -A^2 Q_i - sum_{j != i} m_j (Q_j - <Q_i,Q_j> Q_i) / (1 - <Q_i,Q_j>^2)^{3/2}
          + |A Q_i|^2 Q_i

vanishes, with A the diagonal rate matrix.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    EPS_SING,
    BodySystem,
    PhaseState,
    gravity_terms,
    integrate,
    min_pairwise_distance,
    pair_denominators,
    tangent_velocity,
)
from .errors import InvalidArgumentError
from .geometry import RotationSpec, rate_matrix, rotation_at

NONZERO_TOL = 1e-9
STALL_WINDOW = 30


@dataclass(frozen=True)
class REProblem:
    masses: tuple
    spec: RotationSpec

    def __post_init__(self):
        masses = tuple(float(m) for m in self.masses)
        if len(masses) < 1 or any(not (m > 0) for m in masses):
            raise InvalidArgumentError("masses must be a nonempty list of positive numbers")
        object.__setattr__(self, "masses", masses)

    @property
    def n(self) -> int:
        return len(self.masses)

    @property
    def k(self) -> int:
        return self.spec.dim

    @property
    def mass_array(self):
        return np.array(self.masses)

    @property
    def rates_sq(self):
        return np.diag(rate_matrix(self.spec)) ** 2


@dataclass
class REResidual:
    """Per-body residual vectors.

    ``norm`` is the largest Euclidean norm of a single body's residual;
    ``rss`` is the root-sum-square over every component.
    """

    per_body: np.ndarray
    tangential: np.ndarray
    norm: float
    rss: float


@dataclass
class RESolution:
    configuration: BodySystem
    residual_norm: float
    classification: str
    converged: bool
    iterations: int

    def min_distance(self):
        if self.configuration.n < 2:
            return None
        return min_pairwise_distance(self.configuration)


def residual_array(Q, masses, rates_sq, eps=EPS_SING):
    AQ2 = Q * rates_sq
    speed2 = np.einsum("ik,ik->i", AQ2, Q)  # |A Q_i|^2
    return -AQ2 - gravity_terms(Q, masses, 1, eps) + speed2[:, None] * Q


def batch_residual(U, masses, rates_sq):
    """``residual_array`` over a leading batch axis; U is (B, n, k) unit rows.

    Singular pairs are not checked here.
    """
    AQ2 = U * rates_sq
    speed2 = np.einsum("bik,bik->bi", AQ2, U)
    diff = U[:, :, None, :] - U[:, None, :, :]
    summ = U[:, :, None, :] + U[:, None, :, :]
    s = 0.25 * np.einsum("bijk,bijk->bij", diff, diff) * np.einsum("bijk,bijk->bij", summ, summ)
    n = U.shape[1]
    s[:, np.arange(n), np.arange(n)] = np.inf
    Wt = masses / s ** 1.5
    C = np.einsum("bik,bjk->bij", U, U)
    grav = Wt @ U - (Wt * C).sum(axis=2)[..., None] * U
    return -AQ2 - grav + speed2[..., None] * U


def _residual_stats(F):
    return float(np.max(np.linalg.norm(F, axis=1))), float(np.linalg.norm(F))


def _check_problem(problem, config):
    if config.sigma != 1:
        raise InvalidArgumentError("relative equilibria are solved on the sphere only")
    if config.k != problem.k or config.n != problem.n:
        raise InvalidArgumentError(
            f"configuration has n={config.n}, k={config.k}; problem expects "
            f"n={problem.n}, k={problem.k}"
        )


def re_residual(problem: REProblem, config: BodySystem) -> REResidual:
    _check_problem(problem, config)
    Q = config.positions
    F = residual_array(Q, problem.mass_array, problem.rates_sq)
    radial = np.einsum("ik,ik->i", F, Q)
    norm, rss = _residual_stats(F)
    return REResidual(F, F - radial[:, None] * Q, norm, rss)


def _normalize_rows(X):
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def _min_den(Q):
    if Q.shape[0] < 2:
        return np.inf
    den = pair_denominators(Q, 1)
    return float(den[np.triu_indices(Q.shape[0], 1)].min())


def solve_re(
    problem: REProblem,
    start,
    tol: float = 1e-10,
    max_iter: int = 200,
    fd_step: float = 1e-7,
) -> RESolution:
    """Levenberg-Marquardt on [tangential residual; |Q_i|^2 - 1].

    Iterates are renormalized onto the sphere after each step and steps
    that bring a pair within the singular band are rejected. A start that
    does not converge returns its best iterate with ``converged=False``.
    """
    if not (1e-14 <= tol <= 1e-4):
        raise InvalidArgumentError(f"tol must lie in [1e-14, 1e-4], got {tol}")
    if isinstance(start, BodySystem):
        Q0 = start.positions
    else:
        Q0 = _normalize_rows(np.array(start, dtype=float))
    if Q0.shape != (problem.n, problem.k):
        raise InvalidArgumentError(f"start has shape {Q0.shape}")
    if _min_den(Q0) < EPS_SING:
        raise InvalidArgumentError("start configuration is singular")
    masses, a2 = problem.mass_array, problem.rates_sq
    n, k = Q0.shape
    size = n * k

    def augmented(X):
        # X: (B, n, k) batch of unnormalized configurations -> (B, size + n)
        U = X / np.linalg.norm(X, axis=-1, keepdims=True)
        F = batch_residual(U, masses, a2)
        F = F - np.einsum("bik,bik->bi", F, U)[..., None] * U
        return np.concatenate(
            [F.reshape(X.shape[0], -1), np.einsum("bik,bik->bi", X, X) - 1.0], axis=1
        )

    def score(Q):
        return _residual_stats(residual_array(Q, masses, a2))[0]

    probes = np.eye(size) * fd_step
    x = Q0.ravel().copy()
    r = augmented(x.reshape(1, n, k))[0]
    cost = r @ r
    best_x, best = x.copy(), score(Q0)
    lam = 1e-3
    it = 0
    history = []
    while best > tol and it < max_iter:
        it += 1
        J = ((augmented((x + probes).reshape(size, n, k)) - r) / fd_step).T
        history.append(best)
        if it > STALL_WINDOW and best > 0.5 * history[-STALL_WINDOW - 1]:
            # stuck near a least-squares minimum that is not a root
            break
        accepted = False
        while lam < 1e16:
            M = np.vstack([J, math.sqrt(lam) * np.eye(size)])
            rhs = np.concatenate([-r, np.zeros(size)])
            dx = np.linalg.lstsq(M, rhs, rcond=None)[0]
            Qn = _normalize_rows((x + dx).reshape(n, k))
            if _min_den(Qn) >= EPS_SING:
                rn = augmented(Qn[None])[0]
                cn = rn @ rn
                if cn < cost:
                    x, r, cost = Qn.ravel(), rn, cn
                    lam = max(lam / 10, 1e-15)
                    accepted = True
                    s = score(Qn)
                    if s < best:
                        best, best_x = s, x.copy()
                    break
            lam *= 10
        if not accepted:
            break
    config = BodySystem(problem.masses, best_x.reshape(n, k), 1)
    converged = best <= tol
    sol = RESolution(config, best, "", converged, it)
    sol.classification = classify(sol, problem)
    return sol


@dataclass
class OrbitReport:
    max_deviation: float
    passed: bool
    t_end: float
    max_drift: float
    samples: int


def verify_orbit(
    solution: RESolution,
    problem: REProblem,
    periods: float = 1.0,
    tol_dyn: float = 1e-6,
    tol: float = 1e-9,
) -> OrbitReport:
    """Integrate the full dynamics and compare with the rigid rotation."""
    cfg = solution.configuration
    _check_problem(problem, cfg)
    spec = problem.spec
    period = spec.period()
    t_end = periods * period if period is not None else 1.0
    V = tangent_velocity(cfg, spec)
    traj = integrate(PhaseState(cfg, V), t_end, tol=tol, spec=spec)
    dev = 0.0
    for t, Q in zip(traj.times, traj.positions):
        expected = cfg.positions @ rotation_at(spec, t).T
        dev = max(dev, float(np.max(np.linalg.norm(Q - expected, axis=1))))
    return OrbitReport(dev, dev <= tol_dyn, t_end, float(np.max(traj.drift)), len(traj))


def eigenspaces(spec: RotationSpec):
    """Coordinate index groups on which A^2 is constant."""
    a2 = np.diag(rate_matrix(spec)) ** 2
    groups = []
    for idx in range(spec.dim):
        for g in groups:
            if abs(a2[g[0]] - a2[idx]) <= 1e-12 * max(1.0, a2[idx]):
                g.append(idx)
                break
        else:
            groups.append([idx])
    return groups


def _kabsch(X, Y):
    """Rotation R (det +1) minimizing |X R^T - Y|."""
    d = X.shape[1]
    if d == 1:
        return np.eye(1)
    U, _, Vt = np.linalg.svd(Y.T @ X)
    D = np.eye(d)
    D[-1, -1] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    return U @ D @ Vt


def _mass_permutations(masses, cap=40320):
    n = len(masses)
    groups = {}
    for i, m in enumerate(masses):
        groups.setdefault(m, []).append(i)
    blocks = list(groups.values())
    total = math.prod(math.factorial(len(b)) for b in blocks)
    if total > cap:
        return [tuple(range(n))]
    perms = []
    for choice in itertools.product(*(itertools.permutations(b) for b in blocks)):
        perm = [0] * n
        for block, img in zip(blocks, choice):
            for src, dst in zip(block, img):
                perm[src] = dst
        perms.append(tuple(perm))
    return perms


def _sorted_pair_distances(Q):
    d = np.linalg.norm(Q[:, None, :] - Q[None, :, :], axis=-1)
    return np.sort(d[np.triu_indices(Q.shape[0], 1)])


def configuration_distance(problem: REProblem, Qa, Qb, perms=None, spaces=None) -> float:
    """Smallest max-per-body distance between ``Qa`` and the symmetry orbit of ``Qb``.

    The symmetries are rotations inside each eigenspace of A^2 (these
    commute with A^2 and so map solutions to solutions) and relabelings of
    equal-mass bodies.
    """
    perms = perms if perms is not None else _mass_permutations(problem.masses)
    spaces = spaces if spaces is not None else eigenspaces(problem.spec)
    best = np.inf
    for perm in perms:
        Y = Qa[list(perm)]
        aligned = np.empty_like(Qb)
        for E in spaces:
            R = _kabsch(Qb[:, E], Y[:, E])
            aligned[:, E] = Qb[:, E] @ R.T
        best = min(best, float(np.max(np.linalg.norm(aligned - Y, axis=1))))
    return best


def dedup(solutions, problem: REProblem, match_tol: float = 1e-6):
    """Keep one representative per symmetry class, in input order."""
    perms = _mass_permutations(problem.masses)
    spaces = eigenspaces(problem.spec)
    reps, keys = [], []
    for sol in solutions:
        Q = sol.configuration.positions
        key = _sorted_pair_distances(Q)
        dup = False
        for rep, rkey in zip(reps, keys):
            if key.size and np.max(np.abs(key - rkey)) > 2 * match_tol:
                continue
            if configuration_distance(
                problem, rep.configuration.positions, Q, perms, spaces
            ) <= match_tol:
                dup = True
                break
        if not dup:
            reps.append(sol)
            keys.append(key)
    return reps


def active_blocks(solution: RESolution, problem: REProblem):
    """1-based indices of blocks with a nonzero rate that move some body."""
    Q = solution.configuration.positions
    out = []
    for l, a in enumerate(problem.spec.rates):
        if abs(a) <= NONZERO_TOL:
            continue
        proj = np.linalg.norm(Q[:, 2 * l : 2 * l + 2], axis=1)
        if np.max(proj) > NONZERO_TOL:
            out.append(l + 1)
    return out


def classify(solution: RESolution, problem: REProblem) -> str:
    """Name the equilibrium by how many rotation planes actually carry motion.

    One active plane gives "positive elliptic", two give
    "positive elliptic-elliptic", and so on; none gives "fixed point".
    """
    m = len(active_blocks(solution, problem))
    if m == 0:
        return "fixed point"
    return "positive " + "-".join(["elliptic"] * m)


def solution_record(solution: RESolution, problem: REProblem) -> dict:
    return {
        "masses": list(problem.masses),
        "rates": list(problem.spec.rates),
        "k": problem.k,
        "positions": solution.configuration.positions.tolist(),
        "residual_norm": solution.residual_norm,
        "classification": solution.classification,
        "min_distance": solution.min_distance(),
    }
