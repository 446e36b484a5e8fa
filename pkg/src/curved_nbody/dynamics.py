"""Equations of motion on the curved spaces and a projected RK5(4) integrator."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SingularityError, StiffnessError
from .geometry import RotationSpec, SpacePoint, project_to_space, rotation_generator

EPS_SING = 1e-12
TANGENCY_TOL = 1e-10


def _metric(k, sigma):
    eta = np.ones(k)
    eta[-1] = sigma
    return eta


class BodySystem:
    """Masses together with positions on a common space.

    ``positions`` is stored as an (n, k) array whose rows satisfy the
    manifold constraint; ``points`` gives them back as ``SpacePoint``s.
    """

    def __init__(self, masses, positions, sigma: int = 1):
        masses = np.array(masses, dtype=float).reshape(-1)
        if masses.size < 1:
            raise InvalidArgumentError("need at least one body")
        if not np.all(np.isfinite(masses)) or np.any(masses <= 0):
            raise InvalidArgumentError("masses must be positive")
        pts = [p if isinstance(p, SpacePoint) else SpacePoint(p, sigma) for p in positions]
        if len(pts) != masses.size:
            raise InvalidArgumentError(
                f"{masses.size} masses but {len(pts)} positions"
            )
        if any(p.sigma != sigma for p in pts) or len({p.k for p in pts}) != 1:
            raise InvalidArgumentError("all positions must share k and sigma")
        Q = np.vstack([p.coords for p in pts])
        self.masses = masses
        self.positions = Q
        self.sigma = sigma
        self.masses.setflags(write=False)
        self.positions.setflags(write=False)
        den = pair_denominators(Q, sigma)
        if np.any(den[np.triu_indices(len(Q), 1)] <= 0):
            i, j = _worst_pair(den)
            raise InvalidArgumentError(f"bodies {i} and {j} coincide or are antipodal")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def k(self) -> int:
        return self.positions.shape[1]

    @property
    def points(self):
        return [SpacePoint(q, self.sigma) for q in self.positions]

    def with_positions(self, positions) -> "BodySystem":
        return BodySystem(self.masses, positions, self.sigma)

    def __repr__(self):
        return f"BodySystem(n={self.n}, k={self.k}, sigma={self.sigma})"


@dataclass
class PhaseState:
    system: BodySystem
    velocities: np.ndarray

    def __post_init__(self):
        V = np.array(self.velocities, dtype=float)
        if V.shape != self.system.positions.shape:
            raise InvalidArgumentError(
                f"velocities have shape {V.shape}, expected {self.system.positions.shape}"
            )
        eta = _metric(self.system.k, self.system.sigma)
        radial = np.einsum("ik,k,ik->i", self.system.positions, eta, V)
        if np.max(np.abs(radial)) > TANGENCY_TOL:
            raise InvalidArgumentError(
                f"velocities are not tangent (max |<q, v>| = {np.max(np.abs(radial)):.3e})"
            )
        self.velocities = V


def pair_gram(Q, sigma):
    """Matrix of sigma-inner products between all rows of Q."""
    return (Q * _metric(Q.shape[1], sigma)) @ Q.T


def one_minus_gram_sq(Q, sigma):
    """``sigma - sigma * <q_i, q_j>^2`` for all pairs, diagonal set to inf.

    On the sphere this is computed as (|q_i - q_j|^2 / 2)(|q_i + q_j|^2 / 2),
    which avoids the cancellation in 1 - c^2 for close or antipodal pairs.
    """
    if sigma == 1:
        diff = Q[:, None, :] - Q[None, :, :]
        summ = Q[:, None, :] + Q[None, :, :]
        s = 0.25 * np.einsum("ijk,ijk->ij", diff, diff) * np.einsum("ijk,ijk->ij", summ, summ)
    else:
        C = pair_gram(Q, sigma)
        s = C ** 2 - 1.0
    np.fill_diagonal(s, np.inf)
    return s


def pair_denominators(Q, sigma):
    s = one_minus_gram_sq(Q, sigma)
    return np.where(s > 0, np.abs(s) ** 1.5, np.minimum(s, 0.0))


def _worst_pair(den):
    n = den.shape[0]
    iu = np.triu_indices(n, 1)
    w = np.argmin(den[iu])
    return int(iu[0][w]), int(iu[1][w])


def check_singular(Q, sigma, eps=EPS_SING, den=None):
    if den is None:
        den = pair_denominators(Q, sigma)
    if Q.shape[0] < 2:
        return den
    i, j = _worst_pair(den)
    if den[i, j] < eps:
        c = sigma_dot(Q[i], Q[j], sigma)
        kind = "collision" if sigma * c > 0 else "antipodal"
        raise SingularityError(i, j, float(den[i, j]), kind)
    return den


def sigma_dot(x, y, sigma):
    return float(x[:-1] @ y[:-1] + sigma * x[-1] * y[-1])


def gravity_terms(Q, masses, sigma, eps=EPS_SING):
    """Sum over j != i of m_j (q_j - sigma <q_i,q_j> q_i) / den_ij."""
    den = check_singular(Q, sigma, eps)
    C = pair_gram(Q, sigma)
    W = masses[None, :] / den  # diagonal is m/inf = 0
    return W @ Q - sigma * (W * C).sum(axis=1)[:, None] * Q


def acceleration_array(Q, V, masses, sigma, eps=EPS_SING):
    eta = _metric(Q.shape[1], sigma)
    speed2 = np.einsum("ik,k,ik->i", V, eta, V)
    return gravity_terms(Q, masses, sigma, eps) - sigma * speed2[:, None] * Q


def acceleration(state: PhaseState) -> np.ndarray:
    """Right-hand side of the curved equations of motion, one row per body."""
    s = state.system
    return acceleration_array(s.positions, state.velocities, s.masses, s.sigma)


def tangent_velocity(config: BodySystem, spec: RotationSpec) -> np.ndarray:
    """Initial velocities G Q_i of the rigidly rotating solution."""
    if config.sigma != 1:
        raise InvalidArgumentError("rotating solutions are built on the sphere only")
    if spec.dim != config.k:
        raise InvalidArgumentError(f"spec dim {spec.dim} does not match k={config.k}")
    return config.positions @ rotation_generator(spec).T


def min_pairwise_distance(config) -> float:
    """Smallest chordal distance between two bodies.

    Accepts a ``BodySystem`` or a plain sequence of sphere points; the
    latter may contain coincident or antipodal pairs, which a
    ``BodySystem`` rejects.
    """
    if isinstance(config, BodySystem):
        if config.sigma != 1:
            raise InvalidArgumentError("chordal distances are defined on the sphere only")
        Q = config.positions
    else:
        pts = [p if isinstance(p, SpacePoint) else SpacePoint(p, 1) for p in config]
        if any(p.sigma != 1 for p in pts):
            raise InvalidArgumentError("chordal distances are defined on the sphere only")
        Q = np.vstack([p.coords for p in pts]) if pts else np.zeros((0, 2))
    n = Q.shape[0]
    if n < 2:
        raise InvalidArgumentError("need at least two bodies")
    d = np.linalg.norm(Q[:, None, :] - Q[None, :, :], axis=-1)
    return float(d[np.triu_indices(n, 1)].min())


@dataclass
class Trajectory:
    """Accepted integrator samples.

    ``positions`` and ``velocities`` have shape (samples, n, k).
    ``drift`` is the post-projection constraint error per sample and
    ``raw_drift`` the error each RK step produced before projection.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    sigma: int
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    raw_drift: np.ndarray = field(default_factory=lambda: np.zeros(0))
    rejected: int = 0

    def __len__(self):
        return len(self.times)

    def state(self, idx: int) -> PhaseState:
        return PhaseState(
            BodySystem(self.masses, self.positions[idx], self.sigma), self.velocities[idx]
        )

    @property
    def final(self) -> PhaseState:
        return self.state(-1)


# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array(
    [5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


def _constraint_error(Q, sigma):
    eta = _metric(Q.shape[1], sigma)
    return float(np.max(np.abs(np.einsum("ik,k,ik->i", Q, eta, Q) - sigma)))


def _project(Q, V, sigma):
    Q = np.vstack([project_to_space(q, sigma) for q in Q])
    eta = _metric(Q.shape[1], sigma)
    radial = np.einsum("ik,k,ik->i", Q, eta, V)
    V = V - sigma * radial[:, None] * Q
    return Q, V


def integrate(
    initial: PhaseState,
    t_end: float,
    tol: float = 1e-9,
    max_step: float | None = None,
    spec: RotationSpec | None = None,
    eps_sing: float = EPS_SING,
) -> Trajectory:
    """Integrate from t=0 to ``t_end`` with Dormand-Prince 5(4).

    After every accepted step positions are pushed back onto the manifold
    and velocities made tangent again. ``max_step`` defaults to a
    thousandth of the rotation period when ``spec`` has nonzero rates,
    otherwise to ``t_end / 1000``.

    Raises ``SingularityError`` or ``StiffnessError`` with the partial
    trajectory attached as ``.trajectory``.
    """
    if not (1e-13 <= tol <= 1e-3):
        raise InvalidArgumentError(f"tol must lie in [1e-13, 1e-3], got {tol}")
    if not t_end > 0:
        raise InvalidArgumentError("t_end must be positive")
    sysm = initial.system
    sigma, masses = sysm.sigma, sysm.masses
    if max_step is None:
        period = spec.period() if spec is not None else None
        max_step = (period if period is not None else t_end) / 1000

    def rhs(y):
        Q, V = y[0], y[1]
        return np.stack([V, acceleration_array(Q, V, masses, sigma, eps_sing)])

    y = np.stack([sysm.positions.copy(), initial.velocities.copy()])
    times, Qs, Vs, steps, drift, raw = [0.0], [y[0].copy()], [y[1].copy()], [], [0.0], [0.0]
    drift[0] = _constraint_error(y[0], sigma)
    raw[0] = drift[0]
    rejected = 0

    def partial():
        return Trajectory(
            np.array(times), np.array(Qs), np.array(Vs), masses, sigma,
            np.array(steps), np.array(drift), np.array(raw), rejected,
        )

    t = 0.0
    h = min(max_step, t_end)
    try:
        f0 = rhs(y)
        while t < t_end:
            last = t + h >= t_end - 1e-3 * h
            if last:
                h = t_end - t
            if h < 1e-14 * max(1.0, abs(t)):
                raise StiffnessError(f"step size underflow at t={t:.6g}", partial())
            K = [f0]
            for s in range(1, 7):
                ys = y + h * sum(a * K[j] for j, a in enumerate(_A[s]) if a != 0)
                K.append(rhs(ys))
            y5 = y + h * sum(b * K[j] for j, b in enumerate(_B5) if b != 0)
            errv = h * sum(e * K[j] for j, e in enumerate(_E))
            scale = tol + tol * np.maximum(np.abs(y), np.abs(y5))
            err = float(np.max(np.abs(errv) / scale))
            if err <= 1.0:
                t = t_end if last else t + h
                raw.append(_constraint_error(y5[0], sigma))
                Q, V = _project(y5[0], y5[1], sigma)
                y = np.stack([Q, V])
                check_singular(Q, sigma, eps_sing)
                times.append(t)
                Qs.append(Q.copy())
                Vs.append(V.copy())
                steps.append(h)
                drift.append(_constraint_error(Q, sigma))
                f0 = rhs(y)
                fac = 5.0 if err == 0 else min(5.0, 0.9 * err ** -0.2)
            else:
                rejected += 1
                fac = max(0.2, 0.9 * err ** -0.2)
            h = min(max_step, h * fac)
    except SingularityError as exc:
        exc.trajectory = partial()
        raise
    return partial()
