"""Points on the constant-curvature spaces and the block rotation family.

The space of curvature sign ``sigma`` is the set of ``x`` in R^k with
``x_1^2 + ... + x_{k-1}^2 + sigma * x_k^2 = sigma``: the unit sphere for
``sigma = +1`` and the upper sheet of a hyperboloid for ``sigma = -1``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, UnsupportedMetricError

CONSTRAINT_TOL = 1e-12
RENORMALIZE_TOL = 1e-6


def sigma_inner(x, y, sigma: int = 1) -> float:
    """The sigma-inner product: Euclidean in all but the last slot."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] < 2:
        raise InvalidArgumentError(
            f"sigma_inner needs two vectors of equal length >= 2, got {x.shape} and {y.shape}"
        )
    _check_sigma(sigma)
    return float(x[:-1] @ y[:-1] + sigma * x[-1] * y[-1])


def _check_sigma(sigma):
    if sigma not in (1, -1):
        raise InvalidArgumentError(f"sigma must be +1 or -1, got {sigma!r}")


def project_to_space(x, sigma: int = 1) -> np.ndarray:
    """Radially rescale ``x`` onto the space of curvature sign ``sigma``."""
    x = np.array(x, dtype=float)
    if sigma == 1:
        return x / np.linalg.norm(x)
    q = x[:-1] @ x[:-1] - x[-1] ** 2
    if q >= 0:
        raise InvalidArgumentError("vector is not timelike; cannot project to hyperboloid")
    x = x / np.sqrt(-q)
    if x[-1] < 0:
        x = -x
    return x


@dataclass(frozen=True)
class SpacePoint:
    """A point of the sphere (sigma=+1) or hyperboloid (sigma=-1).

    Small constraint violations (below 1e-6) are repaired by radial
    renormalization; larger ones are rejected.
    """

    coords: np.ndarray
    sigma: int = 1

    def __post_init__(self):
        _check_sigma(self.sigma)
        x = np.array(self.coords, dtype=float).reshape(-1)
        if x.shape[0] < 2:
            raise InvalidArgumentError("points need k >= 2 coordinates")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("non-finite coordinates")
        if self.sigma == -1 and x[-1] <= 0:
            raise InvalidArgumentError("hyperboloid points must have x_k > 0")
        violation = abs(sigma_inner(x, x, self.sigma) - self.sigma)
        if violation > RENORMALIZE_TOL:
            raise InvalidArgumentError(
                f"point violates the manifold constraint by {violation:.3e}"
            )
        if violation > CONSTRAINT_TOL:
            x = project_to_space(x, self.sigma)
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @property
    def k(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class RotationSpec:
    """Angular rates ``A_1..A_p`` acting on R^dim, dim = 2p or 2p+1."""

    rates: tuple
    dim: int

    def __post_init__(self):
        rates = tuple(float(a) for a in self.rates)
        p = len(rates)
        if p < 1:
            raise InvalidArgumentError("need at least one rate")
        if self.dim not in (2 * p, 2 * p + 1):
            raise InvalidArgumentError(
                f"dim must be {2 * p} or {2 * p + 1} for {p} rates, got {self.dim}"
            )
        if not all(np.isfinite(rates)):
            raise InvalidArgumentError("rates must be finite")
        object.__setattr__(self, "rates", rates)

    @classmethod
    def for_dim(cls, rates, k: int) -> "RotationSpec":
        return cls(tuple(rates), int(k))

    @property
    def p(self) -> int:
        return len(self.rates)

    def period(self):
        """Fundamental period 2*pi / max|A_l|, or None if all rates vanish."""
        top = max(abs(a) for a in self.rates)
        return None if top == 0 else 2 * np.pi / top


def rotation_at(spec: RotationSpec, t: float) -> np.ndarray:
    R = np.eye(spec.dim)
    for l, a in enumerate(spec.rates):
        c, s = np.cos(a * t), np.sin(a * t)
        i = 2 * l
        R[i, i], R[i, i + 1] = c, -s
        R[i + 1, i], R[i + 1, i + 1] = s, c
    return R


def rate_matrix(spec: RotationSpec) -> np.ndarray:
    """Diagonal matrix diag(A_1, A_1, ..., A_p, A_p[, 0])."""
    d = np.zeros(spec.dim)
    d[: 2 * spec.p] = np.repeat(spec.rates, 2)
    return np.diag(d)


def rotation_generator(spec: RotationSpec) -> np.ndarray:
    """Derivative of ``rotation_at`` at t=0.

    Each block is ``A_l * [[0, -1], [1, 0]]``; the square of the result is
    minus the square of ``rate_matrix``.
    """
    G = np.zeros((spec.dim, spec.dim))
    for l, a in enumerate(spec.rates):
        i = 2 * l
        G[i, i + 1] = -a
        G[i + 1, i] = a
    return G


def chordal_distance(x: SpacePoint, y: SpacePoint) -> float:
    if x.sigma != 1 or y.sigma != 1:
        raise UnsupportedMetricError("chordal distance is defined on the sphere only")
    if x.k != y.k:
        raise InvalidArgumentError("points live in different dimensions")
    return float(np.linalg.norm(x.coords - y.coords))


def geodesic_distance(x: SpacePoint, y: SpacePoint) -> float:
    """Great-circle angle between two sphere points (reporting only)."""
    if x.sigma != 1 or y.sigma != 1:
        raise UnsupportedMetricError("geodesic distance is reported on the sphere only")
    # atan2 form stays accurate for nearly equal and nearly antipodal points
    return float(
        2 * np.arctan2(np.linalg.norm(x.coords - y.coords), np.linalg.norm(x.coords + y.coords))
    )


def random_sphere_point(k: int, rng: np.random.Generator) -> SpacePoint:
    """Uniform point on S^{k-1} from normalized standard normal draws."""
    if k < 2:
        raise InvalidArgumentError("k must be >= 2")
    while True:
        v = rng.standard_normal(k)
        r = np.linalg.norm(v)
        if r > 1e-12:
            return SpacePoint(v / r, 1)
