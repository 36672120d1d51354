"""Single-scale random partitions carved from balls of random radius.

Radii follow a truncated exponential law on ``[s/4, s/2]`` whose density is
proportional to ``K**(-16 r / s)``.  Carving a net with such radii yields an
``s``-bounded partition whose padding probability is controlled by ``K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import BetaOutOfRange, InvalidUniform, UncoveredPoint, ValidationError
from .metric import FiniteMetricSpace, Net, greedy_net, resolve_doubling

BETA_MAX = 1 / 40


@dataclass(frozen=True)
class RadiusDistribution:
    s: float
    K: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValidationError(f"scale must be positive, got {self.s}")
        if not self.K > 1:
            raise ValidationError(f"K must exceed 1, got {self.K}")

    @property
    def support(self):
        return self.s / 4, self.s / 2

    @property
    def _norm(self):
        # K^8 / (K^4 - 1), written to stay finite for large K
        return 1.0 / (self.K**-4 - self.K**-8)

    def pdf(self, r):
        r = np.asarray(r, dtype=float)
        K, s = self.K, self.s
        coef = 16 * math.log(K) / s * self._norm
        inside = (r >= s / 4) & (r <= s / 2)
        return np.where(inside, coef * np.power(K, -16 * r / s), 0.0)

    def cdf(self, r):
        r = np.clip(np.asarray(r, dtype=float), self.s / 4, self.s / 2)
        K, s = self.K, self.s
        return self._norm * (K**-4 - np.power(K, -16 * r / s))

    def interval_mass(self, lo, hi):
        """Pr[lo <= R < hi] (zero when the interval is empty)."""
        if hi <= lo:
            return 0.0
        return float(max(self.cdf(hi) - self.cdf(lo), 0.0))

    def sample(self, rng: np.random.Generator, size=None):
        return sample_radius(self, rng.random(size))


def sample_radius(dist: RadiusDistribution, u):
    """Inverse-CDF transform of uniform ``u`` in [0, 1] to a radius in [s/4, s/2]."""
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)) or np.any(np.isnan(u_arr)):
        raise InvalidUniform(f"uniform variates must lie in [0, 1], got {u!r}")
    K, s = dist.K, dist.s
    lo, hi = K**-4.0, K**-8.0
    r = -(s / (16 * math.log(K))) * np.log(lo - u_arr * (lo - hi))
    r = np.clip(r, s / 4, s / 2)
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True, eq=False)
class Partition:
    """Ball-carved partition.

    ``clusters[c]`` lists the members of cluster ``c``; clusters appear in carve
    order.  ``winner[y]`` is the position (in carve order) of the ball that
    claimed ``y``.
    """

    centers: np.ndarray
    radii: np.ndarray
    winner: np.ndarray
    assignment: np.ndarray
    clusters: tuple

    def cluster_of(self, y: int) -> np.ndarray:
        return self.clusters[self.assignment[y]]

    def diameters(self, space: FiniteMetricSpace) -> np.ndarray:
        return np.array([space.dist[np.ix_(c, c)].max() for c in self.clusters])


def carve_winners(dist: np.ndarray, centers, radii) -> np.ndarray:
    """Position of the first ball containing each point; -1 when uncovered."""
    inside = dist[centers] <= np.asarray(radii)[:, None]
    winner = np.argmax(inside, axis=0)
    winner[~inside.any(axis=0)] = -1
    return winner


def build_partition(space: FiniteMetricSpace, net, radii) -> Partition:
    centers = np.asarray(net.members if isinstance(net, Net) else net, dtype=int)
    radii = np.asarray(radii, dtype=float)
    if radii.shape != centers.shape:
        raise ValidationError(f"{len(radii)} radii given for {len(centers)} net points")
    winner = carve_winners(space.dist, centers, radii)
    if np.any(winner < 0):
        raise UncoveredPoint(int(np.flatnonzero(winner < 0)[0]))
    used, assignment = np.unique(winner, return_inverse=True)
    clusters = tuple(np.flatnonzero(assignment == c) for c in range(len(used)))
    return Partition(
        centers=centers,
        radii=radii,
        winner=winner,
        assignment=assignment,
        clusters=clusters,
    )


@dataclass(frozen=True)
class LocalityEntry:
    y: int
    J: np.ndarray  # carve positions of net points within 2s of y
    winner: int
    cluster: np.ndarray


def locality_of(space: FiniteMetricSpace, s: float, net, radii, y: int) -> LocalityEntry:
    """Cluster of ``y`` recomputed from the balls within ``2 s`` of ``y`` only.

    Raises :class:`AssertionError` if the result differs from the full carve.
    """
    centers = np.asarray(net.members if isinstance(net, Net) else net, dtype=int)
    radii = np.asarray(radii, dtype=float)
    dist = space.dist
    J = np.flatnonzero(dist[y, centers] <= 2 * s)
    hits = J[dist[y, centers[J]] <= radii[J]]
    if hits.size == 0:
        raise UncoveredPoint(y)
    j = int(hits[0])
    members = dist[centers[j]] <= radii[j]
    for ell in J[J < j]:
        members &= dist[centers[ell]] > radii[ell]
    cluster = np.flatnonzero(members)

    full = build_partition(space, centers, radii)
    if not np.array_equal(cluster, full.cluster_of(y)) or full.winner[y] != j:
        raise AssertionError(f"local carve of point {y} disagrees with the full carve")
    return LocalityEntry(y=y, J=J, winner=j, cluster=cluster)


def _check_beta(beta):
    if not (0 < beta < BETA_MAX):
        raise BetaOutOfRange(f"beta must lie in (0, 1/40), got {beta}")


def padding_floor(K: float, beta: float) -> float:
    return K ** (-64 * beta)


@dataclass
class PaddingReport:
    s: float
    K: float
    K_method: str
    beta: float
    trials: int
    per_point: np.ndarray
    bound: float

    @property
    def empirical(self) -> float:
        return float(self.per_point.min())

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.per_point))

    @property
    def stderr(self) -> float:
        p = self.empirical
        return math.sqrt(p * (1 - p) / self.trials)

    @property
    def holds(self) -> bool:
        """Empirical minimum within 3 binomial standard errors of the floor or above.

        The standard error is taken at p = floor, the boundary of the claim.
        """
        sigma = math.sqrt(self.bound * (1 - self.bound) / self.trials)
        return self.empirical >= self.bound - 3 * sigma

    def to_dict(self):
        return {
            "empirical": self.empirical,
            "argmin": self.argmin,
            "bound": self.bound,
            "stderr": self.stderr,
            "holds": self.holds,
            "per_point": [float(p) for p in self.per_point],
            "scale": self.s,
            "K": self.K,
            "K_method": self.K_method,
            "beta": self.beta,
            "trials": self.trials,
        }


def padding_audit(
    space: FiniteMetricSpace,
    s: float,
    K: Optional[float] = None,
    beta: float = 1 / 64,
    trials: int = 10_000,
    seed: int = 0,
) -> PaddingReport:
    """Monte-Carlo estimate of Pr[B(y, beta s) inside P(y)] for every point y.

    Each trial carves a greedy ``s/4``-net with fresh i.i.d. radii.  ``K``
    defaults to the greedy doubling estimate of ``space``.
    """
    _check_beta(beta)
    est = resolve_doubling(space, K)
    net = greedy_net(space, s / 4)
    law = RadiusDistribution(s, est.K_est)
    rng = np.random.default_rng(seed)

    ys, zs = np.nonzero(space.dist <= beta * s)
    padded = np.zeros(space.n, dtype=np.int64)
    for _ in range(trials):
        radii = law.sample(rng, len(net))
        winner = carve_winners(space.dist, net.members, radii)
        cut = winner[ys] != winner[zs]
        bad = np.zeros(space.n, dtype=bool)
        bad[ys[cut]] = True
        padded += ~bad
    return PaddingReport(
        s=s,
        K=est.K_est,
        K_method=est.method,
        beta=beta,
        trials=trials,
        per_point=padded / trials,
        bound=padding_floor(est.K_est, beta),
    )


@dataclass(frozen=True)
class BoundarySides:
    cut: float
    meet: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.cut <= self.rhs * (1 + 1e-12) + 1e-300


def exact_boundary_sides(a: float, b: float, s: float, K: float, beta: float) -> BoundarySides:
    """Exact probabilities that B(x, R) cuts / meets a small ball.

    ``a`` and ``b`` are the least and greatest distance from the ball center
    ``x`` of R to points of the small ball ``B(y, beta s)``.
    """
    law = RadiusDistribution(s, K)
    lo = max(a, s / 4)
    cut = law.interval_mass(lo, min(b, s / 2))
    meet = law.interval_mass(lo, s / 2) if a <= s / 2 else 0.0
    rhs = (1 - K ** (-32 * beta)) * (meet + 1 / (K**4 - 1))
    return BoundarySides(cut=cut, meet=meet, rhs=rhs)


@dataclass
class BoundaryReport:
    exact: BoundarySides
    empirical_cut: float
    empirical_meet: float
    trials: int
    a: float
    b: float

    @property
    def cut_stderr(self):
        p = self.exact.cut
        return math.sqrt(p * (1 - p) / self.trials) if self.trials else 0.0

    @property
    def holds(self):
        return self.exact.holds

    def to_dict(self):
        return {
            "exact": {"cut": self.exact.cut, "meet": self.exact.meet, "rhs": self.exact.rhs},
            "empirical": {"cut": self.empirical_cut, "meet": self.empirical_meet},
            "cut_stderr": self.cut_stderr,
            "holds": self.holds,
            "trials": self.trials,
        }


def boundary_audit(
    space: FiniteMetricSpace,
    s: float,
    K: float,
    beta: float,
    x: int,
    y: int,
    trials: int = 100_000,
    seed: int = 0,
) -> BoundaryReport:
    """Compare cut/meet probabilities of B(x, R) against B(y, beta s).

    Empirical frequencies come from set membership on sampled radii; exact
    values from the closed-form radius law.
    """
    _check_beta(beta)
    small = space.ball(y, beta * s)
    d = space.dist[x, small]
    a, b = float(d.min()), float(d.max())
    rng = np.random.default_rng(seed)
    R = RadiusDistribution(s, K).sample(rng, trials)
    inside = d[None, :] <= np.atleast_1d(R)[:, None]
    meets = inside.any(axis=1)
    cuts = meets & ~inside.all(axis=1)
    return BoundaryReport(
        exact=exact_boundary_sides(a, b, s, K, beta),
        empirical_cut=float(cuts.mean()) if trials else 0.0,
        empirical_meet=float(meets.mean()) if trials else 0.0,
        trials=trials,
        a=a,
        b=b,
    )
