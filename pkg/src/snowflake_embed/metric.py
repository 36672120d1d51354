"""Finite metric spaces, snowflakes, greedy nets and doubling estimates."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    AlphaOutOfRange,
    AsymmetricEntry,
    NegativeOrZeroOffDiagonal,
    NonzeroDiagonal,
    TooFewPoints,
    TriangleViolation,
    ValidationError,
)

# Relative slack for floating-point checks of the metric axioms.
AXIOM_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A validated finite metric space.

    ``dist`` is stored after normalization; ``scale_factor`` is the multiplier
    that recovers the input units (``raw_dist == scale_factor * dist``).
    """

    dist: np.ndarray
    scale_factor: float = 1.0
    labels: Optional[tuple] = None

    def __post_init__(self):
        self.dist.setflags(write=False)

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    @property
    def diam(self) -> float:
        return float(self.dist.max())

    @property
    def d_min(self) -> float:
        off = self.dist[~np.eye(self.n, dtype=bool)]
        return float(off.min())

    @property
    def raw_dist(self) -> np.ndarray:
        return self.dist * self.scale_factor

    def ball(self, center: int, radius: float) -> np.ndarray:
        """Indices of the closed ball B(center, radius)."""
        return np.flatnonzero(self.dist[center] <= radius)


@dataclass(frozen=True, eq=False)
class Net:
    space: FiniteMetricSpace
    mesh: float
    members: np.ndarray

    def __len__(self):
        return len(self.members)

    def is_separated(self) -> bool:
        sub = self.space.dist[np.ix_(self.members, self.members)]
        off = ~np.eye(len(self.members), dtype=bool)
        return bool(np.all(sub[off] > self.mesh))

    def is_covering(self) -> bool:
        return bool(np.all(self.space.dist[self.members].min(axis=0) <= self.mesh))


@dataclass(frozen=True)
class DoublingEstimate:
    K_est: float
    method: str  # "user-supplied" | "greedy-cover"
    samples: int = 0
    witness: Optional[tuple] = field(default=None, compare=False)


def validate_metric(matrix, labels=None, normalize: bool = True, rtol: float = AXIOM_RTOL):
    """Check the metric axioms and return a :class:`FiniteMetricSpace`.

    Axioms are checked in the order diagonal, symmetry, positivity, triangle;
    the first failure raises with the witnessing indices.  With ``normalize``
    the distances are divided by the diameter.
    """
    d = np.array(matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if n < 2:
        raise TooFewPoints(n)
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise ValidationError(f"dist[{i}][{j}] is not a finite number")

    diag = np.diag(d)
    bad = np.flatnonzero(diag != 0)
    if bad.size:
        raise NonzeroDiagonal(int(bad[0]), diag[bad[0]])

    scale = float(np.abs(d).max())
    asym = np.argwhere(np.abs(d - d.T) > rtol * scale)
    if asym.size:
        i, j = sorted(asym[0])
        raise AsymmetricEntry(int(i), int(j), d[i, j], d[j, i])
    d = 0.5 * (d + d.T)

    off = ~np.eye(n, dtype=bool)
    nonpos = np.argwhere((d <= 0) & off)
    if nonpos.size:
        i, j = nonpos[0]
        raise NegativeOrZeroOffDiagonal(int(i), int(j), d[i, j])

    tol = rtol * scale
    for i in range(n):
        # excess[j, k] = d(i,k) - d(i,j) - d(j,k)
        excess = d[i][None, :] - d[i][:, None] - d
        hits = np.argwhere(excess > tol)
        if hits.size:
            j, k = hits[0]
            raise TriangleViolation(i, int(j), int(k), float(excess[j, k]))

    if labels is not None:
        labels = tuple(labels)
        if len(labels) != n:
            raise ValidationError(f"{len(labels)} labels given for {n} points")

    factor = 1.0
    if normalize:
        factor = float(d.max())
        d = d / factor
    return FiniteMetricSpace(dist=d, scale_factor=factor, labels=labels)


def from_points(points, labels=None, normalize: bool = True) -> FiniteMetricSpace:
    """Euclidean metric of a point cloud (rows are points)."""
    X = np.asarray(points, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"points must be a 2-d array, got shape {X.shape}")
    diff = X[:, None, :] - X[None, :, :]
    return validate_metric(np.sqrt((diff**2).sum(-1)), labels=labels, normalize=normalize)


def snowflake(space: FiniteMetricSpace, alpha: float) -> FiniteMetricSpace:
    """The alpha-snowflake: every distance raised to the power ``alpha``."""
    if not (0 < alpha <= 1):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha}")
    if alpha == 1:
        return space
    return FiniteMetricSpace(
        dist=space.dist**alpha,
        scale_factor=space.scale_factor**alpha,
        labels=space.labels,
    )


def greedy_net(space: FiniteMetricSpace, delta: float, order: Optional[Sequence[int]] = None) -> Net:
    """Greedy delta-net; points are scanned in ascending index order.

    A point joins iff it is farther than ``delta`` from every current member.
    """
    if not delta > 0:
        raise ValidationError(f"net mesh must be positive, got {delta}")
    dist = space.dist
    scan = range(space.n) if order is None else order
    nearest = np.full(space.n, np.inf)
    members = []
    for i in scan:
        if nearest[i] > delta:
            members.append(i)
            np.minimum(nearest, dist[i], out=nearest)
    return Net(space=space, mesh=float(delta), members=np.array(members, dtype=int))


def greedy_cover_size(space: FiniteMetricSpace, center: int, radius: float) -> int:
    """Size of a greedy cover of B(center, radius) by balls of radius/2.

    Cover centers range over all points of the space; each step picks the
    center covering the most uncovered ball points (lowest index on ties).
    """
    dist = space.dist
    ball = np.flatnonzero(dist[center] <= radius)
    # only points within 3r/2 of the center can reach into the ball
    cands = np.flatnonzero(dist[center] <= 1.5 * radius)
    covers = dist[np.ix_(cands, ball)] <= radius / 2
    uncovered = np.ones(len(ball), dtype=bool)
    count = 0
    while uncovered.any():
        gain = covers[:, uncovered].sum(axis=1)
        best = int(np.argmax(gain))
        uncovered &= ~covers[best]
        count += 1
    return count


def dyadic_radii(space: FiniteMetricSpace) -> np.ndarray:
    """Radii diam, diam/2, ... down to the first one below d_min."""
    radii = [space.diam]
    while radii[-1] >= space.d_min:
        radii.append(radii[-1] / 2)
    return np.array(radii)


def estimate_doubling(space: FiniteMetricSpace, budget: Optional[int] = None) -> DoublingEstimate:
    """Greedy upper estimate of the doubling constant.

    Probes every (point, dyadic radius) pair, coarse radii first, until
    ``budget`` probes have been made.
    """
    best, witness, probes = 0, None, 0
    for r in dyadic_radii(space):
        for x in range(space.n):
            if budget is not None and probes >= budget:
                break
            size = greedy_cover_size(space, x, r)
            probes += 1
            if size > best:
                best, witness = size, (x, float(r))
    return DoublingEstimate(K_est=float(max(best, 2)), method="greedy-cover", samples=probes, witness=witness)


def resolve_doubling(space: FiniteMetricSpace, K: Optional[float] = None, budget: Optional[int] = None):
    if K is None:
        return estimate_doubling(space, budget)
    if not K >= 2:
        raise ValidationError(f"doubling constant must be at least 2, got {K}")
    return DoublingEstimate(K_est=float(K), method="user-supplied")


def load_space(path, normalize: bool = True) -> FiniteMetricSpace:
    """Read a distance-matrix CSV, or JSON with ``distances`` or ``points``."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"input file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        labels = doc.get("labels")
        if "distances" in doc:
            return validate_metric(doc["distances"], labels=labels, normalize=normalize)
        if "points" in doc:
            return from_points(doc["points"], labels=labels, normalize=normalize)
        raise ValidationError(f"{path}: expected a 'distances' or 'points' key")
    try:
        rows = [[float(x) for x in row] for row in csv.reader(text.splitlines()) if row]
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if len({len(r) for r in rows}) > 1:
        raise ValidationError(f"{path}: rows have unequal lengths")
    return validate_metric(rows, normalize=normalize)
