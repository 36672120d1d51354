"""Heisenberg group arithmetic, Koranyi and M_p quasi-norms, and snowflake samples.

Points of H_n are stored as ``(x, y, t)`` with ``z = x + i y``; complex
arithmetic is done on the real pairs.  The product is

    (w, s) * (z, t) = (w + z, s + t + 2 sum_j Im(w_j conj(z_j))).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionMismatch, KernelNotPSD, MTooLarge, ThetaNonpositive, ValidationError
from .metric import from_points, estimate_doubling

GRAM_RTOL = 1e-8
LATTICE_BUDGET = 50_000_000


@dataclass(frozen=True)
class HeisPoint:
    x: tuple
    y: tuple
    t: float

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise DimensionMismatch("real and imaginary parts differ in length")

    @classmethod
    def from_complex(cls, z, t):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return cls(tuple(float(a) for a in z.real), tuple(float(b) for b in z.imag), float(t))

    @classmethod
    def identity(cls, n: int = 1):
        return cls((0.0,) * n, (0.0,) * n, 0.0)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def z(self) -> np.ndarray:
        return np.array(self.x) + 1j * np.array(self.y)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.t]])

    @classmethod
    def from_array(cls, row):
        row = np.asarray(row, dtype=float)
        n = (len(row) - 1) // 2
        return cls(tuple(row[:n]), tuple(row[n : 2 * n]), float(row[-1]))

    def __mul__(self, other):
        return group_mul(self, other)


def _symplectic(wx, wy, zx, zy):
    # Im(w conj(z)) = wy zx - wx zy, summed over coordinates
    return np.sum(wy * zx - wx * zy, axis=-1)


def group_mul(p: HeisPoint, q: HeisPoint) -> HeisPoint:
    if p.n != q.n:
        raise DimensionMismatch(f"cannot multiply points of H_{p.n} and H_{q.n}")
    px, py, qx, qy = (np.array(a) for a in (p.x, p.y, q.x, q.y))
    t = p.t + q.t + 2 * float(_symplectic(px, py, qx, qy))
    return HeisPoint(tuple(px + qx), tuple(py + qy), t)


def group_inv(p: HeisPoint) -> HeisPoint:
    return HeisPoint(tuple(-a for a in p.x), tuple(-b for b in p.y), -p.t)


def koranyi(p: HeisPoint) -> float:
    z2 = sum(a * a for a in p.x) + sum(b * b for b in p.y)
    return (z2 * z2 + p.t * p.t) ** 0.25


def _koranyi_parts(z2, t):
    return np.power(z2 * z2 + t * t, 0.25)


def _mp_parts(z2, t, p):
    r2 = np.sqrt(z2 * z2 + t * t)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.clip(np.where(r2 > 0, z2 / r2, 1.0), -1.0, 1.0)
    ang = np.cos(0.5 * p * np.arccos(c))
    return np.sqrt(r2) * np.power(ang, 1.0 / p)


def _check_p(p):
    if not (1 <= p < 2):
        raise ValidationError(f"p must lie in [1, 2), got {p}")


def mp_norm(point: HeisPoint, p: float) -> float:
    """M_p quasi-norm; 0 at the identity by continuity."""
    _check_p(p)
    z2 = sum(a * a for a in point.x) + sum(b * b for b in point.y)
    return float(_mp_parts(np.float64(z2), np.float64(point.t), p))


def dilate(point: HeisPoint, theta: float) -> HeisPoint:
    if not theta > 0:
        raise ThetaNonpositive(f"dilation factor must be positive, got {theta}")
    return HeisPoint(
        tuple(theta * a for a in point.x),
        tuple(theta * b for b in point.y),
        theta * theta * point.t,
    )


# Vectorized forms on arrays of shape (m, 2n+1)


def _split(P):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[1] % 2 != 1:
        raise ValidationError(f"Heisenberg points must be rows of length 2n+1, got shape {P.shape}")
    n = (P.shape[1] - 1) // 2
    return P[:, :n], P[:, n : 2 * n], P[:, -1]


def koranyi_array(P) -> np.ndarray:
    x, y, t = _split(P)
    return _koranyi_parts((x**2).sum(1) + (y**2).sum(1), t)


def mp_array(P, p: float) -> np.ndarray:
    _check_p(p)
    x, y, t = _split(P)
    return _mp_parts((x**2).sum(1) + (y**2).sum(1), t, p)


def _pairwise_quotients(P):
    """|z|^2 and t of h^{-1} g for all ordered pairs (g, h) of rows."""
    x, y, t = _split(P)
    dx = x[:, None, :] - x[None, :, :]
    dy = y[:, None, :] - y[None, :, :]
    # h^{-1} g = (z_g - z_h, t_g - t_h - 2 Im(z_h conj(z_g)))
    cross = _symplectic(x[None, :, :], y[None, :, :], x[:, None, :], y[:, None, :])
    dt = t[:, None] - t[None, :] - 2 * cross
    return (dx**2).sum(-1) + (dy**2).sum(-1), dt


def koranyi_distances(P) -> np.ndarray:
    z2, dt = _pairwise_quotients(P)
    D = _koranyi_parts(z2, dt)
    np.fill_diagonal(D, 0.0)
    return D


def mp_distances(P, p: float) -> np.ndarray:
    _check_p(p)
    z2, dt = _pairwise_quotients(P)
    D = _mp_parts(z2, dt, p)
    np.fill_diagonal(D, 0.0)
    return D


def random_sample(m: int, n: int = 1, seed: int = 0, box: float = 1.0) -> np.ndarray:
    """``m`` random points of H_n as rows ``(x_1..x_n, y_1..y_n, t)``.

    Coordinates of z are uniform on ``[-box, box]``; t is uniform on
    ``[-box**2, box**2]`` so both parts contribute at the same homogeneity.
    """
    rng = np.random.default_rng(seed)
    zpart = rng.uniform(-box, box, size=(m, 2 * n))
    t = rng.uniform(-box * box, box * box, size=(m, 1))
    return np.hstack([zpart, t])


@dataclass(frozen=True, eq=False)
class HeisSample:
    points: np.ndarray
    epsilon: float

    @property
    def p(self) -> float:
        return 2 * (1 - self.epsilon)

    @property
    def d_N0(self) -> np.ndarray:
        return koranyi_distances(self.points)

    @property
    def d_Mp(self) -> np.ndarray:
        return mp_distances(self.points, self.p)


@dataclass
class SampleEmbedding:
    coords: np.ndarray
    eigenvalues: np.ndarray
    kernel_min_eig: float
    kernel_trace: float
    ratios: np.ndarray  # condensed, upper triangle order
    max_distance_error: float

    @property
    def ratio_min(self):
        return float(self.ratios.min())

    @property
    def ratio_max(self):
        return float(self.ratios.max())


def gram_factor(sq_dist: np.ndarray, base: int = 0, rtol: float = GRAM_RTOL):
    """Euclidean points realizing ``sq_dist`` (squared distances) exactly.

    Builds G_xy = (D_0x + D_0y - D_xy) / 2 about ``base``; a negative eigenvalue
    below ``-rtol * trace`` raises :class:`KernelNotPSD`.  Smaller negative
    eigenvalues are rounding noise and are zeroed.
    """
    D = np.asarray(sq_dist, dtype=float)
    G = 0.5 * (D[base][:, None] + D[base][None, :] - D)
    G = 0.5 * (G + G.T)
    w, V = np.linalg.eigh(G)
    trace = float(np.trace(G))
    tol = rtol * abs(trace)
    if w[0] < -tol:
        raise KernelNotPSD(float(w[0]), tol, V[:, 0])
    w_clamped = np.where(w < 0, 0.0, w)
    return V * np.sqrt(w_clamped)[None, :], w, trace


def sample_embed(sample: HeisSample, rtol: float = GRAM_RTOL) -> SampleEmbedding:
    """Embed a finite sample so that distances equal d_{M_p}^{p/2}, p = 2(1 - eps)."""
    eps = sample.epsilon
    if not (0 < eps <= 0.5):
        raise ValidationError(f"epsilon must lie in (0, 1/2], got {eps}")
    m = len(sample.points)
    if m < 2:
        raise ValidationError("a sample needs at least 2 points")
    p = sample.p
    dM = sample.d_Mp
    dN = sample.d_N0
    iu, ju = np.triu_indices(m, k=1)
    if np.any(dN[iu, ju] == 0):
        raise ValidationError("sample points must be distinct")
    coords, w, trace = gram_factor(dM**p, rtol=rtol)
    emb = np.linalg.norm(coords[iu] - coords[ju], axis=1)
    target = dM[iu, ju] ** (p / 2)
    return SampleEmbedding(
        coords=coords,
        eigenvalues=w,
        kernel_min_eig=float(w[0]),
        kernel_trace=trace,
        ratios=emb / dN[iu, ju] ** (1 - eps),
        max_distance_error=float(np.abs(emb - target).max()),
    )


def image_doubling(embedding: SampleEmbedding, budget: Optional[int] = None) -> float:
    return estimate_doubling(from_points(embedding.coords), budget).K_est


def _lattice_box(m: int) -> int:
    return (2 * m + 1) ** 2 * (2 * m * m + 1)


@dataclass(frozen=True, eq=False)
class LatticeBall:
    m: int
    members: np.ndarray  # rows (u, v, t)

    def __len__(self):
        return len(self.members)


def lattice_ball(m: int) -> LatticeBall:
    """Integer points (u + iv, t) of H_1 with Koranyi norm at most m."""
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m}")
    m = int(m)
    if _lattice_box(m) > LATTICE_BUDGET:
        raise MTooLarge(f"m = {m} needs {_lattice_box(m)} candidate points")
    r = np.arange(-m, m + 1)
    u, v = np.meshgrid(r, r, indexing="ij")
    z2 = (u * u + v * v).ravel()
    keep = z2 * z2 <= m**4
    u, v, z2 = u.ravel()[keep], v.ravel()[keep], z2[keep]
    rows = []
    for a, b, q in zip(u, v, z2):
        tmax = math.isqrt(m**4 - q * q)
        ts = np.arange(-tmax, tmax + 1)
        rows.append(np.column_stack([np.full_like(ts, a), np.full_like(ts, b), ts]))
    return LatticeBall(m=m, members=np.vstack(rows))


def lower_bound_series(epsilon: float, m: int) -> float:
    """sqrt(sum_{k=1}^{m^2} k^-(1+eps)), summed with compensation."""
    if not (0 < epsilon < 0.5):
        raise ValidationError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if int(m) != m or m < 1:
        raise ValidationError(f"m must be a positive integer, got {m}")
    k = np.arange(1, int(m) ** 2 + 1, dtype=float)
    return math.sqrt(math.fsum(np.power(k, -(1 + epsilon))))
