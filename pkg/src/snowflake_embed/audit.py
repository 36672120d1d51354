"""Euclidean distortion lower bounds from quadratic distance inequalities.

For a symmetric PSD matrix Q with zero row sums, every embedding of points
x_1..x_n into Hilbert space with distortion D satisfies

    sum max(q_ij, 0) d_ij^2 <= D^2 sum max(-q_ij, 0) d_ij^2,

so the square root of the ratio of the two sums is a lower bound on c_2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .embedder import distortion_of
from .exceptions import DegenerateImage, DegenerateQ, InvalidQ, ValidationError
from .metric import FiniteMetricSpace

ROW_SUM_TOL = 1e-10
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class LLRCertificate:
    Q: np.ndarray
    points: tuple
    bound: float
    numerator: float
    denominator: float

    def to_dict(self):
        return {
            "bound": self.bound,
            "points": list(self.points),
            "numerator": self.numerator,
            "denominator": self.denominator,
        }


def check_Q(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidQ(f"Q must be square, got shape {Q.shape}")
    if not np.any(Q):
        raise DegenerateQ("Q is identically zero")
    scale = np.abs(Q).max()
    if np.abs(Q - Q.T).max() > ROW_SUM_TOL * scale:
        raise InvalidQ("Q is not symmetric")
    rows = np.abs(Q.sum(axis=1))
    if rows.max() > ROW_SUM_TOL * max(scale, 1.0):
        raise InvalidQ(f"row {int(np.argmax(rows))} of Q sums to {Q.sum(axis=1)[np.argmax(rows)]:.3g}, not 0")
    sym = 0.5 * (Q + Q.T)
    lo = np.linalg.eigvalsh(sym).min()
    if lo < -PSD_RTOL * abs(np.trace(sym)):
        raise InvalidQ(f"Q is not positive semidefinite (min eigenvalue {lo:.3g})")
    return sym


def _subset(space: FiniteMetricSpace, subset: Optional[Sequence[int]]):
    idx = np.arange(space.n) if subset is None else np.asarray(subset, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= space.n):
        raise ValidationError(f"subset indices must lie in [0, {space.n})")
    if len(set(idx.tolist())) != len(idx):
        raise ValidationError("subset indices must be distinct")
    return idx


def llr_bound(space: FiniteMetricSpace, subset, Q) -> LLRCertificate:
    """Lower bound on the Euclidean distortion of ``subset`` certified by Q.

    Returns ``math.inf`` as the bound when the negative part vanishes on a
    positive numerator (no finite distortion can satisfy the inequality).
    """
    idx = _subset(space, subset)
    Q = check_Q(Q)
    if Q.shape[0] != len(idx):
        raise ValidationError(f"Q is {Q.shape[0]}x{Q.shape[0]} but the subset has {len(idx)} points")
    # raw distances: the bound is scale free, but reports stay in input units
    d2 = space.raw_dist[np.ix_(idx, idx)] ** 2
    num = float(np.sum(np.maximum(Q, 0) * d2))
    den = float(np.sum(np.maximum(-Q, 0) * d2))
    if den == 0:
        if num == 0:
            raise DegenerateQ("both sides of the inequality vanish")
        bound = math.inf
    else:
        bound = math.sqrt(num / den)
    return LLRCertificate(Q=Q, points=tuple(int(i) for i in idx), bound=bound, numerator=num, denominator=den)


@dataclass(frozen=True)
class EmbeddingCheck:
    bound: float
    distortion: float
    consistent: bool

    def to_dict(self):
        return {"bound": self.bound, "distortion": self.distortion, "consistent": self.consistent}


def llr_verify_embedding(space: FiniteMetricSpace, subset, Q, embedding, rtol: float = 1e-9) -> EmbeddingCheck:
    """Check that an embedding's measured distortion on ``subset`` is at least the certificate.

    ``embedding`` holds one row per point of ``space``.  A failed check is
    reported, not raised: it means one of the two computations is wrong.
    """
    cert = llr_bound(space, subset, Q)
    idx = np.asarray(cert.points)
    image = np.asarray(embedding, dtype=float)
    if image.shape[0] != space.n:
        raise ValidationError(f"embedding has {image.shape[0]} rows for {space.n} points")
    try:
        expansion, contraction, _, _ = distortion_of(space.dist[np.ix_(idx, idx)], image[idx])
        D = expansion * contraction
    except DegenerateImage:
        D = math.inf
    return EmbeddingCheck(bound=cert.bound, distortion=D, consistent=D >= cert.bound * (1 - rtol))
