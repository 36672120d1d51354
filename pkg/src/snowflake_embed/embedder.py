"""Random multi-scale embedding of a (1 - epsilon)-snowflake into R^N.

At scale ``i`` the space is carved by balls of radius in ``[s_i/4, s_i/2]``
around a fixed ``s_i/4``-net, ``s_i = tau**(i / (1 - eps))``.  Each point gets
the truncated distance to the boundary of its cluster, scaled by a uniform
shift drawn per cluster:

    f_i^k(x) = U_i^k(P(x)) * min(tau**i, 64 kappa tau**(-i eps/(1-eps) - 1) d(x, X \\ P(x)))

and ``F(x)_k = sum_i f_i^k(x) / sqrt(N)``.  The dimension ``N = ceil(c kappa /
theta)`` does not depend on ``eps``.
"""
from __future__ import annotations

import hashlib
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import (
    BudgetExhausted,
    DegenerateImage,
    EpsilonOutOfRange,
    KTooSmall,
    ThetaOutOfRange,
    UpperMinViolation,
    ValidationError,
)
from .metric import FiniteMetricSpace, Net, greedy_net
from .partitions import RadiusDistribution, carve_winners

# Relative slack when checking deterministic inequalities in floating point.
FLOAT_RTOL = 1e-12
MAX_SCALES = 200


@dataclass(frozen=True)
class SnowflakeParams:
    epsilon: float
    theta: float
    K: float
    N: int
    i_max: int
    c: float = 8.0
    c_star: float = 4096.0
    tail_tol: float = 1e-6
    d_min: float = 1.0

    @property
    def kappa(self) -> float:
        return math.log(self.K)

    @property
    def tau(self) -> float:
        return self.epsilon**self.theta / (32 * self.kappa**self.theta)

    def scale(self, i: int) -> float:
        """Partition diameter bound s_i; s_0 = 1 is the normalized diameter."""
        return self.tau ** (i / (1 - self.epsilon))

    def cert_mesh(self, i: int) -> float:
        eps = self.epsilon
        return self.tau ** ((i + 2) / (1 - eps)) * (4 * eps / (self.c_star * self.kappa)) ** (1 / (1 - eps))

    def cap(self, i: int) -> float:
        return self.tau**i

    def slope(self, i: int) -> float:
        eps = self.epsilon
        return 64 * self.kappa * self.tau ** (-i * eps / (1 - eps) - 1)

    @property
    def truncation_error(self) -> float:
        """Per-coordinate bound on the dropped scales, sum_{i > i_max} tau^i."""
        return self.tau ** (self.i_max + 1) / (1 - self.tau)

    @property
    def ceiling_form(self) -> float:
        return (self.kappa / self.epsilon) ** (1 + self.theta)

    @property
    def floor_form(self) -> float:
        return (self.epsilon / self.kappa) ** (2 * self.theta)

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "theta": self.theta,
            "K": self.K,
            "kappa": self.kappa,
            "tau": self.tau,
            "N": self.N,
            "i_max": self.i_max,
            "c": self.c,
            "c_star": self.c_star,
            "tail_tol": self.tail_tol,
            "d_min": self.d_min,
            "truncation_error": self.truncation_error,
        }


def derive_params(
    K: float,
    epsilon: float,
    theta: float = 0.5,
    c: float = 8.0,
    c_star: float = 4096.0,
    d_min: float = 1.0,
    tail_tol: float = 1e-6,
    dimension_override: Optional[int] = None,
) -> SnowflakeParams:
    if not (0 < epsilon < 0.5):
        raise EpsilonOutOfRange(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if not (0 < theta <= 1):
        # theta = 1 is admitted as the degenerate end of the dimension formula
        raise ThetaOutOfRange(f"theta must lie in (0, 1], got {theta}")
    if not K >= 2:
        raise KTooSmall(f"doubling constant must be at least 2, got {K}")
    if not c > 0 or not c_star > 0:
        raise ValidationError("constants c and c_star must be positive")
    if not (0 < tail_tol < 1):
        raise ValidationError(f"tail_tol must lie in (0, 1), got {tail_tol}")
    if not (0 < d_min <= 1):
        raise ValidationError(f"d_min of a normalized space lies in (0, 1], got {d_min}")

    kappa = math.log(K)
    if dimension_override is not None:
        if int(dimension_override) < 1:
            raise ValidationError(f"dimension must be positive, got {dimension_override}")
        N = int(dimension_override)
    else:
        N = math.ceil(c * kappa / theta)

    tau = epsilon**theta / (32 * kappa**theta)
    target = tail_tol * d_min ** (1 - epsilon)
    i_max = max(1, math.ceil(math.log(target) / math.log(tau)))
    while i_max > 1 and tau ** (i_max - 1) <= target:
        i_max -= 1
    while tau**i_max > target:
        i_max += 1
    if i_max > MAX_SCALES:
        raise ValidationError(f"{i_max} scales needed; raise tail_tol")
    return SnowflakeParams(
        epsilon=epsilon,
        theta=theta,
        K=float(K),
        N=N,
        i_max=i_max,
        c=c,
        c_star=c_star,
        tail_tol=tail_tol,
        d_min=d_min,
    )


@dataclass(frozen=True, eq=False)
class Scale:
    i: int
    s: float
    net: Net
    cert_net: Net
    pairs: np.ndarray  # (m, 2) certification pairs u < v


@dataclass(frozen=True, eq=False)
class ScaleHierarchy:
    scales: tuple

    def __getitem__(self, i) -> Scale:
        return self.scales[i - 1]

    def __iter__(self):
        return iter(self.scales)

    def __len__(self):
        return len(self.scales)

    def events(self) -> np.ndarray:
        """All certification events as rows (i, u, v), sorted."""
        rows = [np.column_stack([np.full(len(sc.pairs), sc.i), sc.pairs]) for sc in self.scales]
        rows = [r for r in rows if len(r)]
        if not rows:
            return np.empty((0, 3), dtype=int)
        return np.vstack(rows).astype(int)


def build_hierarchy(space: FiniteMetricSpace, params: SnowflakeParams) -> ScaleHierarchy:
    scales = []
    dist = space.dist
    for i in range(1, params.i_max + 1):
        s = params.scale(i)
        net = greedy_net(space, s / 4)
        cert = greedy_net(space, params.cert_mesh(i))
        sub = dist[np.ix_(cert.members, cert.members)]
        a, b = np.nonzero(np.triu((sub > s) & (sub <= 3 * params.scale(i - 1)), k=1))
        pairs = np.column_stack([cert.members[a], cert.members[b]]).astype(int)
        scales.append(Scale(i=i, s=s, net=net, cert_net=cert, pairs=pairs))
    return ScaleHierarchy(tuple(scales))


def _cluster_uniform(seed: int, i: int, k: int, members: np.ndarray) -> float:
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<qqq", seed, i, k))
    h.update(np.ascontiguousarray(members, dtype="<i8").tobytes())
    return (int.from_bytes(h.digest(), "little") >> 11) * 2.0**-53


class RandomState:
    """Radii and lazily materialized cluster shifts for one embedding.

    Radii of scale ``i`` and coordinate ``k`` come from their own generator
    stream.  The shift of cluster C at (i, k) is a hash of (seed, i, k, C),
    unless it was explicitly resampled, in which case the override is kept.
    """

    def __init__(self, seed: int, params: SnowflakeParams, hierarchy: ScaleHierarchy):
        self.seed = int(seed)
        self.radii = {}
        for sc in hierarchy:
            law = RadiusDistribution(sc.s, params.K)
            self.radii[sc.i] = np.vstack(
                [law.sample(np.random.default_rng([self.seed, 0, sc.i, k]), len(sc.net)) for k in range(params.N)]
            )
        self.overrides = {}
        self._resample_rng = np.random.default_rng([self.seed, 1])

    @staticmethod
    def cluster_key(members) -> bytes:
        return np.ascontiguousarray(members, dtype="<i8").tobytes()

    def shift(self, i: int, k: int, members) -> float:
        override = self.overrides.get((i, k, self.cluster_key(members)))
        if override is not None:
            return override
        return _cluster_uniform(self.seed, i, k, members)

    def resample_radii(self, i: int, positions, law: RadiusDistribution):
        block = self.radii[i]
        block[:, positions] = law.sample(self._resample_rng, (block.shape[0], len(positions)))

    def resample_shift(self, i: int, k: int, members):
        self.overrides[(i, k, self.cluster_key(members))] = float(self._resample_rng.random())


def basic_coordinate(dist: np.ndarray, centers, radii, cap: float, slope: float, shift):
    """One coordinate map at one scale.

    Returns ``(f, assignment, clusters)`` where ``shift(members)`` supplies the
    uniform variate of a cluster.  A point whose cluster is the whole space
    has infinite boundary distance, so its value is ``U * cap``.
    """
    winner = carve_winners(dist, centers, radii)
    if np.any(winner < 0):
        raise ValidationError("carve does not cover the space")
    used, assignment = np.unique(winner, return_inverse=True)
    clusters = [np.flatnonzero(assignment == c) for c in range(len(used))]
    same = assignment[:, None] == assignment[None, :]
    boundary = np.where(same, np.inf, dist).min(axis=1)
    U = np.array([shift(c) for c in clusters])[assignment]
    f = U * np.minimum(cap, slope * boundary)
    return f, assignment, clusters


@dataclass(eq=False)
class EmbeddingResult:
    space: FiniteMetricSpace
    params: SnowflakeParams
    hierarchy: ScaleHierarchy
    state: RandomState
    contributions: np.ndarray  # (i_max, N, n): f_i^k(x)
    assignments: np.ndarray  # (i_max, N, n): cluster id of x in P_i^k

    @property
    def partial_sums(self) -> np.ndarray:
        """(i_max, N, n) array of sum_{j <= i} f_j^k(x)."""
        return np.cumsum(self.contributions, axis=0)

    @property
    def coordinate_sums(self) -> np.ndarray:
        """(n, N) array of sum_i f_i^k(x), without the 1/sqrt(N) factor."""
        return self.contributions.sum(axis=0).T

    @property
    def F(self) -> np.ndarray:
        return self.coordinate_sums / math.sqrt(self.params.N)

    @property
    def truncation_error(self) -> float:
        return self.params.truncation_error


def _scale_coordinates(space, params, sc, state, k):
    return basic_coordinate(
        space.dist,
        sc.net.members,
        state.radii[sc.i][k],
        params.cap(sc.i),
        params.slope(sc.i),
        lambda members: state.shift(sc.i, k, members),
    )


def _fill_scale(result: EmbeddingResult, i: int, threads: int = 1):
    space, params, state = result.space, result.params, result.state
    sc = result.hierarchy[i]

    def one(k):
        return _scale_coordinates(space, params, sc, state, k)

    ks = range(params.N)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(one, ks))
    else:
        outs = [one(k) for k in ks]
    for k, (f, assignment, _) in enumerate(outs):
        result.contributions[i - 1, k] = f
        result.assignments[i - 1, k] = assignment


def sample_embedding(
    space: FiniteMetricSpace,
    params: SnowflakeParams,
    seed: int = 0,
    threads: int = 1,
    hierarchy: Optional[ScaleHierarchy] = None,
) -> EmbeddingResult:
    """Draw one random embedding F of the (1 - eps)-snowflake of ``space``."""
    if abs(space.diam - 1) > 1e-12:
        raise ValidationError("space must be normalized to diameter 1")
    if hierarchy is None:
        hierarchy = build_hierarchy(space, params)
    state = RandomState(seed, params, hierarchy)
    shape = (params.i_max, params.N, space.n)
    result = EmbeddingResult(
        space=space,
        params=params,
        hierarchy=hierarchy,
        state=state,
        contributions=np.zeros(shape),
        assignments=np.zeros(shape, dtype=int),
    )
    for sc in hierarchy:
        _fill_scale(result, sc.i, threads)
    return result


def _pair_indices(n):
    return np.triu_indices(n, k=1)


@dataclass
class HolderReport:
    checked: int
    violations: int
    worst_excess: float
    norm_bound_ok: bool
    C_emp: float
    C_pair: tuple

    def to_dict(self):
        return {
            "checked": self.checked,
            "violations": self.violations,
            "worst_excess": self.worst_excess,
            "norm_bound_ok": self.norm_bound_ok,
            "C_emp": self.C_emp,
            "C_pair": list(self.C_pair),
        }


def holder_check(result: EmbeddingResult, strict: bool = True) -> HolderReport:
    """Audit the deterministic per-scale bound on every pair, scale and coordinate.

    ``|f_i^k(x) - f_i^k(y)| <= min(tau^i, slope_i d(x, y))`` must hold
    exactly (up to float rounding).  With ``strict`` the first violation raises
    :class:`UpperMinViolation`.
    """
    params, dist = result.params, result.space.dist
    iu, ju = _pair_indices(result.space.n)
    d = dist[iu, ju]
    checked = violations = 0
    worst = 0.0
    abs_sum = np.zeros((params.N, len(iu)))
    for i in range(1, params.i_max + 1):
        f = result.contributions[i - 1]
        diff = np.abs(f[:, iu] - f[:, ju])
        bound = np.minimum(params.cap(i), params.slope(i) * d)[None, :]
        excess = diff - bound * (1 + FLOAT_RTOL)
        bad = excess > 0
        checked += diff.size
        if bad.any():
            violations += int(bad.sum())
            worst = max(worst, float(excess.max()))
            if strict:
                k, p = np.argwhere(bad)[0]
                raise UpperMinViolation((int(iu[p]), int(ju[p])), i, int(k), float(excess[k, p]))
        abs_sum += diff

    F = result.F
    norms = np.linalg.norm(F[iu] - F[ju], axis=1)
    norm_ok = bool(np.all(norms <= abs_sum.max(axis=0) * (1 + FLOAT_RTOL)))
    ratio = norms / (params.ceiling_form * d ** (1 - params.epsilon))
    p = int(np.argmax(ratio)) if len(ratio) else 0
    return HolderReport(
        checked=checked,
        violations=violations,
        worst_excess=worst,
        norm_bound_ok=norm_ok,
        C_emp=float(ratio.max()) if len(ratio) else 0.0,
        C_pair=(int(iu[p]), int(ju[p])) if len(ratio) else (),
    )


def _event_L_sizes(result: EmbeddingResult, events: np.ndarray) -> np.ndarray:
    """|L(i,u,v)|: coordinates where partial sums up to scale i differ by >= 2 tau^(i+1)."""
    if len(events) == 0:
        return np.zeros(0, dtype=int)
    S = result.partial_sums
    i, u, v = events.T
    gap = np.abs(S[i - 1, :, u] - S[i - 1, :, v])  # (m, N)
    thresh = 2 * result.params.tau ** (i + 1)
    return (gap >= thresh[:, None]).sum(axis=1)


def event_G_sizes(result: EmbeddingResult, events: np.ndarray) -> np.ndarray:
    """|G(i,u,v)|: coordinates where the full sums differ by >= tau^(i+1) / 2."""
    if len(events) == 0:
        return np.zeros(0, dtype=int)
    full = result.coordinate_sums  # (n, N)
    i, u, v = events.T
    gap = np.abs(full[u] - full[v])
    thresh = result.params.tau ** (i + 1) / 2
    return (gap >= thresh[:, None]).sum(axis=1)


def _degree_stats(space, params, hierarchy, chunk=512):
    """Degrees in the event dependency graph and their ball-count bounds."""
    dist = space.dist
    degrees, bounds = [], []
    for sc in hierarchy:
        P = sc.pairs
        m = len(P)
        if m == 0:
            continue
        cert = sc.cert_net.members
        near = dist[np.ix_(P.ravel(), cert)] <= 4 * params.scale(sc.i - 1)
        ball_sizes = near.sum(axis=1).reshape(m, 2)
        bounds.append(ball_sizes.max(axis=1) ** 2)
        deg = np.empty(m, dtype=int)
        for start in range(0, m, chunk):
            blk = P[start : start + chunk]
            close = np.zeros((len(blk), m), dtype=bool)
            for a in (0, 1):
                for b in (0, 1):
                    close |= dist[np.ix_(blk[:, a], P[:, b])] <= 4 * sc.s
            deg[start : start + len(blk)] = close.sum(axis=1) - 1  # drop the event itself
        degrees.append(deg)
    if not degrees:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    return np.concatenate(degrees), np.concatenate(bounds)


@dataclass
class CertificationReport:
    events: np.ndarray
    L_sizes: np.ndarray
    N: int
    resamples: int
    budget: int
    degrees: np.ndarray
    degree_bounds: np.ndarray
    lll_value: float

    @property
    def event_passed(self) -> np.ndarray:
        return 2 * self.L_sizes >= self.N

    @property
    def status(self) -> str:
        return "certified" if bool(np.all(self.event_passed)) else "budget-exhausted"

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if len(self.degrees) else 0

    @property
    def lll_holds(self) -> bool:
        return self.lll_value <= 1

    def to_dict(self):
        return {
            "status": self.status,
            "events": int(len(self.events)),
            "failing_events": int((~self.event_passed).sum()),
            "resamples": self.resamples,
            "budget": self.budget,
            "min_L_size": int(self.L_sizes.min()) if len(self.L_sizes) else None,
            "N": self.N,
            "degree": {
                "max": self.max_degree,
                "mean": float(self.degrees.mean()) if len(self.degrees) else 0.0,
                "within_ball_bound": bool(np.all(self.degrees <= self.degree_bounds)),
            },
            "lll": {"value": self.lll_value, "holds": self.lll_holds},
        }


def _resample_event(result: EmbeddingResult, i: int, u: int, v: int):
    """Redraw the scale-i variables that event (i, u, v) depends on."""
    space, params, state = result.space, result.params, result.state
    sc = result.hierarchy[i]
    dist = space.dist
    reach = 2 * sc.s
    near_net = np.flatnonzero((dist[u, sc.net.members] <= reach) | (dist[v, sc.net.members] <= reach))
    state.resample_radii(i, near_net, RadiusDistribution(sc.s, params.K))
    region = (dist[u] <= reach) | (dist[v] <= reach)
    for k in range(params.N):
        old = result.assignments[i - 1, k]
        touched = {RandomState.cluster_key(np.flatnonzero(old == c)) for c in np.unique(old[region])}
        f, assignment, clusters = _scale_coordinates(space, params, sc, state, k)
        for members in clusters:
            if region[members].any():
                touched.add(RandomState.cluster_key(members))
        for key in sorted(touched):
            state.overrides[(i, k, key)] = float(state._resample_rng.random())
        f, assignment, _ = _scale_coordinates(space, params, sc, state, k)
        result.contributions[i - 1, k] = f
        result.assignments[i - 1, k] = assignment


def certify(
    space: FiniteMetricSpace,
    params: SnowflakeParams,
    seed: int = 0,
    budget: int = 10_000,
    threads: int = 1,
    strict: bool = False,
):
    """Sample an embedding and resample until every event T(i,u,v) holds.

    Events are visited in (i, u, v) order; the first failing one has its
    local radii and cluster shifts redrawn.  Returns ``(result, report)``;
    with ``strict`` an exhausted budget raises :class:`BudgetExhausted`.
    """
    if budget < 0:
        raise ValidationError(f"budget must be nonnegative, got {budget}")
    result = sample_embedding(space, params, seed, threads)
    events = result.hierarchy.events()
    need = params.N
    L = _event_L_sizes(result, events)
    resamples = 0
    while len(events) and resamples < budget:
        failing = np.flatnonzero(2 * L < need)
        if failing.size == 0:
            break
        i, u, v = (int(x) for x in events[failing[0]])
        _resample_event(result, i, u, v)
        resamples += 1
        L = _event_L_sizes(result, events)

    degrees, bounds = _degree_stats(space, params, result.hierarchy)
    q = (params.epsilon / params.kappa) ** (params.theta * params.N / 2)
    d_max = int(degrees.max()) if len(degrees) else 0
    report = CertificationReport(
        events=events,
        L_sizes=L,
        N=params.N,
        resamples=resamples,
        budget=budget,
        degrees=degrees,
        degree_bounds=bounds,
        lll_value=math.e * q * (d_max + 1),
    )
    if strict and not report.certified:
        raise BudgetExhausted(result, report)
    return result, report


@dataclass
class DistortionReport:
    expansion: float
    contraction: float
    expansion_pair: tuple
    contraction_pair: tuple
    ceiling_form: float
    floor_form: float

    @property
    def distortion(self) -> float:
        return self.expansion * self.contraction

    @property
    def upper_constant(self) -> float:
        """Measured expansion relative to (log K / eps)^(1 + theta)."""
        return self.expansion / self.ceiling_form

    @property
    def lower_constant(self) -> float:
        """Measured worst lower ratio relative to (eps / log K)^(2 theta)."""
        return 1 / (self.contraction * self.floor_form)

    def to_dict(self):
        return {
            "distortion": self.distortion,
            "expansion": self.expansion,
            "contraction": self.contraction,
            "expansion_pair": list(self.expansion_pair),
            "contraction_pair": list(self.contraction_pair),
            "ceiling_form": self.ceiling_form,
            "floor_form": self.floor_form,
            "upper_constant": self.upper_constant,
            "lower_constant": self.lower_constant,
        }


def distortion_of(target: np.ndarray, image: np.ndarray) -> tuple:
    """Expansion and contraction of rows of ``image`` against distance matrix ``target``."""
    n = target.shape[0]
    iu, ju = _pair_indices(n)
    d = target[iu, ju]
    e = np.linalg.norm(image[iu] - image[ju], axis=1)
    zero = np.flatnonzero(e == 0)
    if zero.size:
        p = zero[0]
        raise DegenerateImage((int(iu[p]), int(ju[p])))
    ratio = e / d
    a, b = int(np.argmax(ratio)), int(np.argmin(ratio))
    return float(ratio[a]), float(1 / ratio[b]), (int(iu[a]), int(ju[a])), (int(iu[b]), int(ju[b]))


def measure_distortion(result: EmbeddingResult) -> DistortionReport:
    """Exact distortion of F against d^(1 - eps) over all pairs; no rescaling."""
    params = result.params
    target = result.space.dist ** (1 - params.epsilon)
    expansion, contraction, ep, cp = distortion_of(target, result.F)
    return DistortionReport(
        expansion=expansion,
        contraction=contraction,
        expansion_pair=ep,
        contraction_pair=cp,
        ceiling_form=params.ceiling_form,
        floor_form=params.floor_form,
    )
