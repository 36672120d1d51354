"""Acceptance criteria, one test per criterion, each at its stated tolerance and time limit.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""
import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

from snowflake_embed.audit import llr_bound
from snowflake_embed.cli import main as cli_main
from snowflake_embed.embedder import (
    certify,
    derive_params,
    event_G_sizes,
    holder_check,
    measure_distortion,
    sample_embedding,
)
from snowflake_embed.exceptions import DegenerateImage
from snowflake_embed.heisenberg import (
    HeisPoint,
    HeisSample,
    group_inv,
    koranyi,
    koranyi_array,
    lower_bound_series,
    mp_array,
    random_sample,
    sample_embed,
)
from snowflake_embed.metric import estimate_doubling, from_points, validate_metric
from snowflake_embed.partitions import RadiusDistribution, padding_audit

from conftest import CYCLE4, grid_points, record_criterion


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_c01_density_normalization():
    worst = 0.0
    with Timer() as t:
        for K, s in itertools.product((2, 4, 16), (0.5, 1, 2)):
            law = RadiusDistribution(s, K)
            total, _ = integrate.quad(lambda r: float(law.pdf(r)), s / 4, s / 2, epsabs=1e-13, epsrel=1e-13)
            worst = max(worst, abs(total - 1))
    ok = worst < 1e-9 and t.elapsed < 1
    assert record_criterion(1, ok, f"max |integral - 1| = {worst:.2e} (< 1e-9), {t.elapsed:.2f}s (< 1s)")


def test_c02_radius_sampler_ks():
    with Timer() as t:
        law = RadiusDistribution(1.0, 4.0)
        draws = law.sample(np.random.default_rng(0), 100_000)
        D = stats.kstest(draws, lambda r: law.cdf(r)).statistic
    ok = D < 0.02 and t.elapsed < 5
    assert record_criterion(2, ok, f"KS statistic {D:.4f} (< 0.02), {t.elapsed:.2f}s (< 5s)")


def test_c03_padding_grid16():
    with Timer() as t:
        grid = from_points(grid_points(16))
        rep = padding_audit(grid, 4 / grid.scale_factor, K=None, beta=1 / 64, trials=10_000, seed=0)
    sigma = math.sqrt(rep.bound * (1 - rep.bound) / rep.trials)
    ok = rep.holds and t.elapsed < 60
    assert record_criterion(
        3,
        ok,
        f"K_est={rep.K:g}, min empirical {rep.empirical:.4f} >= floor {rep.bound:.4f} - 3*{sigma:.4f}, "
        f"{t.elapsed:.1f}s (< 60s)",
    )


def test_c04_holder_zero_violations():
    grid = from_points(grid_points(8))
    violations = checked = 0
    with Timer() as t:
        K = estimate_doubling(grid).K_est
        for eps in (0.1, 0.25, 0.4):
            p = derive_params(K, eps, d_min=grid.d_min)
            for seed in range(100):
                rep = holder_check(sample_embedding(grid, p, seed), strict=False)
                violations += rep.violations
                checked += rep.checked
    ok = violations == 0 and t.elapsed < 120
    assert record_criterion(
        4, ok, f"{violations} violations in {checked} pair-scale-coordinate checks, {t.elapsed:.1f}s (< 120s)"
    )


def test_c05_dimension_independent_of_epsilon():
    with Timer() as t:
        Ns = [derive_params(4, eps, 0.5, c=8).N for eps in (0.05, 0.1, 0.2, 0.3, 0.4)]
    ok = len(set(Ns)) == 1 and t.elapsed < 1
    assert record_criterion(5, ok, f"N = {Ns} at K=4, theta=0.5, c=8, {t.elapsed:.3f}s (< 1s)")


def _certification_sweep(space, eps=0.25, seeds=50):
    K = estimate_doubling(space).K_est
    p = derive_params(K, eps, d_min=space.d_min)
    certified = g_ok = finite = 0
    for seed in range(seeds):
        result, rep = certify(space, p, seed, budget=10_000)
        if not rep.certified:
            continue
        certified += 1
        g_ok += bool(np.all(2 * event_G_sizes(result, rep.events) >= p.N))
        try:
            finite += bool(np.isfinite(measure_distortion(result).distortion))
        except DegenerateImage:
            pass
    return certified, g_ok, finite


def test_c06_certification(random50):
    with Timer() as t:
        sweeps = {
            "4-cycle": _certification_sweep(validate_metric(CYCLE4)),
            "50-point random": _certification_sweep(random50),
        }
    ok = t.elapsed < 600
    parts = []
    for name, (cert, g_ok, finite) in sweeps.items():
        ok &= cert >= 45 and g_ok == cert and finite == cert
        parts.append(f"{name}: {cert}/50 certified, G passed {g_ok}, finite {finite}")
    assert record_criterion(6, ok, "; ".join(parts) + f"; {t.elapsed:.1f}s (< 600s)")


def test_c07_distortion_trend():
    theta = 0.5
    grid = from_points(grid_points(8))
    K = estimate_doubling(grid).K_est
    N = derive_params(K, 0.25, theta).N
    epsilons = (0.4, 0.2, 0.1)
    measured = {}
    with Timer() as t:
        for eps in epsilons:
            p = derive_params(K, eps, theta, d_min=grid.d_min, dimension_override=N)
            values = []
            for seed in range(10):
                result, rep = certify(grid, p, seed)
                if rep.certified:
                    try:
                        values.append(measure_distortion(result).distortion)
                    except DegenerateImage:
                        values.append(math.inf)
            measured[eps] = float(np.median(values)) if values else math.inf
    x = np.log([1 / e for e in epsilons])
    y = np.log([measured[e] for e in epsilons])
    logC = float(np.mean(y - (1 + theta) * x))
    curve = {e: math.exp(logC) * (1 / e) ** (1 + theta) for e in epsilons}
    free_slope = float(np.polyfit(x, y, 1)[0]) if np.all(np.isfinite(y)) else math.inf
    ok = all(measured[e] <= 10 * curve[e] for e in epsilons) and t.elapsed < 600
    detail = ", ".join(f"eps={e}: D={measured[e]:.3g} vs 10*fit={10 * curve[e]:.3g}" for e in epsilons)
    assert record_criterion(7, ok, f"N={N}; {detail}; free log-slope {free_slope:.2f}; {t.elapsed:.1f}s (< 600s)")


def test_c08_heisenberg_exactness():
    with Timer() as t:
        a = HeisPoint.from_complex(1, 0)
        b = HeisPoint.from_complex(1j, 0)
        c = a * b * group_inv(a) * group_inv(b)
        exact = c == HeisPoint((0.0,), (0.0,), -4.0) and koranyi(HeisPoint.from_complex(0, -4)) == 2.0
        bad = 0
        for p in (1.0, 1.5, 1.9):
            P = np.random.default_rng(int(10 * p)).uniform(-3, 3, size=(100_000, 3))
            N0, Mp = koranyi_array(P), mp_array(P, p)
            bad += int(np.sum(Mp > N0 + 1e-12) + np.sum(math.sqrt(1 - p / 2) * N0 > Mp + 1e-12))
    ok = exact and bad == 0 and t.elapsed < 30
    assert record_criterion(
        8, ok, f"commutator {c.as_array().tolist()}, N0(0,-4) exact: {exact}, sandwich violations {bad}, {t.elapsed:.2f}s"
    )


def test_c09_heisenberg_sample():
    eps = 0.25
    with Timer() as t:
        emb = sample_embed(HeisSample(random_sample(64, 1, seed=0), eps))
    floor = eps ** ((1 - eps) / 2)
    ok = (
        emb.kernel_min_eig >= -1e-8 * emb.kernel_trace
        and emb.max_distance_error <= 1e-8
        and emb.ratio_min >= floor - 1e-9
        and emb.ratio_max <= 1 + 1e-9
        and t.elapsed < 30
    )
    assert record_criterion(
        9,
        ok,
        f"min eig {emb.kernel_min_eig:.2e} (trace {emb.kernel_trace:.3g}), distance error {emb.max_distance_error:.1e}, "
        f"ratios [{emb.ratio_min:.4f}, {emb.ratio_max:.6f}] within [{floor:.4f}, 1], {t.elapsed:.2f}s",
    )


def _c2_by_sdp(d):
    """Least Euclidean distortion of a finite metric: minimize D^2 over Gram matrices."""
    import cvxpy as cp

    n = len(d)
    G = cp.Variable((n, n), PSD=True)
    t = cp.Variable()
    cons = []
    for i, j in itertools.combinations(range(n), 2):
        sq = G[i, i] + G[j, j] - 2 * G[i, j]
        cons += [sq >= d[i][j] ** 2, sq <= t * d[i][j] ** 2]
    cp.Problem(cp.Minimize(t), cons).solve()
    return math.sqrt(t.value)


def test_c10_llr_cycle4():
    with Timer() as t:
        v = np.array([1.0, -1.0, 1.0, -1.0])
        bound = llr_bound(validate_metric(CYCLE4), None, np.outer(v, v)).bound
        oracle = _c2_by_sdp(np.array(CYCLE4, dtype=float))
    ok = abs(bound - math.sqrt(2)) < 1e-9 and abs(bound - oracle) < 1e-3 and t.elapsed < 60
    assert record_criterion(10, ok, f"certificate {bound:.12f}, SDP c_2 oracle {oracle:.9f}, {t.elapsed:.2f}s (< 60s)")


def test_c11_lower_bound_series():
    import mpmath

    with Timer() as t:
        value = lower_bound_series(0.1, 1000)
        mpmath.mp.dps = 30
        reference = float(mpmath.sqrt(mpmath.zeta(1.1) - mpmath.zeta(1.1, 1000**2 + 1)))
        trend = [lower_bound_series(e, 1000) for e in (0.4, 0.3, 0.2, 0.1, 0.05)]
    rel = abs(value / reference - 1)
    increasing = all(a < b for a, b in zip(trend, trend[1:]))
    ok = rel < 0.01 and increasing and t.elapsed < 10
    assert record_criterion(
        11, ok, f"series {value:.10f} vs high-precision {reference:.10f} (rel {rel:.1e}), increasing as eps falls: {increasing}"
    )


def _cli_artifacts(tmp, tag, threads, inputs):
    """Run every subcommand once; return {name: bytes} of everything written."""
    out = {}
    runs = {
        "embed": ["embed", "--input", inputs["c4"], "--seed", "5", "--report", tmp / f"embed-{tag}.json"],
        "audit": ["audit", "--input", inputs["c4"], "--Q", inputs["q"]],
        "partition-demo": ["partition-demo", "--input", inputs["grid"], "--scale", "2", "--trials", "500", "--seed", "3"],
        "heisenberg": ["heisenberg", "--sample-size", "32", "--seed", "1", "--m", "6"],
        "net": ["net", "--input", inputs["grid"], "--delta", "1.5"],
        "doubling": ["doubling", "--input", inputs["grid"]],
    }
    for name, argv in runs.items():
        target = tmp / f"{name}-{tag}.out"
        argv = [str(a) for a in argv] + ["--out", str(target), "--threads", str(threads)]
        code = cli_main(argv)
        assert code == 0, f"{name} exited {code}"
        out[name] = target.read_bytes()
        if name == "embed":
            out["embed-report"] = (tmp / f"embed-{tag}.json").read_bytes()
    return out


def test_c12_cli_reproducible(tmp_path, capsys):
    c4 = tmp_path / "c4.csv"
    c4.write_text("\n".join(",".join(str(x) for x in row) for row in CYCLE4) + "\n")
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"points": grid_points(6).tolist()}))
    q = tmp_path / "q.json"
    q.write_text(json.dumps(np.outer([1, -1, 1, -1], [1, -1, 1, -1]).tolist()))
    inputs = {"c4": c4, "grid": grid, "q": q}
    with Timer() as t:
        runs = [_cli_artifacts(tmp_path, f"r{n}", threads, inputs) for n, threads in enumerate((1, 1, 4))]
    capsys.readouterr()
    differing = sorted(k for k in runs[0] if any(r[k] != runs[0][k] for r in runs[1:]))
    ok = not differing and t.elapsed < 300
    assert record_criterion(
        12,
        ok,
        f"{len(runs[0])} artifacts compared across runs at threads 1, 1, 4; differing: {differing or 'none'}; {t.elapsed:.1f}s",
    )
