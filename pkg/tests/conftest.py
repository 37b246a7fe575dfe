"""Shared helpers and brute-force oracles.

The oracles here deliberately avoid the package's own geometry code so that
tests compare two independent routes.
"""

import numpy as np
import pytest


def random_polygon(rng, n=None, scale=1.0, center=(0.0, 0.0)):
    """Vertices of a random convex polygon from points on a circle (CCW)."""
    n = n or int(rng.integers(3, 9))
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        if gaps.min() > 1e-3 and gaps.max() < np.pi - 1e-3:
            break
    r = scale * rng.uniform(0.5, 1.0)
    return np.column_stack([np.cos(ang), np.sin(ang)]) * r + np.asarray(center)


def brute_hull(points, eps=1e-12):
    """Extreme points by pairwise orientation: (i, j) is a hull edge when no
    point lies strictly right of it and no collinear point lies beyond it."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    n = len(pts)
    if n <= 1:
        return pts
    keep = set()
    for i in range(n):
        d = pts - pts[i]
        for j in range(n):
            if i == j:
                continue
            e = pts[j] - pts[i]
            cr = e[0] * d[:, 1] - e[1] * d[:, 0]
            scale = max(1.0, np.abs(e).max())
            if np.any(cr < -eps * scale):
                continue
            on = np.abs(cr) <= eps * scale
            t = d[on] @ e / (e @ e)
            if np.any(t < -1e-12) or np.any(t > 1 + 1e-12):
                continue
            keep.update((i, j))
    return pts[sorted(keep)]


def same_point_set(A, B, tol=1e-9):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape != B.shape:
        return False
    return (all(np.min(np.linalg.norm(B - a, axis=1)) <= tol for a in A)
            and all(np.min(np.linalg.norm(A - b, axis=1)) <= tol for b in B))


def inside_convex_ccw(poly, p, tol=1e-12):
    """Point-in-polygon for a CCW convex polygon by edge orientation."""
    poly = np.asarray(poly, dtype=float)
    q = np.roll(poly, -1, axis=0)
    e = q - poly
    d = np.asarray(p) - poly
    return bool(np.all(e[:, 0] * d[:, 1] - e[:, 1] * d[:, 0] >= -tol))


def seg_seg_distance(a, b, c, d):
    """Closed-form distance between segments ab and cd."""
    a, b, c, d = (np.asarray(v, dtype=float) for v in (a, b, c, d))

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2, o3, o4 = orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return 0.0

    def pt_seg(p, s, t):
        v = t - s
        L = v @ v
        u = 0.0 if L == 0 else min(1.0, max(0.0, (p - s) @ v / L))
        return float(np.linalg.norm(p - (s + u * v)))

    return min(pt_seg(a, c, d), pt_seg(b, c, d), pt_seg(c, a, b), pt_seg(d, a, b))


def brute_polygon_distance(P, Q):
    """Distance between convex CCW polygons by segment-pair minimisation."""
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    if len(Q) >= 3 and any(inside_convex_ccw(Q, p) for p in P):
        return 0.0
    if len(P) >= 3 and any(inside_convex_ccw(P, q) for q in Q):
        return 0.0
    best = np.inf
    for i in range(len(P)):
        a, b = P[i], P[(i + 1) % len(P)]
        for j in range(len(Q)):
            c, d = Q[j], Q[(j + 1) % len(Q)]
            best = min(best, seg_seg_distance(a, b, c, d))
    return best


def sample_in_hull(rng, V, k):
    """Random convex combinations of the rows of ``V``."""
    w = rng.dirichlet(np.ones(len(V)), size=k)
    return w @ np.asarray(V)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def learning_lp_oracle(H, m, tol=1e-10):
    """Optimal ``sum(theta) + rho`` of the set-learning LP by enumeration.

    ``m[j]`` is the largest value row ``j`` must cover.  For a fixed shift
    ``y`` the best choice is ``theta_j = max(0, m_j - h_j y)`` and
    ``rho = max_j theta_j``; feasibility is ``rho <= 1 - max_j h_j y``.  The
    resulting objective is convex piecewise linear in ``y`` over a polygon,
    so its minimum sits on a pairwise intersection of breakpoint lines.
    """
    H = np.asarray(H, dtype=float)
    m = np.asarray(m, dtype=float)
    n = len(H)
    lines = []  # (a, c): a . y = c
    for j in range(n):
        lines.append((H[j], m[j]))
        lines.append((H[j], 1.0))
        for i in range(n):
            if i != j:
                lines.append((H[j] - H[i], m[j] - m[i]))
                lines.append((H[i] - H[j], 1.0 - m[j]))
                lines.append((H[i] - H[j], 0.0))
    best = np.inf
    for a in range(len(lines)):
        for b in range(a + 1, len(lines)):
            M = np.array([lines[a][0], lines[b][0]])
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            y = np.linalg.solve(M, [lines[a][1], lines[b][1]])
            hy = H @ y
            theta = np.maximum(0.0, m - hy)
            rho = theta.max()
            if rho <= 1.0 - hy.max() + tol:
                best = min(best, theta.sum() + rho)
    return best


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE = {}


def record_acceptance(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def monte_carlo_30():
    """The n=30 reach-avoid comparison, run once per session on every
    available core."""
    import os
    import time

    from reachplan import sim

    workers = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count()
    scn = sim.load_scenario("reach_avoid")
    t = time.perf_counter()
    _, rows = sim.monte_carlo(scn, 30, workers=workers or 1)
    return rows, time.perf_counter() - t, workers or 1
