"""Pure-Python/numpy reference versions of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and the same results to rounding.  ``reachplan.kernels`` picks one at import.
"""

import math

import numpy as np

ORIENT_EPS = 1e-12


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def sort_order(pts):
    """Lexicographic order with x-values closer than ``ORIENT_EPS`` treated as
    equal, so near-duplicates of one point end up adjacent."""
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    gap = np.diff(pts[order, 0]) > ORIENT_EPS
    cluster = np.concatenate([[0], np.cumsum(gap)])
    return order[np.lexsort((pts[order, 1], cluster))]


def hull_2d_indices(points):
    """Indices of the convex hull of 2-D ``points``, counter-clockwise.

    Andrew's monotone chain.  Collinear and duplicate points are dropped, so a
    segment comes back as its two endpoints and a point as one index.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    order = sort_order(pts)
    uniq = [int(order[0])]
    for k in order[1:]:
        last = pts[uniq[-1]]
        if abs(pts[k, 0] - last[0]) > ORIENT_EPS or abs(pts[k, 1] - last[1]) > ORIENT_EPS:
            uniq.append(int(k))
    if len(uniq) < 3:
        return np.asarray(uniq, dtype=np.intp)

    lower = []
    for k in uniq:
        while len(lower) >= 2 and _cross(pts[lower[-2]], pts[lower[-1]], pts[k]) <= ORIENT_EPS:
            lower.pop()
        lower.append(k)
    upper = []
    for k in reversed(uniq):
        while len(upper) >= 2 and _cross(pts[upper[-2]], pts[upper[-1]], pts[k]) <= ORIENT_EPS:
            upper.pop()
        upper.append(k)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and hull[0] == hull[1]:
        hull = hull[:1]
    return np.asarray(hull, dtype=np.intp)


def _point_segment_distance(p, a, b):
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    den = dx * dx + dy * dy
    if den <= 0.0:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / den
    t = min(1.0, max(0.0, t))
    return math.hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy)


def segment_distance(p1, p2, q1, q2):
    """Euclidean distance between closed segments [p1, p2] and [q1, q2]."""
    o1 = _cross(p1, p2, q1)
    o2 = _cross(p1, p2, q2)
    o3 = _cross(q1, q2, p1)
    o4 = _cross(q1, q2, p2)
    if o1 * o2 < 0.0 and o3 * o4 < 0.0:
        return 0.0
    return min(
        _point_segment_distance(p1, q1, q2),
        _point_segment_distance(p2, q1, q2),
        _point_segment_distance(q1, p1, p2),
        _point_segment_distance(q2, p1, p2),
    )


def _inside_ccw(poly, p):
    n = poly.shape[0]
    if n < 3:
        return False
    for i in range(n):
        if _cross(poly[i], poly[(i + 1) % n], p) < -ORIENT_EPS:
            return False
    return True


def polygon_distance(P, Q):
    """Distance between convex CCW polygons given by their vertex arrays.

    Minimum over all boundary segment pairs; zero when one contains the other.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n, m = P.shape[0], Q.shape[0]
    best = math.inf
    for i in range(n):
        a, b = P[i], P[(i + 1) % n]
        for j in range(m):
            d = segment_distance(a, b, Q[j], Q[(j + 1) % m])
            if d < best:
                best = d
    if best > 0.0 and (_inside_ccw(Q, P[0]) or _inside_ccw(P, Q[0])):
        return 0.0
    return best


def _ego_rhs(x, u, lf, lr):
    k = lr / (lf + lr)
    td = math.tan(u[0])
    beta = math.atan(k * td)
    dbeta = k * (1.0 + td * td) / (1.0 + k * k * td * td)
    c = math.cos(x[2] + beta)
    s = math.sin(x[2] + beta)
    v = x[3]
    f = np.array([v * c, v * s, v / lr * math.sin(beta), x[4], u[1]])
    fx = np.zeros((5, 5))
    fx[0, 2] = -v * s
    fx[0, 3] = c
    fx[1, 2] = v * c
    fx[1, 3] = s
    fx[2, 3] = math.sin(beta) / lr
    fx[3, 4] = 1.0
    fu = np.zeros((5, 2))
    fu[0, 0] = -v * s * dbeta
    fu[1, 0] = v * c * dbeta
    fu[2, 0] = v / lr * math.cos(beta) * dbeta
    fu[4, 1] = 1.0
    return f, fx, fu


def ego_rhs(x, u, lf, lr):
    """Continuous-time single-track right-hand side, no derivatives."""
    return _ego_rhs(np.asarray(x, float), np.asarray(u, float), lf, lr)[0]


def rk4_step(x, u, lf, lr, T):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    k1 = ego_rhs(x, u, lf, lr)
    k2 = ego_rhs(x + 0.5 * T * k1, u, lf, lr)
    k3 = ego_rhs(x + 0.5 * T * k2, u, lf, lr)
    k4 = ego_rhs(x + T * k3, u, lf, lr)
    return x + T / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_jac(x, u, lf, lr, T):
    """One RK4 step plus its Jacobians with respect to state and input."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    eye = np.eye(5)
    k1, a1, b1 = _ego_rhs(x, u, lf, lr)
    dk1x, dk1u = a1, b1
    k2, a2, b2 = _ego_rhs(x + 0.5 * T * k1, u, lf, lr)
    dk2x = a2 @ (eye + 0.5 * T * dk1x)
    dk2u = a2 @ (0.5 * T * dk1u) + b2
    k3, a3, b3 = _ego_rhs(x + 0.5 * T * k2, u, lf, lr)
    dk3x = a3 @ (eye + 0.5 * T * dk2x)
    dk3u = a3 @ (0.5 * T * dk2u) + b3
    k4, a4, b4 = _ego_rhs(x + T * k3, u, lf, lr)
    dk4x = a4 @ (eye + T * dk3x)
    dk4u = a4 @ (T * dk3u) + b4
    xn = x + T / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    jx = eye + T / 6.0 * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x)
    ju = T / 6.0 * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u)
    return xn, jx, ju


def shoot_jac(x0, U, lf, lr, T):
    """Apply ``rk4_step_jac`` to N independent shooting intervals.

    ``x0`` is (N, 5), ``U`` is (N, 2); row i of the result is the image of
    ``x0[i]`` under ``U[i]`` together with its two Jacobians.
    """
    x0 = np.asarray(x0, dtype=float)
    U = np.asarray(U, dtype=float)
    N = U.shape[0]
    X = np.empty((N, 5))
    JX = np.empty((N, 5, 5))
    JU = np.empty((N, 5, 2))
    for i in range(N):
        X[i], JX[i], JU[i] = rk4_step_jac(x0[i], U[i], lf, lr, T)
    return X, JX, JU
