# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, tan, atan, sqrt, fabs, INFINITY

from ._kernels_py import sort_order

cnp.import_array()

cdef double ORIENT_EPS = 1e-12


cdef inline double _cross(double ox, double oy, double ax, double ay,
                          double bx, double by) nogil:
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def hull_2d_indices(points):
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    cdef cnp.intp_t[::1] order = sort_order(np.asarray(pts)).astype(np.intp)
    cdef cnp.intp_t[::1] uniq = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t nu = 1, i, k, last
    uniq[0] = order[0]
    for i in range(1, n):
        k = order[i]
        last = uniq[nu - 1]
        if fabs(pts[k, 0] - pts[last, 0]) > ORIENT_EPS or fabs(pts[k, 1] - pts[last, 1]) > ORIENT_EPS:
            uniq[nu] = k
            nu += 1
    if nu < 3:
        return np.asarray(uniq[:nu]).copy()

    cdef cnp.intp_t[::1] hull = np.empty(2 * nu, dtype=np.intp)
    cdef Py_ssize_t h = 0, lo
    for i in range(nu):
        k = uniq[i]
        while h >= 2 and _cross(pts[hull[h - 2], 0], pts[hull[h - 2], 1],
                                pts[hull[h - 1], 0], pts[hull[h - 1], 1],
                                pts[k, 0], pts[k, 1]) <= ORIENT_EPS:
            h -= 1
        hull[h] = k
        h += 1
    lo = h + 1
    for i in range(nu - 2, -1, -1):
        k = uniq[i]
        while h >= lo and _cross(pts[hull[h - 2], 0], pts[hull[h - 2], 1],
                                 pts[hull[h - 1], 0], pts[hull[h - 1], 1],
                                 pts[k, 0], pts[k, 1]) <= ORIENT_EPS:
            h -= 1
        hull[h] = k
        h += 1
    h -= 1
    if h == 2 and hull[0] == hull[1]:
        h = 1
    return np.asarray(hull[:h]).copy()


cdef inline double _pt_seg(double px, double py, double ax, double ay,
                           double bx, double by) nogil:
    cdef double dx = bx - ax, dy = by - ay
    cdef double den = dx * dx + dy * dy
    cdef double t, ex, ey
    if den <= 0.0:
        ex = px - ax
        ey = py - ay
        return sqrt(ex * ex + ey * ey)
    t = ((px - ax) * dx + (py - ay) * dy) / den
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    ex = px - ax - t * dx
    ey = py - ay - t * dy
    return sqrt(ex * ex + ey * ey)


cdef double _seg_seg(double p1x, double p1y, double p2x, double p2y,
                     double q1x, double q1y, double q2x, double q2y) nogil:
    cdef double o1 = _cross(p1x, p1y, p2x, p2y, q1x, q1y)
    cdef double o2 = _cross(p1x, p1y, p2x, p2y, q2x, q2y)
    cdef double o3 = _cross(q1x, q1y, q2x, q2y, p1x, p1y)
    cdef double o4 = _cross(q1x, q1y, q2x, q2y, p2x, p2y)
    if o1 * o2 < 0.0 and o3 * o4 < 0.0:
        return 0.0
    cdef double d = _pt_seg(p1x, p1y, q1x, q1y, q2x, q2y)
    cdef double e = _pt_seg(p2x, p2y, q1x, q1y, q2x, q2y)
    if e < d:
        d = e
    e = _pt_seg(q1x, q1y, p1x, p1y, p2x, p2y)
    if e < d:
        d = e
    e = _pt_seg(q2x, q2y, p1x, p1y, p2x, p2y)
    if e < d:
        d = e
    return d


def segment_distance(p1, p2, q1, q2):
    return _seg_seg(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1], q2[0], q2[1])


cdef bint _inside_ccw(const double[:, ::1] poly, double px, double py) nogil:
    cdef Py_ssize_t n = poly.shape[0], i, j
    if n < 3:
        return False
    for i in range(n):
        j = (i + 1) % n
        if _cross(poly[i, 0], poly[i, 1], poly[j, 0], poly[j, 1], px, py) < -ORIENT_EPS:
            return False
    return True


def polygon_distance(P, Q):
    cdef const double[:, ::1] a = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(Q, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j, i2, j2
    cdef double best = INFINITY, d
    for i in range(n):
        i2 = (i + 1) % n
        for j in range(m):
            j2 = (j + 1) % m
            d = _seg_seg(a[i, 0], a[i, 1], a[i2, 0], a[i2, 1],
                         b[j, 0], b[j, 1], b[j2, 0], b[j2, 1])
            if d < best:
                best = d
    if best > 0.0 and (_inside_ccw(b, a[0, 0], a[0, 1]) or _inside_ccw(a, b[0, 0], b[0, 1])):
        return 0.0
    return best


cdef void _rhs(const double* x, double d, double eta, double lf, double lr,
               double* f, double* fx, double* fu) nogil:
    # fx is 5x5 row-major, fu is 5x2 row-major; only nonzeros written
    cdef double k = lr / (lf + lr)
    cdef double td = tan(d)
    cdef double beta = atan(k * td)
    cdef double dbeta = k * (1.0 + td * td) / (1.0 + k * k * td * td)
    cdef double c = cos(x[2] + beta)
    cdef double s = sin(x[2] + beta)
    cdef double v = x[3]
    cdef int i
    f[0] = v * c
    f[1] = v * s
    f[2] = v / lr * sin(beta)
    f[3] = x[4]
    f[4] = eta
    if fx == NULL:
        return
    for i in range(25):
        fx[i] = 0.0
    for i in range(10):
        fu[i] = 0.0
    fx[0 * 5 + 2] = -v * s
    fx[0 * 5 + 3] = c
    fx[1 * 5 + 2] = v * c
    fx[1 * 5 + 3] = s
    fx[2 * 5 + 3] = sin(beta) / lr
    fx[3 * 5 + 4] = 1.0
    fu[0 * 2 + 0] = -v * s * dbeta
    fu[1 * 2 + 0] = v * c * dbeta
    fu[2 * 2 + 0] = v / lr * cos(beta) * dbeta
    fu[4 * 2 + 1] = 1.0


def ego_rhs(x, u, double lf, double lr):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(5)
    cdef double[::1] o = out
    _rhs(&xv[0], u[0], u[1], lf, lr, &o[0], NULL, NULL)
    return out


cdef void _step(const double* x, double d, double eta, double lf, double lr,
                double T, double* xn, double* jx, double* ju) nogil:
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double xs[5]
    cdef double A[25]
    cdef double B[10]
    cdef double dkx[4][25]
    cdef double dku[4][10]
    cdef double prevx[25]
    cdef double prevu[10]
    cdef double h
    cdef int i, j, l, stage
    cdef double acc

    for stage in range(4):
        if stage == 0:
            for i in range(5):
                xs[i] = x[i]
        else:
            h = T if stage == 3 else 0.5 * T
            for i in range(5):
                if stage == 1:
                    xs[i] = x[i] + h * k1[i]
                elif stage == 2:
                    xs[i] = x[i] + h * k2[i]
                else:
                    xs[i] = x[i] + h * k3[i]
        if stage == 0:
            _rhs(xs, d, eta, lf, lr, k1, A, B)
        elif stage == 1:
            _rhs(xs, d, eta, lf, lr, k2, A, B)
        elif stage == 2:
            _rhs(xs, d, eta, lf, lr, k3, A, B)
        else:
            _rhs(xs, d, eta, lf, lr, k4, A, B)
        if jx == NULL:
            continue
        if stage == 0:
            for i in range(25):
                dkx[0][i] = A[i]
            for i in range(10):
                dku[0][i] = B[i]
            continue
        # d(xs)/dx = I + h*dk_{prev}/dx ; d(xs)/du = h*dk_{prev}/du
        for i in range(25):
            prevx[i] = h * dkx[stage - 1][i]
        for i in range(5):
            prevx[i * 5 + i] += 1.0
        for i in range(10):
            prevu[i] = h * dku[stage - 1][i]
        for i in range(5):
            for j in range(5):
                acc = 0.0
                for l in range(5):
                    acc += A[i * 5 + l] * prevx[l * 5 + j]
                dkx[stage][i * 5 + j] = acc
            for j in range(2):
                acc = B[i * 2 + j]
                for l in range(5):
                    acc += A[i * 5 + l] * prevu[l * 2 + j]
                dku[stage][i * 2 + j] = acc

    for i in range(5):
        xn[i] = x[i] + T / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    if jx == NULL:
        return
    for i in range(25):
        jx[i] = T / 6.0 * (dkx[0][i] + 2.0 * dkx[1][i] + 2.0 * dkx[2][i] + dkx[3][i])
    for i in range(5):
        jx[i * 5 + i] += 1.0
    for i in range(10):
        ju[i] = T / 6.0 * (dku[0][i] + 2.0 * dku[1][i] + 2.0 * dku[2][i] + dku[3][i])


def rk4_step(x, u, double lf, double lr, double T):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(5)
    cdef double[::1] o = out
    _step(&xv[0], u[0], u[1], lf, lr, T, &o[0], NULL, NULL)
    return out


def rk4_step_jac(x, u, double lf, double lr, double T):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    xn = np.empty(5)
    jx = np.empty((5, 5))
    ju = np.empty((5, 2))
    cdef double[::1] o = xn
    cdef double[:, ::1] a = jx
    cdef double[:, ::1] b = ju
    _step(&xv[0], u[0], u[1], lf, lr, T, &o[0], &a[0, 0], &b[0, 0])
    return xn, jx, ju


def shoot_jac(x0, U, double lf, double lr, double T):
    cdef const double[:, ::1] xs = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[:, ::1] us = np.ascontiguousarray(U, dtype=np.float64)
    cdef Py_ssize_t N = us.shape[0], i
    X = np.empty((N, 5))
    JX = np.empty((N, 5, 5))
    JU = np.empty((N, 5, 2))
    cdef double[:, ::1] xo = X
    cdef double[:, :, ::1] jxo = JX
    cdef double[:, :, ::1] juo = JU
    with nogil:
        for i in range(N):
            _step(&xs[i, 0], us[i, 0], us[i, 1], lf, lr, T,
                  &xo[i, 0], &jxo[i, 0, 0], &juo[i, 0, 0])
    return X, JX, JU
