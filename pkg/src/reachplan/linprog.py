"""Dense, deterministic LP solver for the small problems of set learning.

The engine is a revised bounded-variable primal simplex with Bland's rule
and a phase-1 on artificial variables.  ``solve_lp`` runs it on the Lagrange
dual of the user's problem: the learning LPs have few variables (about 10)
and many inequality rows (one per sample and facet), so the dual's basis is
tiny and a pivot costs O(rows * vars).  The primal point is read off the
simplex multipliers of the dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_COST_TOL = 1e-10
_PIVOT_TOL = 1e-11
_FEAS_TOL = 1e-9
_REFACTOR_EVERY = 40


@dataclass
class LpProblem:
    """``min c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lb <= x <= ub``."""

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.shape[0]
        self.A_ub = (np.zeros((0, n)) if self.A_ub is None
                     else np.asarray(self.A_ub, dtype=float).reshape(-1, n))
        self.b_ub = (np.zeros(0) if self.b_ub is None
                     else np.asarray(self.b_ub, dtype=float).reshape(-1))
        self.A_eq = (np.zeros((0, n)) if self.A_eq is None
                     else np.asarray(self.A_eq, dtype=float).reshape(-1, n))
        self.b_eq = (np.zeros(0) if self.b_eq is None
                     else np.asarray(self.b_eq, dtype=float).reshape(-1))
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(-1)
        if self.A_ub.shape[0] != self.b_ub.shape[0] or self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise ValueError("constraint matrix and right-hand side lengths differ")
        if self.lb.shape[0] != n or self.ub.shape[0] != n:
            raise ValueError("bounds must have one entry per variable")
        if not (np.isfinite(self.c).all() and np.isfinite(self.A_ub).all()
                and np.isfinite(self.A_eq).all()):
            raise ValueError("c and constraint matrices must be finite")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def to_dict(self):
        def lst(a):
            return [None if not np.isfinite(v) else float(v) for v in a]

        return {
            "c": self.c.tolist(),
            "A_ub": self.A_ub.tolist(), "b_ub": self.b_ub.tolist(),
            "A_eq": self.A_eq.tolist(), "b_eq": self.b_eq.tolist(),
            "lb": lst(self.lb), "ub": lst(self.ub),
        }


@dataclass
class LpSolution:
    status: str
    x: np.ndarray
    objective: float
    iterations: int = 0
    # multipliers: ineq (>= 0), eq (free), upper and lower bounds (>= 0)
    duals: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Simplex:
    """``min c^T z  s.t.  A z = b,  l <= z <= u``; bounded-variable revised simplex."""

    def __init__(self, A, b, l, u):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.m, self.n = self.A.shape
        self.l = np.asarray(l, dtype=float)
        self.u = np.asarray(u, dtype=float)
        self.iterations = 0

    def _column(self, j):
        if j < self.n:
            return self.A[:, j]
        col = np.zeros(self.m)
        col[j - self.n] = self.art_sign[j - self.n]
        return col

    def _full(self):
        return np.hstack([self.A, np.diag(self.art_sign)])

    def _refactor(self):
        B = self._full()[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nb = np.ones(self.n + self.m, dtype=bool)
        nb[self.basis] = False
        rhs = self.b - self._full()[:, nb] @ self.z[nb]
        self.z[self.basis] = self.Binv @ rhs

    def run(self, c):
        m, n = self.m, self.n
        l, u = self.l, self.u
        z0 = np.where(np.isfinite(l), l, np.where(np.isfinite(u), u, 0.0))
        r = self.b - self.A @ z0
        self.art_sign = np.where(r >= 0, 1.0, -1.0)
        self.z = np.concatenate([z0, np.abs(r)])
        self.lo = np.concatenate([l, np.zeros(m)])
        self.hi = np.concatenate([u, np.full(m, np.inf)])
        self.basis = list(range(n, n + m))
        self.Binv = np.diag(self.art_sign)

        cost1 = np.concatenate([np.zeros(n), np.ones(m)])
        status = self._iterate(cost1)
        if cost1 @ self.z > _FEAS_TOL * max(1.0, np.abs(self.b).max(initial=0.0)):
            return INFEASIBLE
        self.hi[n:] = 0.0
        self.z[n:] = np.minimum(self.z[n:], 0.0)
        cost2 = np.concatenate([np.asarray(c, dtype=float), np.zeros(m)])
        status = self._iterate(cost2)
        self.cost = cost2
        return status

    def multipliers(self):
        B = self._full()[:, self.basis]
        return np.linalg.solve(B.T, self.cost[self.basis])

    def _iterate(self, cost):
        Afull = self._full()
        ntot = Afull.shape[1]
        since = 0
        limit = 50 * (ntot + self.m) + 1000
        for _ in range(limit):
            if since >= _REFACTOR_EVERY:
                self._refactor()
                since = 0
            pi = cost[self.basis] @ self.Binv
            d = cost - pi @ Afull
            isbasic = np.zeros(ntot, dtype=bool)
            isbasic[self.basis] = True
            span = self.hi - self.lo
            up = (d < -_COST_TOL) & (self.z < self.hi) & ~isbasic
            down = (d > _COST_TOL) & (self.z > self.lo) & ~isbasic
            cand = np.flatnonzero((up | down) & (span > 0))
            if cand.size == 0:
                return OPTIMAL
            j = int(cand[0])  # Bland: lowest eligible index enters
            sigma = 1.0 if up[j] else -1.0
            alpha = self.Binv @ Afull[:, j]
            rate = sigma * alpha  # basic i decreases by rate_i * t
            zb = self.z[self.basis]
            lob = self.lo[self.basis]
            hib = self.hi[self.basis]
            lim = np.full(self.m, np.inf)
            dec = rate > _PIVOT_TOL
            inc = rate < -_PIVOT_TOL
            lim[dec] = (zb[dec] - lob[dec]) / rate[dec]
            lim[inc] = (hib[inc] - zb[inc]) / (-rate[inc])
            lim = np.maximum(lim, 0.0)
            t_row = lim.min() if self.m else np.inf
            t_flip = span[j]
            if not np.isfinite(t_row) and not np.isfinite(t_flip):
                return UNBOUNDED
            self.iterations += 1
            if t_flip <= t_row:
                self.z[j] += sigma * t_flip
                self.z[self.basis] = zb - rate * t_flip
                continue
            ties = np.flatnonzero(lim <= t_row + 1e-12)
            r = int(min(ties, key=lambda i: self.basis[i]))  # Bland on leaving index
            leave = self.basis[r]
            self.z[self.basis] = zb - rate * t_row
            self.z[j] += sigma * t_row
            self.z[leave] = lob[r] if rate[r] > 0 else hib[r]
            self.basis[r] = j
            piv = alpha[r]
            row = self.Binv[r] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[r] = row
            since += 1
        raise RuntimeError("simplex iteration limit reached (cycling?)")


def _dual_data(p: LpProblem):
    ubi = np.flatnonzero(np.isfinite(p.ub))
    lbi = np.flatnonzero(np.isfinite(p.lb))
    n = p.n
    G = np.vstack([p.A_ub, p.A_eq, np.eye(n)[ubi], -np.eye(n)[lbi]])
    h = np.concatenate([p.b_ub, p.b_eq, p.ub[ubi], -p.lb[lbi]])
    m_ub, m_eq = p.A_ub.shape[0], p.A_eq.shape[0]
    wl = np.zeros(G.shape[0])
    wl[m_ub:m_ub + m_eq] = -np.inf
    return G, h, wl, ubi, lbi


def solve_lp(p: LpProblem) -> LpSolution:
    """Solve ``p``; infeasible and unbounded problems are reported by status."""
    n = p.n
    if np.any(p.lb > p.ub):
        return LpSolution(INFEASIBLE, np.full(n, np.nan), np.nan)
    G, h, wl, ubi, lbi = _dual_data(p)
    wu = np.full(G.shape[0], np.inf)

    core = _Simplex(G.T, -p.c, wl, wu)
    st = core.run(h)
    if st == OPTIMAL:
        x = core.multipliers()
        w = core.z[:G.shape[0]]
        m_ub, m_eq = p.A_ub.shape[0], p.A_eq.shape[0]
        duals = {
            "ineq": w[:m_ub].copy(),
            "eq": w[m_ub:m_ub + m_eq].copy(),
            "upper": dict(zip(ubi.tolist(), w[m_ub + m_eq:m_ub + m_eq + ubi.size].tolist())),
            "lower": dict(zip(lbi.tolist(), w[m_ub + m_eq + ubi.size:].tolist())),
        }
        return LpSolution(OPTIMAL, x, float(p.c @ x), core.iterations, duals)
    if st == UNBOUNDED:
        return LpSolution(INFEASIBLE, np.full(n, np.nan), np.nan, core.iterations)
    # dual infeasible: primal is unbounded if feasible at all
    feas = _Simplex(G.T, np.zeros(n), wl, wu)
    if feas.run(h) == UNBOUNDED:
        return LpSolution(INFEASIBLE, np.full(n, np.nan), np.nan, core.iterations)
    return LpSolution(UNBOUNDED, np.full(n, np.nan), -np.inf, core.iterations)
