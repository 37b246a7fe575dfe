"""Receding-horizon ego planner with dual-form collision constraints.

Decision vector layout (multiple shooting)::

    [ u_0 .. u_{N-1} | x_1 .. x_N | lambda_{s,i} blocks | eps_{s,i} ]

The collision constraint for obstacle ``s`` at step ``i`` is
``(H p_i - h)^T lam >= d_min - eps`` with ``||H^T lam||_2 = 1``, ``lam >= 0``
and ``0 <= eps <= d_min``.  The norm equality is imposed in squared form.
The nonlinear program is solved by SLSQP (SQP with a damped BFGS Hessian)
using analytic Jacobians of the RK4-discretised single-track model.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, nnls

from . import geometry as geo
from . import vehicle as veh
from .reach import LtvModel, occupancy_2d, occupancy_hrep
from .setlearn import AdmissibleSet, LearnedSet

log = logging.getLogger(__name__)

PROPOSED, RMPC, DMPC = "proposed", "rmpc", "dmpc"
MODES = (PROPOSED, RMPC, DMPC)


class PlannerError(ValueError):
    pass


def compute_d_min(l_e: float, w_e: float, l_s: float, w_s: float) -> float:
    """Sum of the circumscribed-circle radii of both footprints."""
    for d in (l_e, w_e, l_s, w_s):
        if d < 0:
            raise PlannerError("dimensions must be non-negative")
    return math.hypot(l_e / 2, w_e / 2) + math.hypot(l_s / 2, w_s / 2)


@dataclass
class PlannerConfig:
    N: int = 10
    Q1: float = 1.0
    Q2: float = 1.0
    Q3: tuple = (1.0, 5.0, 5.0, 2.0)
    Q4: float = 300.0
    # terminal reference (x_f, y_f, phi_f, v_f)
    reference: tuple = (7.0, 5.5, 0.0, 0.0)
    drivable: geo.HPolytope | None = None
    d_min: float = field(default_factory=lambda: compute_d_min(0.26, 0.25, 0.36, 0.23))
    ego: veh.EgoParams = field(default_factory=veh.EgoParams)
    mode: str = PROPOSED
    max_iter: int = 100
    ftol: float = 1e-8
    kkt_tol: float = 1e-6
    # back-off of the drivable-area constraint so solver tolerance cannot cross D
    d_margin: float = 1e-4
    # second SLSQP pass when the first stops above kkt_tol
    polish: bool = True
    polish_always: bool = False
    polish_ftol: float = 1e-12

    def __post_init__(self):
        if self.N < 1:
            raise PlannerError("N must be at least 1")
        if min(self.Q1, self.Q2, self.Q4, *self.Q3) < 0:
            raise PlannerError("weights must be non-negative")
        if self.d_min <= 0:
            raise PlannerError("d_min must be positive")
        if self.mode not in MODES:
            raise PlannerError(f"unknown mode {self.mode!r}")
        if self.drivable is None:
            self.drivable = geo.HPolytope.box([-50.0, -50.0], [50.0, 50.0])


@dataclass
class PlanResult:
    states: np.ndarray
    inputs: np.ndarray
    lambdas: list
    slacks: np.ndarray
    cost: float
    status: str
    converged: bool
    iterations: int
    kkt: float = float("nan")
    occupancies: list = field(default_factory=list)

    def row_dicts(self):
        rows = []
        for i in range(self.inputs.shape[0]):
            rows.append({"i": i, **{f"x{k}": float(v) for k, v in enumerate(self.states[i + 1])},
                         "delta": float(self.inputs[i, 0]), "eta": float(self.inputs[i, 1]),
                         "slack": float(self.slacks[:, i].max()) if self.slacks.size else 0.0})
        return rows


@dataclass
class ObstacleTrack:
    """What the ego knows about one obstacle at the current step."""

    state: np.ndarray  # (p_x, v_x, p_y, v_y)
    adm: AdmissibleSet
    learned: LearnedSet | None = None
    d_min: float | None = None


class _Layout:
    def __init__(self, N, nx, nu, n_h):
        self.N, self.nx, self.nu = N, nx, nu
        self.iu = 0
        self.ix = N * nu
        off = self.ix + N * nx
        self.lam = []  # per obstacle, per step: slice
        for rows in n_h:
            per = []
            for n in rows:
                per.append(slice(off, off + n))
                off += n
            self.lam.append(per)
        self.S = len(n_h)
        self.ie = off
        self.n = off + self.S * N

    def U(self, z):
        return z[self.iu:self.ix].reshape(self.N, self.nu)

    def X(self, z):
        return z[self.ix:self.ix + self.N * self.nx].reshape(self.N, self.nx)

    def eps(self, z):
        return z[self.ie:self.n].reshape(self.S, self.N)


def _init_lambda(H, h, p, center):
    e = p - center
    nrm = np.linalg.norm(e)
    e = np.array([1.0, 0.0]) if nrm < 1e-9 else e / nrm
    lam, _ = nnls(H.T, e)
    g = np.linalg.norm(H.T @ lam)
    if g < 1e-9:
        lam = np.zeros(H.shape[0])
        lam[int(np.argmax(H @ p - h))] = 1.0
        g = np.linalg.norm(H.T @ lam)
    return lam / g


class _Problem:
    def __init__(self, x0, occ, d_min, cfg: PlannerConfig):
        self.cfg = cfg
        self.p = cfg.ego
        self.x0 = np.asarray(x0, dtype=float)
        self.occ = occ  # list (obstacle) of list (step) of HPolytope
        self.d_min = d_min
        N, nx, nu = cfg.N, self.p.nx, self.p.nu
        self.L = _Layout(N, nx, nu, [[o.H.shape[0] for o in steps] for steps in occ])
        self.G = cfg.drivable.H
        self.g = cfg.drivable.b - cfg.d_margin * np.linalg.norm(cfg.drivable.H, axis=1)
        self.q3 = np.asarray(cfg.Q3, dtype=float)
        ref = cfg.reference
        self.ref = np.array([ref[3], ref[0], ref[1], ref[2]])  # (v, x, y, phi)
        self.term_idx = [3, 0, 1, 2]
        self._cache_key = None

    # dynamics (cached per z)
    def _dyn(self, z):
        key = z.tobytes()
        if key != self._cache_key:
            L = self.L
            U, X = L.U(z), L.X(z)
            starts = np.vstack([self.x0[None, :], X[:-1]])
            self._dyn_val = veh.shoot(starts, U, self.p)
            self._cache_key = key
        return self._dyn_val

    def cost(self, z):
        L, c = self.L, self.cfg
        U, X = L.U(z), L.X(z)
        E = X[-1, self.term_idx] - self.ref
        eps = L.eps(z)
        return float(c.Q1 * np.sum(U[:, 0] ** 2) + c.Q2 * np.sum(U[:, 1] ** 2)
                     + np.sum(self.q3 * E * E) + c.Q4 * np.sum(eps * eps))

    def cost_grad(self, z):
        L, c = self.L, self.cfg
        gr = np.zeros(L.n)
        U, X = L.U(z), L.X(z)
        gU = gr[L.iu:L.ix].reshape(L.N, L.nu)
        gU[:, 0] = 2 * c.Q1 * U[:, 0]
        gU[:, 1] = 2 * c.Q2 * U[:, 1]
        E = X[-1, self.term_idx] - self.ref
        base = L.ix + (L.N - 1) * L.nx
        for k, j in enumerate(self.term_idx):
            gr[base + j] += 2 * self.q3[k] * E[k]
        gr[L.ie:L.n] = 2 * c.Q4 * z[L.ie:L.n]
        return gr

    def eq(self, z):
        L = self.L
        Xn = self._dyn(z)[0]
        out = [(L.X(z) - Xn).ravel()]
        for s, steps in enumerate(self.occ):
            for i, P in enumerate(steps):
                lam = z[L.lam[s][i]]
                w = P.H.T @ lam
                out.append([w @ w - 1.0])
        return np.concatenate(out)

    def eq_jac(self, z):
        L = self.L
        N, nx, nu = L.N, L.nx, L.nu
        _, JX, JU = self._dyn(z)
        m = N * nx + sum(len(st) for st in self.occ)
        J = np.zeros((m, L.n))
        for i in range(N):
            r = slice(i * nx, (i + 1) * nx)
            J[r, L.ix + i * nx:L.ix + (i + 1) * nx] = np.eye(nx)
            J[r, L.iu + i * nu:L.iu + (i + 1) * nu] = -JU[i]
            if i > 0:
                J[r, L.ix + (i - 1) * nx:L.ix + i * nx] = -JX[i]
        row = N * nx
        for s, steps in enumerate(self.occ):
            for i, P in enumerate(steps):
                sl = L.lam[s][i]
                J[row, sl] = 2.0 * (P.H @ (P.H.T @ z[sl]))
                row += 1
        return J

    def ineq(self, z):
        L = self.L
        X = L.X(z)
        eps = L.eps(z)
        out = []
        for s, steps in enumerate(self.occ):
            for i, P in enumerate(steps):
                lam = z[L.lam[s][i]]
                p = X[i, :2]
                out.append([(P.H @ p - P.b) @ lam - self.d_min[s] + eps[s, i]])
        out.append((self.g[None, :] - X[:, :2] @ self.G.T).ravel())
        return np.concatenate(out)

    def ineq_jac(self, z):
        L = self.L
        N, nx = L.N, L.nx
        X = L.X(z)
        nD = self.G.shape[0]
        m = sum(len(st) for st in self.occ) + N * nD
        J = np.zeros((m, L.n))
        row = 0
        for s, steps in enumerate(self.occ):
            for i, P in enumerate(steps):
                sl = L.lam[s][i]
                lam = z[sl]
                p = X[i, :2]
                c0 = L.ix + i * nx
                J[row, c0:c0 + 2] = P.H.T @ lam
                J[row, sl] = P.H @ p - P.b
                J[row, L.ie + s * N + i] = 1.0
                row += 1
        for i in range(N):
            c0 = L.ix + i * nx
            J[row:row + nD, c0:c0 + 2] = -self.G
            row += nD
        return J

    def bounds(self):
        L, p = self.L, self.p
        lo = np.full(L.n, -np.inf)
        hi = np.full(L.n, np.inf)
        lo[L.iu:L.ix:L.nu], hi[L.iu:L.ix:L.nu] = p.delta_bounds
        if p.reduced:
            lo[L.iu + 1:L.ix:L.nu], hi[L.iu + 1:L.ix:L.nu] = p.a_bounds
        xs = slice(L.ix, L.ix + L.N * L.nx)
        lo_x = lo[xs].reshape(L.N, L.nx)
        hi_x = hi[xs].reshape(L.N, L.nx)
        lo_x[:, 3], hi_x[:, 3] = p.v_bounds
        if not p.reduced:
            lo_x[:, 4], hi_x[:, 4] = p.a_bounds
        lo[xs], hi[xs] = lo_x.ravel(), hi_x.ravel()
        lo[L.ix + L.N * L.nx:L.ie] = 0.0
        for s in range(L.S):
            lo[L.ie + s * L.N:L.ie + (s + 1) * L.N] = 0.0
            hi[L.ie + s * L.N:L.ie + (s + 1) * L.N] = self.d_min[s]
        return lo, hi

    def initial(self, U0):
        L = self.L
        lo, hi = self.bounds()
        U0 = np.clip(U0, lo[L.iu:L.ix].reshape(L.N, L.nu), hi[L.iu:L.ix].reshape(L.N, L.nu))
        xs = [self.x0]
        for i in range(L.N):
            xs.append(veh.ego_step_rk4(xs[-1], U0[i], self.p))
        X = np.array(xs[1:])
        z = np.zeros(L.n)
        z[L.iu:L.ix] = U0.ravel()
        z[L.ix:L.ix + L.N * L.nx] = X.ravel()
        for s, steps in enumerate(self.occ):
            for i, P in enumerate(steps):
                verts = geo.vertices_2d(P).vertices
                z[L.lam[s][i]] = _init_lambda(P.H, P.b, X[i, :2], verts.mean(axis=0))
            z[L.ie + s * L.N:L.ie + (s + 1) * L.N] = self.d_min[s] / 2.0
        return np.clip(z, lo, hi)

    def rollout_violation(self, z) -> float:
        """Drivable-area and state-bound violation of the inputs simulated exactly."""
        X = veh.simulate(self.x0, self.L.U(z), self.p)[1:]
        d = (X[:, :2] @ self.G.T - self.g[None, :]).max(initial=0.0)
        vlo, vhi = self.p.v_bounds
        out = max(d, (vlo - X[:, 3]).max(), (X[:, 3] - vhi).max(), 0.0)
        if not self.p.reduced:
            alo, ahi = self.p.a_bounds
            out = max(out, (alo - X[:, 4]).max(), (X[:, 4] - ahi).max())
        return float(out)

    def violation(self, z) -> float:
        return max(np.abs(self.eq(z)).max(initial=0.0), (-self.ineq(z)).max(initial=0.0))

    def kkt_residual(self, z):
        """Max of primal infeasibility, stationarity and complementarity.

        Multipliers are least-squares estimates over a guessed active set;
        the best of a few activity thresholds is reported.
        """
        lo, hi = self.bounds()
        ce = self.eq(z)
        ci = self.ineq(z)
        viol = max(np.abs(ce).max(initial=0.0), (-ci).max(initial=0.0),
                   (lo - z).max(initial=0.0), (z - hi).max(initial=0.0))
        g = self.cost_grad(z)
        scale = max(1.0, np.abs(g).max())
        Je = self.eq_jac(z)
        Ji = self.ineq_jac(z)
        eye = np.eye(z.shape[0])
        best = np.inf
        for act_tol in (1e-8, 1e-6, 1e-4):
            act = np.flatnonzero(ci <= act_tol)
            at_lo = np.flatnonzero(z - lo <= act_tol)
            at_hi = np.flatnonzero(hi - z <= act_tol)
            M = np.hstack([Je.T, -Je.T, Ji[act].T, eye[:, at_lo], -eye[:, at_hi]])
            mult, res = nnls(M, g, maxiter=20 * M.shape[1])
            k = 2 * Je.shape[0]
            slack = np.concatenate([ci[act], (z - lo)[at_lo], (hi - z)[at_hi]])
            comp = np.abs(mult[k:] * slack).max(initial=0.0)
            best = min(best, max(res, comp) / scale)
        return max(viol, best)


def build_and_solve(x0, occupancies, cfg: PlannerConfig, d_min=None,
                    warm_inputs=None, check_kkt: bool = False) -> PlanResult:
    """Solve the planning NLP for one step.

    ``occupancies`` holds, per obstacle, a list of ``N`` full-dimensional
    ``HPolytope`` position sets.  ``d_min`` is a scalar or one value per
    obstacle (defaults to ``cfg.d_min``).
    """
    x0 = x0.array() if isinstance(x0, veh.EgoState) else np.asarray(x0, dtype=float)
    if not np.isfinite(x0).all():
        raise PlannerError("non-finite initial state")
    S = len(occupancies)
    for steps in occupancies:
        if len(steps) != cfg.N:
            raise PlannerError(f"each obstacle needs {cfg.N} occupancies")
    if d_min is None:
        d_min = [cfg.d_min] * S
    elif np.isscalar(d_min):
        d_min = [float(d_min)] * S
    d_min = list(d_min)
    keep = [s for s in range(S) if _may_bind(x0, occupancies[s], d_min[s], cfg)]
    prob = _Problem(x0, [occupancies[s] for s in keep], [d_min[s] for s in keep], cfg)
    L = prob.L
    U0 = np.zeros((cfg.N, L.nu)) if warm_inputs is None else np.asarray(warm_inputs, dtype=float)
    z0 = prob.initial(U0)
    lo, hi = prob.bounds()
    cons = [{"type": "eq", "fun": prob.eq, "jac": prob.eq_jac}]
    if L.S or prob.G.shape[0]:
        cons.append({"type": "ineq", "fun": prob.ineq, "jac": prob.ineq_jac})
    iterates = [z0]

    def run(start, maxiter, ftol):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return minimize(prob.cost, start, jac=prob.cost_grad, method="SLSQP",
                            bounds=list(zip(lo, hi)), constraints=cons,
                            callback=lambda zk: iterates.append(zk.copy()),
                            options={"maxiter": maxiter, "ftol": ftol})

    res = run(z0, cfg.max_iter, cfg.ftol)
    nit = int(res.nit)
    kkt = float("nan")
    if res.success and cfg.polish and (check_kkt or cfg.polish_always):
        # the ftol stop can leave near-active constraints unresolved; a
        # tight-tolerance restart from the solution usually finishes the job
        kkt = prob.kkt_residual(np.clip(res.x, lo, hi))
        if kkt > cfg.kkt_tol and nit < cfg.max_iter:
            res2 = run(np.clip(res.x, lo, hi), cfg.max_iter - nit, cfg.polish_ftol)
            nit += int(res2.nit)
            if res2.success:
                res = res2
                kkt = float("nan")
    z = np.clip(res.x, lo, hi)
    if not res.success:
        iterates.append(z)
        # best iterate: its rollout respects D and the state box, then least
        # infeasible, then cheapest
        z = min((np.clip(zk, lo, hi) for zk in iterates),
                key=lambda zk: (round(prob.rollout_violation(zk), 6),
                                round(prob.violation(zk), 6), prob.cost(zk)))
    # states reported are the exact rollout of the returned inputs
    U = L.U(z).copy()
    X = veh.simulate(x0, U, cfg.ego)
    lams, eps = _full_duals(z, L, keep, occupancies, X)
    if check_kkt and not np.isfinite(kkt):
        kkt = prob.kkt_residual(z)
    status = "converged" if res.success else f"failed: {res.message}"
    if not res.success:
        log.debug("planner did not converge: %s", res.message)
    return PlanResult(X, U, lams, eps, prob.cost(z), status, bool(res.success),
                      nit, kkt, occupancies)


def _reach_radii(x0, cfg: PlannerConfig) -> np.ndarray:
    """Upper bounds on ``|p_i - p_0|`` for ``i = 1..N`` under the box bounds.

    Every RK4 stage velocity is within ``T * a_max`` of an admissible speed,
    and the heading terms have unit norm.
    """
    p = cfg.ego
    v = max(abs(p.v_bounds[0]), abs(p.v_bounds[1]), abs(x0[3]))
    a = max(abs(p.a_bounds[0]), abs(p.a_bounds[1]), 0.0 if p.reduced else abs(x0[4]))
    return p.T * (v + p.T * a) * np.arange(1, cfg.N + 1)


def _may_bind(x0, steps, d_min, cfg: PlannerConfig) -> bool:
    r = _reach_radii(x0, cfg)
    for i, P in enumerate(steps):
        if geo.point_distance_2d(x0[:2], geo.vertices_2d(P)) - r[i] <= d_min + 1e-6:
            return True
    return False


def _full_duals(z, L, keep, occupancies, X):
    # obstacles dropped as out of reach get a plain separating multiplier
    N = L.N
    lams, eps = [], np.zeros((len(occupancies), N))
    for s, steps in enumerate(occupancies):
        if s in keep:
            j = keep.index(s)
            lams.append([z[sl].copy() for sl in L.lam[j]])
            eps[s] = L.eps(z)[j]
        else:
            lams.append([_init_lambda(P.H, P.b, X[i + 1, :2],
                                      geo.vertices_2d(P).vertices.mean(axis=0))
                         for i, P in enumerate(steps)])
    return lams, eps


def control_set(track: ObstacleTrack, mode: str) -> geo.VPolytope:
    """Input set fed to reachability: learned, admissible, or zero."""
    if mode == PROPOSED:
        if track.learned is None:
            raise PlannerError("proposed mode needs a learned set")
        return track.learned.vertices()
    if mode == RMPC:
        return track.adm.vertices()
    if mode == DMPC:
        return geo.VPolytope.point(np.zeros(track.adm.n_u))
    raise PlannerError(f"unknown mode {mode!r}")


def predict_occupancies(track: ObstacleTrack, mode: str, N: int, T: float) -> list:
    model = LtvModel.double_integrator(T, N)
    O = occupancy_2d(model, track.state, control_set(track, mode), N)
    return occupancy_hrep(O)


class Planner:
    """Stateful wrapper: keeps the last solution for warm starts."""

    def __init__(self, cfg: PlannerConfig):
        self.cfg = cfg
        self.prev: PlanResult | None = None

    def reset(self):
        self.prev = None

    def warm_inputs(self):
        if self.prev is None:
            return None
        U = self.prev.inputs
        return np.vstack([U[1:], U[-1:]])

    def step(self, x0, tracks, check_kkt: bool = False) -> PlanResult:
        cfg = self.cfg
        occ = [predict_occupancies(t, cfg.mode, cfg.N, cfg.ego.T) for t in tracks]
        d_min = [cfg.d_min if t.d_min is None else t.d_min for t in tracks]
        res = build_and_solve(x0, occ, cfg, d_min, self.warm_inputs(), check_kkt)
        self.prev = res
        return res


def safe_input(x, u, p: veh.EgoParams) -> np.ndarray:
    """Clip ``u`` so one step cannot leave the steering, acceleration or speed box.

    A no-op for converged plans; guards the closed loop against a
    non-converged iterate.
    """
    u = np.array(u, dtype=float)
    u[0] = np.clip(u[0], *p.delta_bounds)
    T = p.T
    if p.reduced:
        lo, hi = p.a_bounds
        lo = max(lo, (p.v_bounds[0] - x[3]) / T)
        hi = min(hi, (p.v_bounds[1] - x[3]) / T)
        u[1] = np.clip(u[1], lo, hi) if lo <= hi else 0.0
        return u
    a = x[4]
    lo = (p.a_bounds[0] - a) / T
    hi = (p.a_bounds[1] - a) / T
    vlo = (p.v_bounds[0] - x[3] - T * a) * 2.0 / (T * T)
    vhi = (p.v_bounds[1] - x[3] - T * a) * 2.0 / (T * T)
    if max(lo, vlo) <= min(hi, vhi):
        lo, hi = max(lo, vlo), min(hi, vhi)
    u[1] = np.clip(u[1], lo, hi)
    return u


def plan_step(x0, tracks, cfg: PlannerConfig, prev: PlanResult | None = None) -> PlanResult:
    p = Planner(cfg)
    p.prev = prev
    return p.step(x0, tracks)
