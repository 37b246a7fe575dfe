"""Online learning of an obstacle's intended control set.

The learned set is ``{u : H u <= theta + H y}``: the admissible polytope
``{u : H u <= 1}`` shrunk row-wise by ``theta`` and shifted by ``y``.  It is
fitted by linear programming so that it contains the observed inputs while
``sum(theta) + rho`` is minimal, with ``theta <= rho`` and ``H y <= 1 - rho``
keeping it inside the admissible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .linprog import LpProblem, solve_lp

SAMPLE_TOL = 1e-7


class SetLearningError(ValueError):
    pass


class SampleOutsideAdmissible(SetLearningError):
    pass


class EmptyInfoSet(SetLearningError):
    pass


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    """Admissible control set ``{u : H u <= 1}``; must contain the origin."""

    H: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if not np.isfinite(H).all():
            raise SetLearningError("admissible set rows must be finite")
        H.setflags(write=False)
        object.__setattr__(self, "H", H)

    @property
    def n_v(self) -> int:
        return self.H.shape[0]

    @property
    def n_u(self) -> int:
        return self.H.shape[1]

    def polytope(self) -> geo.HPolytope:
        return geo.HPolytope(self.H, np.ones(self.n_v))

    def vertices(self) -> geo.VPolytope:
        return geo.vertices_2d(self.polytope())

    def contains(self, u, tol: float = SAMPLE_TOL) -> bool:
        return bool(np.all(self.H @ np.asarray(u, dtype=float) <= 1.0 + tol))

    @classmethod
    def box(cls, half_widths) -> "AdmissibleSet":
        w = np.asarray(half_widths, dtype=float)
        return cls(np.vstack([np.diag(1.0 / w), -np.diag(1.0 / w)]))

    @classmethod
    def regular_polygon(cls, n_sides: int, inradius: float, phase: float = 0.0) -> "AdmissibleSet":
        """Regular polygon with edge normals at ``phase + 2*pi*k/n_sides``."""
        ang = phase + 2.0 * np.pi * np.arange(n_sides) / n_sides
        return cls(np.column_stack([np.cos(ang), np.sin(ang)]) / inradius)

    @classmethod
    def hexagon(cls, inradius: float, phase: float = 0.0) -> "AdmissibleSet":
        return cls.regular_polygon(6, inradius, phase)


@dataclass(frozen=True)
class InfoSet:
    """Observed obstacle inputs, optionally limited to the last ``capacity``."""

    samples: tuple = ()
    capacity: int | None = None

    def __post_init__(self):
        s = tuple(np.asarray(u, dtype=float).reshape(-1) for u in self.samples)
        for u in s:
            if not np.isfinite(u).all():
                raise SetLearningError("non-finite sample")
        if self.capacity is not None:
            if self.capacity < 1:
                raise SetLearningError("capacity must be positive")
            s = s[-self.capacity:]
        object.__setattr__(self, "samples", s)

    def add(self, u) -> "InfoSet":
        return InfoSet(self.samples + (np.asarray(u, dtype=float),), self.capacity)

    def __len__(self):
        return len(self.samples)

    def array(self) -> np.ndarray:
        return np.array(self.samples)


@dataclass(frozen=True, eq=False)
class LearnedSet:
    H: np.ndarray
    theta: np.ndarray
    y: np.ndarray
    rho: float
    objective: float

    def polytope(self) -> geo.HPolytope:
        return to_polytope(self)

    def vertices(self) -> geo.VPolytope:
        return geo.vertices_2d(self.polytope())

    def area(self) -> float:
        return geo.area_2d(self.vertices())

    @property
    def v(self) -> np.ndarray | None:
        """Center parameter of the non-convex form; undefined when rho = 1."""
        if self.rho >= 1.0:
            return None
        return self.y / (1.0 - self.rho)

    def to_dict(self):
        return {"H": self.H.tolist(), "theta": self.theta.tolist(),
                "y": self.y.tolist(), "rho": float(self.rho)}

    @classmethod
    def from_dict(cls, d):
        H = np.asarray(d["H"], dtype=float)
        theta = np.asarray(d["theta"], dtype=float)
        return cls(H, theta, np.asarray(d["y"], dtype=float), float(d["rho"]),
                   float(theta.sum() + d["rho"]))


def to_polytope(s: LearnedSet) -> geo.HPolytope:
    return geo.HPolytope(s.H, s.theta + s.H @ s.y)


def _check_samples(H, samples):
    for u in samples:
        if np.any(H @ u > 1.0 + SAMPLE_TOL):
            raise SampleOutsideAdmissible(f"sample {u.tolist()} violates H u <= 1")


def _base_rows(H):
    """Rows shared by both LPs, over variables ordered (y, rho, theta)."""
    n_v, n_u = H.shape
    # H y + rho 1 <= 1
    inner = np.hstack([H, np.ones((n_v, 1)), np.zeros((n_v, n_v))])
    # theta - rho 1 <= 0
    cap = np.hstack([np.zeros((n_v, n_u)), -np.ones((n_v, 1)), np.eye(n_v)])
    return np.vstack([inner, cap]), np.concatenate([np.ones(n_v), np.zeros(n_v)])


def _cover_rows(H, rhs_points):
    """``-H y - theta <= -r`` for each row-vector ``r`` in ``rhs_points``."""
    n_v, n_u = H.shape
    block = np.hstack([-H, np.zeros((n_v, 1)), -np.eye(n_v)])
    k = len(rhs_points)
    A = np.tile(block, (k, 1))
    b = -np.concatenate(rhs_points) if k else np.zeros(0)
    return A, b


def _solve(H, A_cov, b_cov) -> LearnedSet:
    n_v, n_u = H.shape
    A_base, b_base = _base_rows(H)
    nvar = n_u + 1 + n_v
    c = np.concatenate([np.zeros(n_u), [1.0], np.ones(n_v)])
    lb = np.concatenate([np.full(n_u, -np.inf), np.zeros(1 + n_v)])
    ub = np.concatenate([np.full(n_u, np.inf), np.ones(1 + n_v)])
    sol = solve_lp(LpProblem(c=c, A_ub=np.vstack([A_cov, A_base]),
                             b_ub=np.concatenate([b_cov, b_base]), lb=lb, ub=ub))
    if not sol.optimal:
        raise SetLearningError(f"set-learning LP returned {sol.status}")
    x = sol.x
    assert x.shape[0] == nvar
    theta = np.clip(x[n_u + 1:], 0.0, 1.0)
    rho = float(np.clip(x[n_u], 0.0, 1.0))
    return LearnedSet(H.copy(), theta, x[:n_u].copy(), rho, sol.objective)


def batch_learn(adm: AdmissibleSet, info: InfoSet) -> LearnedSet:
    """Smallest parameterized set containing every sample of ``info``."""
    if len(info) == 0:
        raise EmptyInfoSet("no samples to learn from")
    H = adm.H
    _check_samples(H, info.samples)
    A, b = _cover_rows(H, [H @ u for u in info.samples])
    return _solve(H, A, b)


def recursive_update(prev: LearnedSet, u_new) -> LearnedSet:
    """Grow ``prev`` just enough to contain ``u_new``.

    Fixed-size LP: one covering block for the new sample and one for the
    previous set (row-wise ``H y_pre + theta_pre <= H y + theta``).
    """
    H = prev.H
    u = np.asarray(u_new, dtype=float).reshape(-1)
    _check_samples(H, [u])
    A, b = _cover_rows(H, [H @ u, H @ prev.y + prev.theta])
    return _solve(H, A, b)


def moving_horizon_learn(adm: AdmissibleSet, info: InfoSet) -> LearnedSet:
    if info.capacity is not None:
        info = InfoSet(info.samples[-info.capacity:], info.capacity)
    return batch_learn(adm, info)


def default_seeds(adm: AdmissibleSet, fraction: float = 0.01) -> list:
    """Four axis samples at ``fraction`` of the admissible half-extent per axis."""
    V = adm.vertices().vertices
    half = (V.max(axis=0) - V.min(axis=0)) / 2.0
    seeds = []
    for i in range(adm.n_u):
        e = np.zeros(adm.n_u)
        e[i] = fraction * half[i]
        seeds += [e, -e]
    return seeds


def init_seed(adm: AdmissibleSet, seed_samples=None) -> LearnedSet:
    if seed_samples is None:
        seed_samples = default_seeds(adm)
    return batch_learn(adm, InfoSet(tuple(seed_samples)))


@dataclass
class SetLearner:
    """Per-obstacle learner state for one of the three update strategies.

    ``method`` is ``"recursive"`` (fixed-size LP per sample), ``"batch"``
    (full history) or ``"moving"`` (last ``window`` samples).
    """

    adm: AdmissibleSet
    method: str = "recursive"
    window: int = 30
    seeds: list | None = None
    learned: LearnedSet = field(init=False)
    info: InfoSet = field(init=False)
    steps: int = field(default=0, init=False)

    def __post_init__(self):
        if self.method not in ("recursive", "batch", "moving"):
            raise SetLearningError(f"unknown learning method {self.method!r}")
        seeds = default_seeds(self.adm) if self.seeds is None else list(self.seeds)
        self.learned = init_seed(self.adm, seeds)
        cap = self.window if self.method == "moving" else None
        self.info = InfoSet(tuple(seeds), cap)

    def update(self, u) -> LearnedSet:
        u = np.asarray(u, dtype=float)
        self.info = self.info.add(u)
        if self.method == "recursive":
            self.learned = recursive_update(self.learned, u)
        elif self.method == "batch":
            self.learned = batch_learn(self.adm, self.info)
        else:
            self.learned = moving_horizon_learn(self.adm, self.info)
        self.steps += 1
        return self.learned

    def snapshot(self) -> LearnedSet:
        return replace(self.learned)
