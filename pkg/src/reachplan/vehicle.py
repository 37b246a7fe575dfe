"""Ego kinematic single-track model, obstacle double integrator, input estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# state layout of the full ego model
PX, PY, PHI, V, ACC = range(5)
DELTA, ETA = 0, 1


@dataclass(frozen=True)
class EgoState:
    p_x: float = 0.0
    p_y: float = 0.0
    phi: float = 0.0
    v: float = 0.0
    a: float = 0.0

    def array(self) -> np.ndarray:
        return np.array([self.p_x, self.p_y, self.phi, self.v, self.a])

    @classmethod
    def from_array(cls, x) -> "EgoState":
        return cls(*[float(t) for t in x])


@dataclass(frozen=True)
class EgoInput:
    delta: float = 0.0
    eta: float = 0.0

    def array(self) -> np.ndarray:
        return np.array([self.delta, self.eta])


@dataclass(frozen=True)
class EgoParams:
    """Geometry, sampling time and box bounds on (v, a, delta).

    With ``reduced=True`` the acceleration becomes an input: state
    ``(p_x, p_y, phi, v)``, input ``(delta, a)``.
    """

    l_f: float = 0.08
    l_r: float = 0.08
    T: float = 0.25
    v_bounds: tuple = (-1.5, 1.5)
    a_bounds: tuple = (-0.5, 0.5)
    delta_bounds: tuple = (-0.3, 0.3)
    length: float = 0.26
    width: float = 0.25
    reduced: bool = False

    def __post_init__(self):
        if self.l_f <= 0 or self.l_r <= 0 or self.T <= 0:
            raise ValueError("l_f, l_r and T must be positive")
        for lo, hi in (self.v_bounds, self.a_bounds, self.delta_bounds):
            if not lo < hi:
                raise ValueError("lower bound must be below upper bound")

    @property
    def nx(self) -> int:
        return 4 if self.reduced else 5

    @property
    def nu(self) -> int:
        return 2


def _as_array(x) -> np.ndarray:
    if isinstance(x, (EgoState, EgoInput)):
        return x.array()
    return np.asarray(x, dtype=float)


def slip_angle(delta: float, p: EgoParams) -> float:
    return math.atan(p.l_r / (p.l_f + p.l_r) * math.tan(delta))


def ego_derivative(x, u, p: EgoParams) -> np.ndarray:
    x = _as_array(x)
    u = _as_array(u)
    if p.reduced:
        beta = slip_angle(u[0], p)
        return np.array([x[3] * math.cos(x[2] + beta), x[3] * math.sin(x[2] + beta),
                         x[3] / p.l_r * math.sin(beta), u[1]])
    return kernels.ego_rhs(x, u, p.l_f, p.l_r)


def _reduced_step_jac(x, u, p: EgoParams):
    # embed in the 5-state model with a held constant and eta = 0
    x5 = np.array([x[0], x[1], x[2], x[3], u[1]])
    xn, jx, ju = kernels.rk4_step_jac(x5, np.array([u[0], 0.0]), p.l_f, p.l_r, p.T)
    jx4 = jx[:4, :4]
    ju4 = np.column_stack([ju[:4, 0], jx[:4, 4]])
    return xn[:4], jx4, ju4


def ego_step_rk4(x, u, p: EgoParams) -> np.ndarray:
    """One classical RK4 step over ``p.T`` with the input held constant."""
    x = _as_array(x)
    u = _as_array(u)
    if p.reduced:
        return _reduced_step_jac(x, u, p)[0]
    return kernels.rk4_step(x, u, p.l_f, p.l_r, p.T)


def ego_step_rk4_jac(x, u, p: EgoParams):
    x = _as_array(x)
    u = _as_array(u)
    if p.reduced:
        return _reduced_step_jac(x, u, p)
    return kernels.rk4_step_jac(x, u, p.l_f, p.l_r, p.T)


def shoot(X, U, p: EgoParams):
    """Vectorised step + Jacobians for N shooting intervals."""
    if p.reduced:
        out = [_reduced_step_jac(x, u, p) for x, u in zip(X, U)]
        return (np.array([o[0] for o in out]), np.array([o[1] for o in out]),
                np.array([o[2] for o in out]))
    return kernels.shoot_jac(X, U, p.l_f, p.l_r, p.T)


def simulate(x0, inputs, p: EgoParams) -> np.ndarray:
    xs = [_as_array(x0)]
    for u in inputs:
        xs.append(ego_step_rk4(xs[-1], u, p))
    return np.array(xs)


def sv_matrices(T: float):
    """Double-integrator matrices for state (p_x, v_x, p_y, v_y), input (a_x, a_y)."""
    if T < 0:
        raise ValueError("T must be non-negative")
    A = np.array([[1.0, T, 0.0, 0.0],
                  [0.0, 1.0, 0.0, 0.0],
                  [0.0, 0.0, 1.0, T],
                  [0.0, 0.0, 0.0, 1.0]])
    B = np.array([[T * T / 2.0, 0.0],
                  [T, 0.0],
                  [0.0, T * T / 2.0],
                  [0.0, T]])
    return A, B


@dataclass(frozen=True)
class SvObservation:
    position: tuple
    velocity: tuple
    heading: float
    k: int

    def state(self) -> np.ndarray:
        """Double-integrator state (p_x, v_x, p_y, v_y)."""
        return np.array([self.position[0], self.velocity[0],
                         self.position[1], self.velocity[1]], dtype=float)


@dataclass
class ObservationNoise:
    """Optional Gaussian noise on observed positions and velocities."""

    pos_std: float = 0.0
    vel_std: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def apply(self, obs: SvObservation) -> SvObservation:
        if self.pos_std == 0.0 and self.vel_std == 0.0:
            return obs
        p = np.asarray(obs.position) + self.rng.normal(0.0, self.pos_std, 2)
        v = np.asarray(obs.velocity) + self.rng.normal(0.0, self.vel_std, 2)
        return SvObservation(tuple(p), tuple(v), obs.heading, obs.k)


def estimate_sv_input(prev: SvObservation, curr: SvObservation, T: float) -> np.ndarray:
    """Ground-frame acceleration over the last step by finite differences."""
    if curr.k != prev.k + 1:
        raise ValueError(f"observations {prev.k} and {curr.k} are not consecutive")
    return (np.asarray(curr.velocity, dtype=float) - np.asarray(prev.velocity, dtype=float)) / T
