"""Forward reachable sets and position occupancies of a linear obstacle model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .vehicle import sv_matrices


class ReachError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LtvModel:
    A_seq: tuple
    B_seq: tuple
    position_dims: tuple = (0, 2)

    def __post_init__(self):
        A = tuple(np.atleast_2d(np.asarray(a, dtype=float)) for a in self.A_seq)
        B = tuple(np.atleast_2d(np.asarray(b, dtype=float)) for b in self.B_seq)
        if len(A) != len(B):
            raise ReachError("A and B sequences differ in length")
        for a, b in zip(A, B):
            if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
                raise ReachError("inconsistent A/B shapes")
            if not (np.isfinite(a).all() and np.isfinite(b).all()):
                raise ReachError("non-finite model matrices")
        object.__setattr__(self, "A_seq", A)
        object.__setattr__(self, "B_seq", B)
        object.__setattr__(self, "position_dims", tuple(self.position_dims))

    @property
    def nx(self) -> int:
        return self.A_seq[0].shape[0]

    @property
    def nu(self) -> int:
        return self.B_seq[0].shape[1]

    def __len__(self):
        return len(self.A_seq)

    @classmethod
    def double_integrator(cls, T: float, N: int) -> "LtvModel":
        A, B = sv_matrices(T)
        return cls((A,) * N, (B,) * N, (0, 2))

    def is_time_invariant(self) -> bool:
        return all(np.array_equal(a, self.A_seq[0]) and np.array_equal(b, self.B_seq[0])
                   for a, b in zip(self.A_seq, self.B_seq))


@dataclass(frozen=True, eq=False)
class ReachTube:
    R: tuple
    O: tuple

    def to_dict(self):
        return {"R": [r.vertices.tolist() for r in self.R],
                "O": [o.vertices.tolist() for o in self.O]}


def _check(m: LtvModel, x0, U: geo.VPolytope, N: int):
    if N < 1:
        raise ReachError("horizon must be at least 1")
    if len(m) < N:
        raise ReachError(f"model provides {len(m)} steps, horizon is {N}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != m.nx:
        raise geo.DimensionMismatch(f"state has {x0.shape[0]} entries, model {m.nx}")
    if U.dim != m.nu:
        raise geo.DimensionMismatch(f"control set has dimension {U.dim}, model {m.nu}")
    return x0


def forward_occupancy(m: LtvModel, x0, U: geo.VPolytope, N: int) -> ReachTube:
    """Propagate ``R[i+1] = A_i R[i] + B_i U`` from ``R[0] = {x0}`` in vertex form."""
    x0 = _check(m, x0, U, N)
    R = [geo.VPolytope.point(x0)]
    for i in range(N):
        R.append(geo.minkowski_sum(geo.affine_image(m.A_seq[i], R[-1]),
                                   geo.affine_image(m.B_seq[i], U)))
    O = [geo.project(r, m.position_dims) for r in R[1:]]
    return ReachTube(tuple(R), tuple(O))


def occupancy_2d(m: LtvModel, x0, U: geo.VPolytope, N: int) -> list:
    """Position occupancies only, propagated entirely in the plane.

    Uses ``P R[i] = P Phi(i,0) x0 + sum_k P Phi(i,k+1) B_k U``; every term is a
    planar linear image of ``U`` so no state-space hull is needed.  For
    time-invariant models the sum is accumulated incrementally.
    """
    x0 = _check(m, x0, U, N)
    P = np.eye(m.nx)[list(m.position_dims)]
    out = []
    if m.is_time_invariant():
        A, B = m.A_seq[0], m.B_seq[0]
        x = x0.copy()
        Ak = np.eye(m.nx)
        acc = None
        for _ in range(N):
            x = A @ x
            term = geo.affine_image(P @ Ak @ B, U)
            acc = term if acc is None else geo.minkowski_sum(acc, term)
            Ak = A @ Ak
            out.append(geo.VPolytope(acc.vertices + P @ x))
        return out
    x = x0.copy()
    mats = []  # Phi(i+1, k+1) B_k for k <= i
    for i in range(N):
        A, B = m.A_seq[i], m.B_seq[i]
        x = A @ x
        mats = [A @ M for M in mats]
        mats.append(B)
        acc = None
        for M in mats:
            term = geo.affine_image(P @ M, U)
            acc = term if acc is None else geo.minkowski_sum(acc, term)
        out.append(geo.VPolytope(acc.vertices + P @ x))
    return out


def occupancy_hrep(tube_or_sets, eps: float = geo.EPS_GEOM) -> list:
    """Halfspace form of each occupancy, inflating degenerate ones by ``eps``."""
    sets = tube_or_sets.O if isinstance(tube_or_sets, ReachTube) else tube_or_sets
    return [geo.hrep_2d_safe(o, eps) for o in sets]
