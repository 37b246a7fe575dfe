"""Small-dimension convex polytopes in halfspace and vertex form.

Tolerances are fixed module-wide: membership ``MEMBER_TOL``, degeneracy
``DEGEN_TOL``, orientation epsilon ``ORIENT_EPS`` (inside the kernels).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from . import kernels

MEMBER_TOL = 1e-9
DEGEN_TOL = 1e-12
EPS_GEOM = 1e-6


class GeometryError(ValueError):
    pass


class DimensionMismatch(GeometryError):
    pass


class EmptySet(GeometryError):
    pass


class Unbounded(GeometryError):
    pass


class DegenerateHull(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class HPolytope:
    """The set ``{x : H x <= b}``."""

    H: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if H.shape[0] != b.shape[0]:
            raise DimensionMismatch(f"H has {H.shape[0]} rows but b has {b.shape[0]}")
        if np.isnan(H).any() or np.isnan(b).any():
            raise GeometryError("NaN in halfspace data")
        H.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.H.shape[1]

    def to_dict(self):
        return {"H": self.H.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["H"], dtype=float), np.asarray(d["b"], dtype=float))

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.shape[0]
        H = np.vstack([np.eye(n), -np.eye(n)])
        return cls(H, np.concatenate([upper, -lower]))


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of ``vertices`` (k x dim).  2-D vertices are kept CCW."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.shape[0] == 0:
            raise EmptySet("a VPolytope needs at least one vertex")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.vertices.shape[0]

    def to_dict(self):
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["vertices"], dtype=float))

    @classmethod
    def point(cls, x):
        return cls(np.asarray(x, dtype=float).reshape(1, -1))


def _check_dim(n, m, what="dimension"):
    if n != m:
        raise DimensionMismatch(f"{what} mismatch: {n} != {m}")


def contains(P: HPolytope, x, tol: float = MEMBER_TOL) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_dim(P.dim, x.shape[0])
    return bool(np.all(P.H @ x <= P.b + tol))


def hull_2d(points) -> VPolytope:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 2:
        raise DimensionMismatch("hull_2d expects 2-D points")
    return VPolytope(pts[kernels.hull_2d_indices(pts)])


def hull_nd_indices(points, tol: float = 1e-10) -> np.ndarray:
    """Hull vertex indices in any dimension.

    The points are first reduced to their affine hull, so flat sets (a
    2-D set living in 4-D, say) are handled without a full-dimensional hull.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n == 1:
        return np.array([0])
    center = pts.mean(axis=0)
    X = pts - center
    scale = max(1.0, float(np.abs(pts).max()))
    _, s, vt = np.linalg.svd(X, full_matrices=False)
    r = int(np.sum(s > tol * scale * max(1.0, np.sqrt(n))))
    if r == 0:
        return np.array([0])
    Y = X @ vt[:r].T
    if r == 1:
        return np.unique([int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))])
    if r == 2:
        return kernels.hull_2d_indices(Y)
    from scipy.spatial import ConvexHull

    return np.sort(ConvexHull(Y).vertices)


def hull(points) -> VPolytope:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] == 2:
        return hull_2d(pts)
    if pts.shape[1] == 1:
        return VPolytope(np.array([[pts[:, 0].min()], [pts[:, 0].max()]])
                         if pts[:, 0].max() - pts[:, 0].min() > DEGEN_TOL
                         else pts[:1])
    return VPolytope(pts[hull_nd_indices(pts)])


def _bounded_2d(H) -> bool:
    # bounded iff the normal directions leave no angular gap of pi or more
    nz = H[np.linalg.norm(H, axis=1) > DEGEN_TOL]
    if nz.shape[0] < 3:
        return False
    ang = np.sort(np.arctan2(nz[:, 1], nz[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    return bool(gaps.max() < np.pi - 1e-12)


def vertices_2d(P: HPolytope) -> VPolytope:
    """Exact vertex set of a bounded 2-D HPolytope, counter-clockwise."""
    _check_dim(P.dim, 2)
    H, b = P.H, P.b
    if not _bounded_2d(H):
        raise Unbounded("halfspaces do not bound a region")
    cands = []
    for i, j in itertools.combinations(range(H.shape[0]), 2):
        M = H[[i, j]]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) <= DEGEN_TOL:
            continue
        x = np.linalg.solve(M, b[[i, j]])
        scale = 1.0 + np.abs(b).max()
        if np.all(H @ x <= b + MEMBER_TOL * scale):
            cands.append(x)
    if not cands:
        raise EmptySet("halfspaces have empty intersection")
    return hull_2d(np.array(cands))


def hrep_from_vertices_2d(V: VPolytope) -> HPolytope:
    """One unit-normal halfspace per edge of a full-dimensional 2-D polygon."""
    _check_dim(V.dim, 2)
    hv = hull_2d(V.vertices).vertices
    if area_2d(VPolytope(hv)) <= DEGEN_TOL:
        raise DegenerateHull("polygon has (near) zero area")
    nxt = np.roll(hv, -1, axis=0)
    edge = nxt - hv
    normals = np.column_stack([edge[:, 1], -edge[:, 0]])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    b = np.einsum("ij,ij->i", normals, hv)
    return HPolytope(normals, b)


def inflate_2d(V: VPolytope, eps: float = EPS_GEOM) -> VPolytope:
    """Minkowski sum with the box ``[-eps, eps]^2``."""
    box = np.array([[-eps, -eps], [eps, -eps], [eps, eps], [-eps, eps]])
    return minkowski_sum(V, VPolytope(box))


def hrep_2d_safe(V: VPolytope, eps: float = EPS_GEOM) -> HPolytope:
    """``hrep_from_vertices_2d`` with the degenerate-hull inflation applied."""
    try:
        return hrep_from_vertices_2d(V)
    except DegenerateHull:
        return hrep_from_vertices_2d(inflate_2d(V, eps))


def affine_image(A, V: VPolytope, c=None) -> VPolytope:
    """``{A v + c : v in V}``, re-hulled."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _check_dim(A.shape[1], V.dim, "matrix columns vs polytope dimension")
    pts = V.vertices @ A.T
    if c is not None:
        pts = pts + np.asarray(c, dtype=float)
    return hull(pts)


def minkowski_sum(P: VPolytope, Q: VPolytope) -> VPolytope:
    _check_dim(P.dim, Q.dim)
    sums = (P.vertices[:, None, :] + Q.vertices[None, :, :]).reshape(-1, P.dim)
    return hull(sums)


def project(V: VPolytope, dims) -> VPolytope:
    dims = list(dims)
    if not dims:
        raise GeometryError("projection onto no coordinates")
    if min(dims) < 0 or max(dims) >= V.dim:
        raise DimensionMismatch(f"dims {dims} out of range for dimension {V.dim}")
    return hull(V.vertices[:, dims])


def translate(P: HPolytope, y) -> HPolytope:
    y = np.asarray(y, dtype=float).reshape(-1)
    _check_dim(P.dim, y.shape[0])
    return HPolytope(P.H, P.b + P.H @ y)


def area_2d(V: VPolytope) -> float:
    _check_dim(V.dim, 2)
    v = V.vertices
    if v.shape[0] < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))) / 2.0)


def distance_2d(P: VPolytope, Q: VPolytope) -> float:
    """Euclidean distance between two convex polygons (0 when they meet)."""
    _check_dim(P.dim, 2)
    _check_dim(Q.dim, 2)
    a = hull_2d(P.vertices).vertices
    b = hull_2d(Q.vertices).vertices
    return float(kernels.polygon_distance(a, b))


def point_distance_2d(p, V: VPolytope) -> float:
    return distance_2d(VPolytope.point(p), V)


def contains_v(V: VPolytope, x, tol: float = 1e-7) -> bool:
    """Membership test for vertex form.

    2-D uses the polygon distance; higher dimensions solve a small
    convex-combination LP.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    _check_dim(V.dim, x.shape[0])
    if V.dim == 2:
        return point_distance_2d(x, V) <= tol
    if V.dim == 1:
        return bool(V.vertices.min() - tol <= x[0] <= V.vertices.max() + tol)
    from .linprog import LpProblem, solve_lp

    k, d = V.vertices.shape
    # min sum(s+ + s-)  s.t.  V^T lam + s+ - s- = x, sum(lam) = 1
    c = np.concatenate([np.zeros(k), np.ones(2 * d)])
    A_eq = np.zeros((d + 1, k + 2 * d))
    A_eq[:d, :k] = V.vertices.T
    A_eq[:d, k:k + d] = np.eye(d)
    A_eq[:d, k + d:] = -np.eye(d)
    A_eq[d, :k] = 1.0
    b_eq = np.concatenate([x, [1.0]])
    sol = solve_lp(LpProblem(c=c, A_eq=A_eq, b_eq=b_eq,
                             lb=np.zeros(k + 2 * d), ub=np.full(k + 2 * d, np.inf)))
    return sol.status == "optimal" and sol.objective <= tol


def box_vertices(lower, upper) -> VPolytope:
    (x0, y0), (x1, y1) = lower, upper
    return VPolytope(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))


def rectangle(center, heading: float, length: float, width: float) -> VPolytope:
    """Oriented vehicle footprint."""
    c, s = np.cos(heading), np.sin(heading)
    R = np.array([[c, -s], [s, c]])
    local = np.array([[-length, -width], [length, -width],
                      [length, width], [-length, width]]) / 2.0
    return VPolytope(local @ R.T + np.asarray(center, dtype=float))


def project_point_2d(x, V: VPolytope) -> np.ndarray:
    """Euclidean projection of ``x`` onto a 2-D polygon."""
    x = np.asarray(x, dtype=float)
    v = hull_2d(V.vertices).vertices
    if v.shape[0] >= 3:
        Hp = hrep_from_vertices_2d(VPolytope(v))
        if contains(Hp, x):
            return x.copy()
    if v.shape[0] == 1:
        return v[0].copy()
    best, best_d = None, np.inf
    n = v.shape[0]
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        ab = b - a
        den = ab @ ab
        t = 0.0 if den <= 0 else float(np.clip((x - a) @ ab / den, 0.0, 1.0))
        q = a + t * ab
        d = np.linalg.norm(x - q)
        if d < best_d:
            best, best_d = q, d
    return best


def _fmt(x: float) -> str:
    if not np.isfinite(x):
        raise GeometryError("non-finite number in serialization")
    return format(float(x), ".17g")


def _dump(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_dump(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_dump(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, (HPolytope, VPolytope)):
        obj = obj.to_dict()
    return _dump(obj)


def loads(text: str):
    d = json.loads(text)
    if "H" in d and "b" in d:
        return HPolytope.from_dict(d)
    if "vertices" in d:
        return VPolytope.from_dict(d)
    return d
