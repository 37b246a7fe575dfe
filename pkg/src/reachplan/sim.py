"""Closed-loop simulation of the ego vehicle among scripted obstacles.

Obstacles are double integrators driven by ground-frame accelerations drawn
from a hidden intended set.  The default obstacle controller is a saturated
PD tracker (a stand-in for an unspecified nonlinear MPC): the desired
acceleration plus a random perturbation is projected onto the hidden set.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import vehicle as veh
from .planner import MODES, ObstacleTrack, Planner, PlannerConfig, compute_d_min, safe_input
from .setlearn import AdmissibleSet, SetLearner

log = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).with_name("configs")


class ScenarioError(ValueError):
    pass


# --------------------------------------------------------------------------
# reference paths


@dataclass(frozen=True)
class TrackPath:
    """Closed polyline centerline; arc-length parametrised."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 3:
            raise ScenarioError("track needs at least 3 planar points")
        object.__setattr__(self, "points", p)

    @property
    def _seg(self):
        a = self.points
        b = np.roll(a, -1, axis=0)
        return a, b, np.linalg.norm(b - a, axis=1)

    @property
    def length(self) -> float:
        return float(self._seg[2].sum())

    def locate(self, p) -> float:
        """Arc length of the closest centerline point."""
        a, b, ln = self._seg
        d = b - a
        t = np.clip(np.einsum("ij,ij->i", np.asarray(p) - a, d) / (ln * ln), 0.0, 1.0)
        q = a + t[:, None] * d
        k = int(np.argmin(np.linalg.norm(q - p, axis=1)))
        return float(ln[:k].sum() + t[k] * ln[k])

    def at(self, s: float):
        """Point and unit tangent at arc length ``s`` (wrapped)."""
        a, b, ln = self._seg
        s = s % ln.sum()
        cum = np.concatenate([[0.0], np.cumsum(ln)])
        k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(ln) - 1)
        tng = (b[k] - a[k]) / ln[k]
        return a[k] + (s - cum[k]) * tng, tng

    @classmethod
    def rounded_rectangle(cls, half_x: float, half_y: float, radius: float,
                          arc_segments: int = 6) -> "TrackPath":
        """Counter-clockwise stadium-like loop centered at the origin."""
        cx, cy = half_x - radius, half_y - radius
        pts = []
        for k, (sx, sy) in enumerate(((1, 1), (-1, 1), (-1, -1), (1, -1))):
            for j in range(arc_segments + 1):
                ang = (k + j / arc_segments) * math.pi / 2
                pts.append((sx * cx + radius * math.cos(ang), sy * cy + radius * math.sin(ang)))
        return cls(np.array(pts))


def _offset_polygon(path: TrackPath, offset: float) -> geo.HPolytope:
    """Convex hull of the centerline pushed outward by ``offset``."""
    V = geo.hull_2d(path.points)
    return geo.hrep_from_vertices_2d(geo.inflate_2d(V, offset))


# --------------------------------------------------------------------------
# scenario


@dataclass
class SvSpec:
    init: tuple  # (p_x, p_y, heading, speed)
    ref: tuple  # target (x, y, heading, speed); speed used on tracks
    hidden: geo.VPolytope
    controller: str = "tracker"
    kp: float = 0.5
    kd: float = 1.0
    noise: float = 0.5
    noise_corr: float = 0.0  # AR(1) coefficient of the perturbation
    length: float = 0.36
    width: float = 0.23
    direction: int = 1  # on tracks: +1 counter-clockwise, -1 clockwise

    def initial_state(self) -> np.ndarray:
        px, py, hd, sp = self.init
        return np.array([px, sp * math.cos(hd), py, sp * math.sin(hd)])


@dataclass
class Scenario:
    name: str
    ego_init: tuple
    ego_ref: tuple  # (x_f, y_f, phi_f, v_f)
    svs: list
    drivable: geo.HPolytope
    admissible: AdmissibleSet
    duration: float = 13.75
    success_radius: float = 0.2
    seed: int = 0
    ego: veh.EgoParams = field(default_factory=veh.EgoParams)
    N: int = 10
    weights: dict = field(default_factory=dict)
    learning: str = "recursive"
    track: TrackPath | None = None
    stop_at_reference: bool = True
    sampler: dict | None = None
    obs_noise: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.N < 1:
            raise ScenarioError("horizon must be at least 1")
        for sv in self.svs:
            V = sv.hidden.vertices
            if not all(self.admissible.contains(v) for v in V):
                raise ScenarioError("hidden set must lie inside the admissible set")
            if not geo.contains(self.drivable, sv.init[:2]):
                raise ScenarioError("obstacle starts outside the drivable area")
        if not geo.contains(self.drivable, self.ego_init[:2]):
            raise ScenarioError("ego starts outside the drivable area")

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.ego.T))

    def planner_config(self, mode: str) -> PlannerConfig:
        d = [compute_d_min(self.ego.length, self.ego.width, s.length, s.width) for s in self.svs]
        return PlannerConfig(N=self.N, reference=tuple(self.ego_ref), drivable=self.drivable,
                             d_min=d[0] if d else compute_d_min(self.ego.length, self.ego.width, 0, 0),
                             ego=self.ego, mode=mode, **self.weights)


def _vpoly(spec) -> geo.VPolytope:
    if "box" in spec:
        w = np.asarray(spec["box"], dtype=float)
        return geo.box_vertices(-w, w)
    if "hexagon" in spec:
        return AdmissibleSet.hexagon(float(spec["hexagon"]), float(spec.get("phase", 0.0))).vertices()
    if "vertices" in spec:
        return geo.hull_2d(np.asarray(spec["vertices"], dtype=float))
    raise ScenarioError(f"cannot read polytope spec {spec!r}")


def _admissible(spec) -> AdmissibleSet:
    if "box" in spec:
        return AdmissibleSet.box(spec["box"])
    if "hexagon" in spec:
        return AdmissibleSet.hexagon(float(spec["hexagon"]), float(spec.get("phase", 0.0)))
    if "H" in spec:
        return AdmissibleSet(np.asarray(spec["H"], dtype=float))
    raise ScenarioError(f"cannot read admissible set spec {spec!r}")


def _num(x):
    if isinstance(x, str):
        # headings may be written as multiples of pi, e.g. "-0.25pi"
        if x.endswith("pi"):
            return float(x[:-2] or 1.0) * math.pi
        raise ScenarioError(f"bad number {x!r}")
    return float(x)


def scenario_from_dict(d: dict) -> Scenario:
    try:
        ego_kw = dict(d.get("ego", {}))
        for k in ("v_bounds", "a_bounds", "delta_bounds"):
            if k in ego_kw:
                ego_kw[k] = tuple(ego_kw[k])
        ego = veh.EgoParams(**ego_kw)
        track = None
        if "track" in d:
            t = d["track"]
            track = TrackPath.rounded_rectangle(t["half_x"], t["half_y"], t["radius"],
                                                t.get("arc_segments", 6))
        if "drivable" in d:
            dv = d["drivable"]
            if "box" in dv:
                D = geo.HPolytope.box(dv["box"][0], dv["box"][1])
            else:
                D = geo.hrep_from_vertices_2d(geo.hull_2d(np.asarray(dv["vertices"], dtype=float)))
        elif track is not None:
            D = _offset_polygon(track, float(d["track"].get("half_width", 0.5)))
        else:
            raise ScenarioError("scenario needs a drivable area")
        svs = []
        for s in d.get("svs", []):
            kw = {k: s[k] for k in ("controller", "kp", "kd", "noise", "noise_corr", "length", "width", "direction")
                  if k in s}
            svs.append(SvSpec(tuple(_num(v) for v in s["init"]), tuple(_num(v) for v in s["ref"]),
                              _vpoly(s["hidden"]), **kw))
        return Scenario(
            name=d.get("name", "scenario"),
            ego_init=tuple(_num(v) for v in d["ego_init"]),
            ego_ref=tuple(_num(v) for v in d["ego_ref"]),
            svs=svs, drivable=D, admissible=_admissible(d["admissible"]),
            duration=float(d.get("duration", 13.75)),
            success_radius=float(d.get("success_radius", 0.2)),
            seed=int(d.get("seed", 0)), ego=ego, N=int(d.get("N", 10)),
            weights={k: (tuple(v) if isinstance(v, list) else float(v))
                     for k, v in d.get("weights", {}).items()},
            learning=d.get("learning", "recursive"), track=track,
            stop_at_reference=bool(d.get("stop_at_reference", track is None)),
            sampler=d.get("sampler"), obs_noise=tuple(d.get("obs_noise", (0.0, 0.0))),
        )
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"malformed scenario: {e!r}") from e


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists() and (CONFIG_DIR / f"{path}.json").exists():
        p = CONFIG_DIR / f"{path}.json"
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ScenarioError(f"cannot read {path}: {e}") from e
    return scenario_from_dict(data)


# --------------------------------------------------------------------------
# obstacle controller


def _sv_target(sv: SvSpec, x, track: TrackPath | None):
    p = np.array([x[0], x[2]])
    if track is None:
        return np.array(sv.ref[:2], dtype=float), np.zeros(2)
    s = track.locate(p)
    speed = sv.ref[3]
    q, tng = track.at(s + sv.direction * max(speed, 0.2) * 1.0)
    return q, sv.direction * speed * tng


def sv_step(x, sv: SvSpec, T: float, rng: np.random.Generator, track: TrackPath | None = None,
            scripted_noise=None):
    """Advance one obstacle by one step; returns (next state, applied input)."""
    x = np.asarray(x, dtype=float)
    p = np.array([x[0], x[2]])
    v = np.array([x[1], x[3]])
    if sv.controller == "planner":
        a_des = _nested_planner_accel(x, sv, T)
    else:
        target, v_target = _sv_target(sv, x, track)
        if track is None:
            a_des = sv.kp * (target - p) - sv.kd * v
        else:
            a_des = sv.kp * (target - p - v_target) + sv.kd * (v_target - v)
    V = sv.hidden.vertices
    span = (V.max(axis=0) - V.min(axis=0)) / 2.0
    w = rng.uniform(-1.0, 1.0, 2) if scripted_noise is None else np.asarray(scripted_noise)
    u = geo.project_point_2d(a_des + sv.noise * span * w, sv.hidden)
    A, B = veh.sv_matrices(T)
    return A @ x + B @ u, u


def _nested_planner_accel(x, sv: SvSpec, T: float):
    """Obstacle driven by an obstacle-free copy of the ego planner (point-mass)."""
    ego = veh.EgoParams(T=T, length=sv.length, width=sv.width, reduced=True,
                        a_bounds=(-float(np.abs(sv.hidden.vertices).max()),
                                  float(np.abs(sv.hidden.vertices).max())))
    speed = math.hypot(x[1], x[3])
    heading = math.atan2(x[3], x[1]) if speed > 1e-6 else sv.init[2]
    cfg = PlannerConfig(N=10, reference=tuple(sv.ref), ego=ego,
                        d_min=1.0, max_iter=50)
    from .planner import build_and_solve

    res = build_and_solve(np.array([x[0], x[2], heading, speed]), [], cfg)
    v_next = res.states[1, 3] * np.array([math.cos(res.states[1, 2]), math.sin(res.states[1, 2])])
    return (v_next - np.array([x[1], x[3]])) / T


def sv_heading(x, prev: float) -> float:
    return math.atan2(x[3], x[1]) if math.hypot(x[1], x[3]) > 1e-3 else prev


# --------------------------------------------------------------------------
# closed loop


TRACE_COLUMNS = ("k", "t", "ego_x", "ego_y", "ego_phi", "ego_v", "ego_a", "delta", "eta",
                 "sv_x", "sv_y", "sv_heading", "sv_ax", "sv_ay", "rho", "area",
                 "clearance", "d_ref", "cost", "slack", "converged", "iterations")


@dataclass
class Trace:
    scenario: str
    mode: str
    seed: int
    T: float
    rows: list = field(default_factory=list)
    occupancies: list = field(default_factory=list)
    collided: bool = False
    outside: bool = False

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow([_cell(r[c]) for c in TRACE_COLUMNS])
        return buf.getvalue()

    def to_dict(self, polytopes: bool = False):
        d = {"scenario": self.scenario, "mode": self.mode, "seed": self.seed, "T": self.T,
             "rows": [{k: _jsonable(v) for k, v in r.items()} for r in self.rows]}
        if polytopes:
            d["occupancies"] = self.occupancies
        return d


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return "nan" if math.isnan(v) else format(v, ".10g")


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    return None if not math.isfinite(v) else v


def footprint_clearance(ego_x, ego: veh.EgoParams, sv_pos, sv_head: float, sv: SvSpec) -> float:
    a = geo.rectangle(ego_x[:2], ego_x[2], ego.length, ego.width)
    b = geo.rectangle(sv_pos, sv_head, sv.length, sv.width)
    return geo.distance_2d(a, b)


def _project_admissible(u, adm: AdmissibleSet):
    if adm.contains(u):
        return u
    return geo.project_point_2d(u, adm.vertices())


def run_closed_loop(scn: Scenario, mode: str = "proposed", seed: int | None = None,
                    sv_inits=None, emit_polytopes: bool = False) -> Trace:
    """Simulate until the duration limit, a collision, or arrival."""
    if mode not in MODES:
        raise ScenarioError(f"unknown mode {mode!r}")
    seed = scn.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    # obstacle randomness is drawn up front so every mode sees the same stream
    n_steps = scn.steps
    sv_noise = rng.uniform(-1.0, 1.0, (len(scn.svs), n_steps, 2))
    for j, sv in enumerate(scn.svs):
        c = sv.noise_corr
        for k in range(1, n_steps):
            sv_noise[j, k] = c * sv_noise[j, k - 1] + math.sqrt(1.0 - c * c) * sv_noise[j, k]
    obs_rng = np.random.default_rng(seed + 1_000_003)
    noise = veh.ObservationNoise(scn.obs_noise[0], scn.obs_noise[1], obs_rng)

    T = scn.ego.T
    cfg = scn.planner_config(mode)
    planner = Planner(cfg)
    x = np.asarray(scn.ego_init, dtype=float)
    sv_x = [np.asarray(s, dtype=float) if s is not None else sv.initial_state()
            for sv, s in zip(scn.svs, sv_inits or [None] * len(scn.svs))]
    heads = [sv.init[2] for sv in scn.svs]
    d_mins = [compute_d_min(scn.ego.length, scn.ego.width, sv.length, sv.width) for sv in scn.svs]
    learners = [SetLearner(scn.admissible, method=scn.learning) for _ in scn.svs]
    prev_obs = [None] * len(scn.svs)
    sv_u = [np.zeros(2) for _ in scn.svs]
    tr = Trace(scn.name, mode, seed, T)

    for k in range(n_steps + 1):
        tracks = []
        for j, sv in enumerate(scn.svs):
            obs = noise.apply(veh.SvObservation((sv_x[j][0], sv_x[j][2]), (sv_x[j][1], sv_x[j][3]),
                                                heads[j], k))
            if prev_obs[j] is not None:
                u_est = veh.estimate_sv_input(prev_obs[j], obs, T)
                learners[j].update(_project_admissible(u_est, scn.admissible))
            prev_obs[j] = obs
            tracks.append(ObstacleTrack(obs.state(), scn.admissible, learners[j].learned, d_mins[j]))

        if scn.track is not None:
            planner.cfg.reference = _track_reference(scn, x)
        ref = np.asarray(planner.cfg.reference, dtype=float)
        d_ref = float(np.hypot(x[0] - ref[0], x[1] - ref[1]))
        clear = [footprint_clearance(x, scn.ego, (s[0], s[2]), h, sv)
                 for s, h, sv in zip(sv_x, heads, scn.svs)]
        clearance = min(clear) if clear else math.inf
        inside = geo.contains(scn.drivable, x[:2], tol=1e-6)
        row = {"k": k, "t": k * T, "ego_x": x[0], "ego_y": x[1], "ego_phi": x[2], "ego_v": x[3],
               "ego_a": x[4] if x.shape[0] > 4 else math.nan,
               "sv_x": sv_x[0][0] if scn.svs else math.nan,
               "sv_y": sv_x[0][2] if scn.svs else math.nan,
               "sv_heading": heads[0] if scn.svs else math.nan,
               "sv_ax": sv_u[0][0] if scn.svs else math.nan,
               "sv_ay": sv_u[0][1] if scn.svs else math.nan,
               "rho": learners[0].learned.rho if scn.svs else math.nan,
               "area": learners[0].learned.area() if scn.svs else math.nan,
               "clearance": clearance, "d_ref": d_ref}
        tr.rows.append(row)
        if not inside:
            tr.outside = True
        if clearance <= 0.0:
            tr.collided = True
        last = k == n_steps or tr.collided or tr.outside
        arrived = scn.stop_at_reference and d_ref <= scn.success_radius
        if last or arrived:
            row.update(delta=math.nan, eta=math.nan, cost=0.0, slack=0.0, converged=True,
                       iterations=0)
            break

        res = planner.step(x, tracks)
        row.update(delta=res.inputs[0, 0], eta=res.inputs[0, 1], cost=res.cost,
                   slack=float(res.slacks.max()) if res.slacks.size else 0.0,
                   converged=res.converged, iterations=res.iterations)
        if emit_polytopes:
            tr.occupancies.append([[P.to_dict() for P in occ] for occ in res.occupancies])
        x = veh.ego_step_rk4(x, safe_input(x, res.inputs[0], scn.ego), scn.ego)
        for j, sv in enumerate(scn.svs):
            sv_x[j], sv_u[j] = sv_step(sv_x[j], sv, T, rng, scn.track, scripted_noise=sv_noise[j, k])
            heads[j] = sv_heading(sv_x[j], heads[j])
    return tr


def _track_reference(scn: Scenario, x):
    """Moving target on the centerline ``N`` steps ahead at the reference speed."""
    v_f = scn.ego_ref[3]
    s = scn.track.locate(x[:2])
    q, tng = scn.track.at(s + v_f * scn.N * scn.ego.T)
    return (float(q[0]), float(q[1]), float(math.atan2(tng[1], tng[0])), float(v_f))


# --------------------------------------------------------------------------
# metrics


@dataclass
class Metrics:
    collision_free: bool
    complete: bool
    min_clearance: float
    tau_ref: float
    cost_sum: float
    nonconverged: int = 0
    steps: int = 0

    def to_dict(self):
        return {k: _jsonable(v) for k, v in self.__dict__.items()}


def evaluate(trace: Trace, scn: Scenario) -> Metrics:
    clear = trace.column("clearance")
    inside = all(geo.contains(scn.drivable, (r["ego_x"], r["ego_y"]), tol=1e-6) for r in trace.rows)
    min_clear = float(clear.min()) if clear.size else math.inf
    collision_free = bool(min_clear > 0.0 and inside)
    d_ref = trace.column("d_ref")
    hit = np.flatnonzero(d_ref <= scn.success_radius)
    tau = float(trace.rows[hit[0]]["t"]) if hit.size else math.nan
    if scn.track is not None:
        # no terminal target on a loop: completing means surviving the whole duration
        complete = collision_free and len(trace.rows) == scn.steps + 1
        tau = math.nan
    else:
        complete = collision_free and hit.size > 0 and tau <= scn.duration + 1e-9
    conv = [r["converged"] for r in trace.rows[:-1]]
    return Metrics(collision_free, bool(complete), min_clear, tau,
                   float(trace.column("cost").sum()), int(sum(not c for c in conv)), len(conv))


# --------------------------------------------------------------------------
# Monte Carlo


def sample_sv_inits(scn: Scenario, seed: int):
    """Initial obstacle states for one run; uniform over the configured box."""
    rng = np.random.default_rng([seed, 7])
    out = []
    smp = scn.sampler or {}
    for sv in scn.svs:
        px, py, hd, sp = sv.init
        dx, dy = smp.get("position_half_width", (0.0, 0.0))
        dh = smp.get("heading_half_width", 0.0)
        u = rng.uniform(-1.0, 1.0, 3)
        h = hd + dh * u[2]
        out.append(np.array([px + dx * u[0], sp * math.cos(h), py + dy * u[1], sp * math.sin(h)]))
    return out


@dataclass
class RunRecord:
    index: int
    seed: int
    mode: str
    metrics: Metrics


TABLE_COLUMNS = ("mode", "runs", "collision_free_rate", "complete_rate",
                 "min_d_mean", "min_d_min", "tau_mean", "tau_max", "cost_mean", "cost_max")


def monte_carlo(scn: Scenario, n: int, modes=MODES, base_seed: int | None = None,
                workers: int = 1):
    """Run ``n`` sampled scenarios per mode with common random numbers."""
    if n < 1:
        raise ScenarioError("n must be at least 1")
    base = scn.seed if base_seed is None else int(base_seed)
    jobs = [(i, base + i, m) for i in range(n) for m in modes]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            recs = list(ex.map(_mc_job, [(scn, *j) for j in jobs]))
    else:
        recs = [_mc_job((scn, *j)) for j in jobs]
    recs.sort(key=lambda r: (r.index, modes.index(r.mode)))
    return recs, aggregate(recs, modes)


def _mc_job(args):
    scn, i, seed, mode = args
    inits = sample_sv_inits(scn, seed)
    sampled = replace(scn, svs=[replace(sv, init=(x[0], x[2], sv.init[2], sv.init[3]))
                                for sv, x in zip(scn.svs, inits)])
    tr = run_closed_loop(sampled, mode, seed, sv_inits=inits)
    return RunRecord(i, seed, mode, evaluate(tr, sampled))


def aggregate(recs, modes=MODES) -> list:
    """Table rows: rates over all runs, statistics over completed runs."""
    rows = []
    for m in modes:
        rs = [r.metrics for r in recs if r.mode == m]
        n = len(rs)
        free = [r for r in rs if r.collision_free]
        done = [r for r in free if r.complete]
        d = np.array([r.min_clearance for r in done])
        tau = np.array([r.tau_ref for r in done if math.isfinite(r.tau_ref)])
        cost = np.array([r.cost_sum for r in done])

        def stat(a, f):
            return float(f(a)) if a.size else math.nan

        rows.append({"mode": m, "runs": n,
                     "collision_free_rate": len(free) / n if n else math.nan,
                     "complete_rate": len(done) / len(free) if free else 0.0,
                     "min_d_mean": stat(d, np.mean), "min_d_min": stat(d, np.min),
                     "tau_mean": stat(tau, np.mean), "tau_max": stat(tau, np.max),
                     "cost_mean": stat(cost, np.mean), "cost_max": stat(cost, np.max)})
    return rows


def table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else _cell(r[c]) for c in TABLE_COLUMNS])
    return buf.getvalue()


def runs_csv(recs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("index", "seed", "mode", "collision_free", "complete", "min_clearance",
            "tau_ref", "cost_sum", "nonconverged", "steps")
    w.writerow(cols)
    for r in recs:
        m = r.metrics
        w.writerow([r.index, r.seed, r.mode, int(m.collision_free), int(m.complete),
                    _cell(m.min_clearance), _cell(m.tau_ref), _cell(m.cost_sum),
                    m.nonconverged, m.steps])
    return buf.getvalue()


# --------------------------------------------------------------------------
# learning and reachability demos


def switch_stream(adm: AdmissibleSet, length: int, switch: int, mild: float, aggressive: float,
                  rng: np.random.Generator) -> np.ndarray:
    """Inputs uniform over ``mild * U`` before ``switch`` and ``aggressive * U`` after."""
    V = adm.vertices().vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    out = []
    while len(out) < length:
        u = rng.uniform(lo, hi)
        if not adm.contains(u):
            continue
        out.append(u * (mild if len(out) < switch else aggressive))
    return np.array(out).reshape(length, adm.n_u)


@dataclass
class CoverageResult:
    fraction: float
    end_points: np.ndarray
    trajectories: np.ndarray  # (rollouts, N+1, 2)
    occupancies: list
    learned: object


def _ground_velocity(x, delta, p: veh.EgoParams):
    b = veh.slip_angle(delta, p)
    return x[3] * np.array([math.cos(x[2] + b), math.sin(x[2] + b)])


class _HiddenPolicy:
    """Single-track driver: AR(1) steering and mean-reverting jerk within a hidden box."""

    def __init__(self, delta_max, eta_max, rng, corr=0.8, v_ref=0.6):
        self.delta_max, self.eta_max = delta_max, eta_max
        self.rng, self.corr, self.v_ref = rng, corr, v_ref
        self.delta = 0.0

    def __call__(self, x):
        c = self.corr
        w = self.rng.uniform(-1.0, 1.0, 2)
        self.delta = float(np.clip(c * self.delta + (1 - c) * self.delta_max * 3 * w[0],
                                   -self.delta_max, self.delta_max))
        eta = -1.0 * x[4] - 0.5 * (x[3] - self.v_ref) + self.eta_max * w[1]
        return np.array([self.delta, float(np.clip(eta, -self.eta_max, self.eta_max))])


def reach_coverage(delta_max: float = 0.2, eta_max: float = 0.4, warmup: int = 100,
                   rollouts: int = 200, N: int = 10, T: float = 0.25, seed: int = 0,
                   admissible: AdmissibleSet | None = None, v0: float = 0.6) -> CoverageResult:
    """Learn from a warm-up drive, predict occupancy, and test it on fresh rollouts.

    The vehicle is the nonlinear single-track model; the predictor only sees
    finite-difference ground accelerations and uses the double integrator.
    """
    if N < 1:
        raise ScenarioError("horizon must be at least 1")
    from .reach import LtvModel, occupancy_2d

    p = veh.EgoParams(T=T, v_bounds=(-10.0, 10.0), a_bounds=(-10.0, 10.0),
                      delta_bounds=(-0.5, 0.5))
    adm = admissible or AdmissibleSet.box([2.0, 2.0])
    rng = np.random.default_rng(seed)
    policy = _HiddenPolicy(delta_max, eta_max, rng, v_ref=v0)
    learner = SetLearner(adm)
    x = np.array([0.0, 0.0, 0.0, v0, 0.0])
    u = policy(x)
    vel = _ground_velocity(x, u[0], p)
    for _ in range(warmup):
        x = veh.ego_step_rk4(x, u, p)
        u = policy(x)
        vel_new = _ground_velocity(x, u[0], p)
        learner.update(_project_admissible((vel_new - vel) / T, adm))
        vel = vel_new
    state = np.array([x[0], vel[0], x[1], vel[1]])
    O = occupancy_2d(LtvModel.double_integrator(T, N), state, learner.learned.vertices(), N)
    trajs = []
    for _ in range(rollouts):
        pol = _HiddenPolicy(delta_max, eta_max, rng, v_ref=v0)
        pol.delta = u[0]
        xs, ur = [x.copy()], u
        for i in range(N):
            xs.append(veh.ego_step_rk4(xs[-1], ur, p))
            ur = pol(xs[-1])
        trajs.append(np.array(xs)[:, :2])
    trajs = np.array(trajs)
    ends = trajs[:, N]
    last = O[N - 1]
    inside = [geo.point_distance_2d(e, last) <= 1e-9 for e in ends]
    return CoverageResult(float(np.mean(inside)), ends, trajs, O, learner.learned)
