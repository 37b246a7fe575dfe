import dataclasses
import math

import numpy as np
import pytest

from reachplan import geometry as geo
from reachplan import sim
from reachplan.planner import DMPC, MODES, PROPOSED, RMPC
from reachplan.setlearn import AdmissibleSet

HIDDEN = geo.box_vertices([-0.6, -0.6], [0.6, 0.6])


def _sv(**kw):
    base = dict(init=(1.0, 1.0, 0.0, 0.0), ref=(1.0, 1.0, 0.0, 0.0), hidden=HIDDEN, noise=0.0)
    base.update(kw)
    return sim.SvSpec(**base)


def _scenario(svs, **kw):
    base = dict(name="t", ego_init=(0.2, 0.2, 0.0, 0.0, 0.0), ego_ref=(2.0, 0.5, 0.0, 0.0),
                svs=svs, drivable=geo.HPolytope.box([-1, -1], [30, 8]),
                admissible=AdmissibleSet.box([1.0, 1.0]), duration=6.0)
    base.update(kw)
    return sim.Scenario(**base)


# -- obstacle controller --------------------------------------------------------

def test_sv_at_rest_on_target_stays():
    sv = _sv()
    x = sv.initial_state()
    xn, u = sim.sv_step(x, sv, 0.25, np.random.default_rng(0))
    assert np.allclose(u, 0) and np.allclose(xn, x)


def test_sv_input_is_projection_onto_hidden_set(rng):
    sv = _sv(ref=(20.0, -15.0, 0.0, 0.0), kp=1.0)
    x = sv.initial_state()
    _, u = sim.sv_step(x, sv, 0.25, rng)
    a_des = sv.kp * (np.array([20.0, -15.0]) - [1, 1])
    assert geo.contains_v(HIDDEN, u, 1e-12)
    # nothing in the hidden set is closer to the desired acceleration
    W = rng.uniform(-0.6, 0.6, (2000, 2))
    assert np.linalg.norm(a_des - u) <= np.linalg.norm(a_des - W, axis=1).min() + 1e-12
    assert np.allclose(u, [0.6, -0.6])


def test_sv_tracker_converges_along_straight_line():
    sv = _sv(ref=(4.0, 1.0, 0.0, 0.0), kp=0.5, kd=1.5, hidden=geo.box_vertices([-2, -2], [2, 2]))
    x = sv.initial_state()
    rng = np.random.default_rng(0)
    err = []
    for _ in range(80):
        x, _ = sim.sv_step(x, sv, 0.25, rng)
        err.append(abs(4.0 - x[0]))
    tail = np.array(err[4:])
    assert np.all(np.diff(tail) <= 1e-12) and tail[-1] < 0.05


def test_nested_planner_controller_moves_toward_target():
    sv = _sv(ref=(2.0, 1.0, 0.0, 0.0), controller="planner")
    x = sv.initial_state()
    for _ in range(4):
        x, u = sim.sv_step(x, sv, 0.25, np.random.default_rng(0))
        assert geo.contains_v(HIDDEN, u, 1e-9)
    assert x[0] > 1.0


def test_sv_heading_holds_when_stopped():
    assert sim.sv_heading([0, 0, 0, 0], 1.2) == 1.2
    assert sim.sv_heading([0, 0, 0, 1], 0.0) == pytest.approx(math.pi / 2)


# -- scenarios ----------------------------------------------------------------

@pytest.mark.parametrize("name", ["reach_avoid", "encounter", "overtaking", "evasion"])
def test_bundled_scenarios_load(name):
    scn = sim.load_scenario(name)
    assert scn.svs and scn.steps > 0
    cfg = scn.planner_config(PROPOSED)
    assert cfg.d_min == pytest.approx(0.39395, abs=1e-5)
    if name == "reach_avoid":
        assert scn.ego_init == (0.2, 0.2, 0.0, 0.0, 0.0)
        assert scn.ego_ref == (7.0, 5.5, 0.0, 0.0)
        assert scn.svs[0].init[2] == pytest.approx(-math.pi / 4)
        assert scn.duration == 13.75 and scn.success_radius == 0.2
    else:
        assert scn.track is not None and not scn.stop_at_reference


def test_scenario_validation():
    with pytest.raises(sim.ScenarioError):
        _scenario([_sv(hidden=geo.box_vertices([-2, -2], [2, 2]))])
    with pytest.raises(sim.ScenarioError):
        _scenario([_sv(init=(50.0, 1.0, 0.0, 0.0))])
    with pytest.raises(sim.ScenarioError):
        sim.scenario_from_dict({"ego_init": [0, 0, 0, 0, 0]})
    with pytest.raises(sim.ScenarioError):
        sim.load_scenario("/nonexistent/scenario.json")


def test_config_number_strings():
    assert sim._num("0.25pi") == pytest.approx(math.pi / 4)
    assert sim._num("-1pi") == pytest.approx(-math.pi)
    assert sim._num(2) == 2.0


def test_track_path_geometry():
    tp = sim.TrackPath.rounded_rectangle(2.5, 2.5, 1.5, 6)
    assert tp.length > 0
    q, t = tp.at(0.3)
    assert tp.locate(q) == pytest.approx(0.3, abs=1e-9)
    assert np.linalg.norm(t) == pytest.approx(1.0)
    q2, _ = tp.at(0.3 + tp.length)
    assert np.allclose(q, q2)


# -- closed loop ----------------------------------------------------------------

def test_no_obstacle_reaches_reference():
    scn = _scenario([])
    tr = sim.run_closed_loop(scn, PROPOSED, 0)
    m = sim.evaluate(tr, scn)
    assert m.complete and math.isfinite(m.tau_ref) and m.tau_ref <= scn.duration


def test_far_frozen_obstacle_does_not_change_the_ego():
    free = _scenario([], duration=3.0, stop_at_reference=False)
    far = _scenario([_sv(init=(25.0, 7.0, 0.0, 0.0), ref=(25.0, 7.0, 0.0, 0.0),
                         hidden=geo.VPolytope.point([0.0, 0.0]))], duration=3.0,
                    stop_at_reference=False)
    a = sim.run_closed_loop(free, DMPC, 0)
    b = sim.run_closed_loop(far, DMPC, 0)
    for col in ("ego_x", "ego_y", "ego_phi", "ego_v"):
        assert np.allclose(a.column(col), b.column(col), atol=1e-6)


def test_same_seed_same_trace():
    scn = _scenario([_sv(init=(1.5, 0.3, 0.0, 0.0), ref=(1.5, 3.0, 0.0, 0.0), noise=1.0)],
                    duration=2.0)
    a = sim.run_closed_loop(scn, PROPOSED, 4)
    b = sim.run_closed_loop(scn, PROPOSED, 4)
    assert a.to_csv() == b.to_csv()


def test_trace_bookkeeping():
    scn = _scenario([_sv(init=(1.5, 0.3, 0.0, 0.0), ref=(1.5, 3.0, 0.0, 0.0), noise=1.0)],
                    duration=3.0)
    tr = sim.run_closed_loop(scn, PROPOSED, 1, emit_polytopes=True)
    area = tr.column("area")
    assert np.all(np.diff(area) >= -1e-12)
    m = sim.evaluate(tr, scn)
    assert m.cost_sum == pytest.approx(tr.column("cost").sum())
    assert len(tr.occupancies) == len(tr.rows) - 1
    assert tr.to_csv().splitlines()[0].split(",") == list(sim.TRACE_COLUMNS)
    d = tr.to_dict(polytopes=True)
    assert d["mode"] == PROPOSED and "occupancies" in d


def _synthetic(clear, inside=True, d_ref=None):
    rows = []
    for k, c in enumerate(clear):
        rows.append({"k": k, "t": 0.25 * k, "ego_x": 1.0 if inside else -50.0, "ego_y": 1.0,
                     "clearance": c, "d_ref": 1.0 if d_ref is None else d_ref[k],
                     "cost": 1.0, "converged": True})
    return sim.Trace("t", PROPOSED, 0, 0.25, rows)


def test_evaluate_examples():
    scn = _scenario([])
    m = sim.evaluate(_synthetic([0.3, 0.2, 0.1], d_ref=[1.0, 0.5, 0.1]), scn)
    assert m.collision_free and m.complete and m.tau_ref == 0.5
    m = sim.evaluate(_synthetic([0.3, 0.2, 0.3], inside=False), scn)
    assert not m.collision_free and not m.complete
    m = sim.evaluate(_synthetic([0.5, 0.14, 0.3]), scn)
    assert m.min_clearance == 0.14 and not m.complete
    m = sim.evaluate(_synthetic([0.5, 0.0]), scn)
    assert not m.collision_free


def test_rectangle_clearance():
    sv = _sv()
    ego = sim.veh.EgoParams()
    # ego 0.26 long, obstacle 0.36 long, both along x: touching at 0.31 apart
    assert sim.footprint_clearance([0, 0, 0, 0, 0], ego, (0.5, 0), 0.0, sv) == pytest.approx(0.19)
    assert sim.footprint_clearance([0, 0, 0, 0, 0], ego, (0.3, 0), 0.0, sv) == 0.0


# -- Monte Carlo ------------------------------------------------------------------

def test_monte_carlo_small():
    scn = _scenario([_sv(init=(1.5, 0.3, 0.0, 0.0), ref=(1.5, 3.0, 0.0, 0.0), noise=1.0)],
                    duration=2.0, sampler={"position_half_width": [0.3, 0.3]})
    recs, rows = sim.monte_carlo(scn, 2, MODES, base_seed=10)
    assert [r.index for r in recs] == [0, 0, 0, 1, 1, 1]
    assert [r.mode for r in recs[:3]] == list(MODES)
    # n = 1 reduces to one closed-loop run
    inits = sim.sample_sv_inits(scn, 10)
    sampled = dataclasses.replace(scn, svs=[dataclasses.replace(
        scn.svs[0], init=(inits[0][0], inits[0][2], 0.0, 0.0))])
    direct = sim.evaluate(sim.run_closed_loop(sampled, PROPOSED, 10, sv_inits=inits), sampled)
    assert recs[0].metrics == direct
    # aggregate recount
    for row in rows:
        rs = [r.metrics for r in recs if r.mode == row["mode"]]
        assert row["runs"] == 2
        assert row["collision_free_rate"] == sum(m.collision_free for m in rs) / 2
    assert sim.table_csv(rows).startswith(",".join(sim.TABLE_COLUMNS))
    assert len(sim.runs_csv(recs).splitlines()) == 7
    # worker processes do not change the results
    recs2, _ = sim.monte_carlo(scn, 2, MODES, base_seed=10, workers=2)
    assert [repr(r.metrics) for r in recs2] == [repr(r.metrics) for r in recs]
    with pytest.raises(sim.ScenarioError):
        sim.monte_carlo(scn, 0)


def test_common_random_numbers():
    scn = sim.load_scenario("reach_avoid")
    a = sim.sample_sv_inits(scn, 5)
    b = sim.sample_sv_inits(scn, 5)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    c = sim.sample_sv_inits(scn, 6)
    assert not np.array_equal(a[0], c[0])
    assert abs(a[0][0] - 6.25) <= 0.5 and abs(a[0][2] - 1.2) <= 0.5


def test_unknown_mode():
    with pytest.raises(sim.ScenarioError):
        sim.run_closed_loop(_scenario([]), "fastest")


# -- demos --------------------------------------------------------------------------

def test_switch_stream_levels(rng):
    adm = AdmissibleSet.hexagon(1.0)
    s = sim.switch_stream(adm, 40, 20, 0.2, 0.9, rng)
    assert s.shape == (40, 2)
    assert np.all(adm.H @ s[:20].T <= 0.2 + 1e-12)
    assert np.all(adm.H @ s[20:].T <= 0.9 + 1e-12)


def test_reach_coverage_small():
    res = sim.reach_coverage(rollouts=30, warmup=40, seed=1)
    assert 0.0 <= res.fraction <= 1.0 and res.trajectories.shape == (30, 11, 2)
    zero = sim.reach_coverage(delta_max=0.0, eta_max=0.0, rollouts=5, warmup=10, N=3)
    assert len(zero.occupancies) == 3
    with pytest.raises(sim.ScenarioError):
        sim.reach_coverage(N=0)
