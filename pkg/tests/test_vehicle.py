import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachplan.vehicle import (EgoInput, EgoParams, EgoState, ObservationNoise,
                               SvObservation, ego_derivative, ego_step_rk4,
                               ego_step_rk4_jac, estimate_sv_input, shoot, simulate,
                               slip_angle, sv_matrices)

P = EgoParams()


def _fine_euler(x, u, p, T, n=1000):
    x = np.asarray(x, float)
    h = T / n
    for _ in range(n):
        x = x + h * ego_derivative(x, u, p)
    return x


def _fine_rk(x, u, p, T, n=200):
    # many small classical RK steps as an accurate reference
    q = EgoParams(l_f=p.l_f, l_r=p.l_r, T=T / n)
    for _ in range(n):
        x = ego_step_rk4(x, u, q)
    return x


def test_derivative_examples():
    assert np.allclose(ego_derivative([0, 0, 0, 1, 0], [0, 0], P), [1, 0, 0, 0, 0])
    assert np.allclose(ego_derivative([0, 0, np.pi / 2, 1, 0], [0, 0], P), [0, 1, 0, 0, 0], atol=1e-15)
    f = ego_derivative(EgoState(v=1.0), EgoInput(delta=0.1), P)
    beta = math.atan(0.5 * math.tan(0.1))
    assert f[2] == pytest.approx(math.sin(beta) / 0.08, rel=1e-14)
    assert f[0] == pytest.approx(math.cos(beta)) and f[1] == pytest.approx(math.sin(beta))
    assert slip_angle(0.1, P) == pytest.approx(beta)


def test_derivative_jerk_and_acceleration_channels():
    f = ego_derivative([0, 0, 0, 0.5, 0.3], [0, -0.2], P)
    assert f[3] == pytest.approx(0.3) and f[4] == pytest.approx(-0.2)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(0, 1.5))
def test_lateral_components_odd_in_steering(delta, v):
    a = ego_derivative([0, 0, 0, v, 0], [delta, 0], P)
    b = ego_derivative([0, 0, 0, v, 0], [-delta, 0], P)
    assert a[1] == pytest.approx(-b[1], abs=1e-15)
    assert a[2] == pytest.approx(-b[2], abs=1e-15)
    assert a[0] == pytest.approx(b[0], abs=1e-15)


def test_rk4_examples():
    assert np.array_equal(ego_step_rk4(np.zeros(5), np.zeros(2), P), np.zeros(5))
    x = ego_step_rk4([0, 0, 0, 1, 0], [0, 0], P)
    assert x[0] == 0.25 and x[1] == 0.0
    x0, u = np.array([0.1, -0.2, 0.3, 0.8, 0.2]), np.array([0.2, -0.1])
    assert np.allclose(ego_step_rk4(x0, u, P), _fine_euler(x0, u, P, P.T, 20000), atol=1e-6)


def test_rk4_fourth_order():
    x0, u = np.array([0.0, 0.0, 0.2, 1.0, 0.3]), np.array([0.25, -0.4])
    Ts = [0.1, 0.05, 0.025]
    errs = []
    for T in Ts:
        q = EgoParams(T=T)
        errs.append(np.linalg.norm(ego_step_rk4(x0, u, q) - _fine_rk(x0, u, q, T)))
    slope = np.polyfit(np.log(Ts), np.log(errs), 1)[0]
    assert slope >= 3.7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_step_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform([-1, -1, -np.pi, -1.5, -0.5], [1, 1, np.pi, 1.5, 0.5])
    u = rng.uniform([-0.3, -1], [0.3, 1])
    xn, jx, ju = ego_step_rk4_jac(x, u, P)
    assert np.allclose(xn, ego_step_rk4(x, u, P), atol=1e-14)
    h = 1e-6
    for i in range(5):
        e = np.zeros(5)
        e[i] = h
        fd = (ego_step_rk4(x + e, u, P) - ego_step_rk4(x - e, u, P)) / (2 * h)
        assert np.allclose(jx[:, i], fd, atol=1e-7)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (ego_step_rk4(x, u + e, P) - ego_step_rk4(x, u - e, P)) / (2 * h)
        assert np.allclose(ju[:, i], fd, atol=1e-7)


def test_shoot_matches_single_steps(rng):
    X = rng.uniform(-1, 1, (6, 5))
    U = rng.uniform(-0.3, 0.3, (6, 2))
    xn, jx, ju = shoot(X, U, P)
    for k in range(6):
        a, b, c = ego_step_rk4_jac(X[k], U[k], P)
        assert np.allclose(xn[k], a) and np.allclose(jx[k], b) and np.allclose(ju[k], c)


def test_reduced_model():
    q = EgoParams(reduced=True)
    assert q.nx == 4
    f = ego_derivative([0, 0, 0, 1], [0, 0.3], q)
    assert np.allclose(f, [1, 0, 0, 0.3])
    x = ego_step_rk4([0, 0, 0, 1], [0.1, 0.2], q)
    full = ego_step_rk4([0, 0, 0, 1, 0.2], [0.1, 0.0], P)
    assert np.allclose(x, full[:4])
    xs = simulate([0, 0, 0, 1], [[0, 0]] * 3, q)
    assert xs.shape == (4, 4) and xs[-1, 0] == pytest.approx(0.75)


def test_params_validation():
    with pytest.raises(ValueError):
        EgoParams(T=0)
    with pytest.raises(ValueError):
        EgoParams(v_bounds=(1, -1))


def test_sv_matrices_examples():
    A, B = sv_matrices(0.25)
    assert A[0, 1] == 0.25 and B[0, 0] == 0.03125 and B[1, 0] == 0.25
    A0, B0 = sv_matrices(0.0)
    assert np.array_equal(A0, np.eye(4)) and np.array_equal(B0, np.zeros((4, 2)))
    A2, _ = sv_matrices(0.5)
    assert np.array_equal(A2, A @ A)
    with pytest.raises(ValueError):
        sv_matrices(-1)


def _obs(k, p, v):
    return SvObservation(tuple(p), tuple(v), 0.0, k)


def test_estimate_examples():
    assert np.allclose(estimate_sv_input(_obs(0, (0, 0), (1, 0)), _obs(1, (0, 0), (1.5, 0)), 0.25), [2, 0])
    assert np.allclose(estimate_sv_input(_obs(3, (0, 0), (1, 1)), _obs(4, (0, 0), (1, 1)), 0.25), [0, 0])
    with pytest.raises(ValueError):
        estimate_sv_input(_obs(0, (0, 0), (0, 0)), _obs(2, (0, 0), (0, 0)), 0.25)


def test_estimate_circular_motion_is_centripetal():
    r, w = 2.0, 0.5
    for T in (0.1, 0.05):
        t = 1.3
        v0 = r * w * np.array([-np.sin(w * t), np.cos(w * t)])
        v1 = r * w * np.array([-np.sin(w * (t + T)), np.cos(w * (t + T))])
        a = estimate_sv_input(_obs(0, (0, 0), v0), _obs(1, (0, 0), v1), T)
        tm = t + T / 2
        exact = -r * w * w * np.array([np.cos(w * tm), np.sin(w * tm)])
        assert np.linalg.norm(a - exact) <= r * w ** 3 * T


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_estimate_recovers_constant_input(ax, ay, vx, vy):
    A, B = sv_matrices(0.25)
    x = np.array([0.3, vx, -0.2, vy])
    xn = A @ x + B @ np.array([ax, ay])
    est = estimate_sv_input(_obs(0, x[[0, 2]], x[[1, 3]]), _obs(1, xn[[0, 2]], xn[[1, 3]]), 0.25)
    assert np.allclose(est, [ax, ay], atol=1e-12)


def test_observation_noise_hook():
    o = _obs(0, (1, 2), (0, 0))
    assert ObservationNoise().apply(o) is o
    noisy = ObservationNoise(0.01, 0.01, np.random.default_rng(1)).apply(o)
    assert noisy.k == 0 and noisy.position != o.position
