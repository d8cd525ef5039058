import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from rgflow.curvature import Cone, ConformalState, FlowParams, cone_classify, scalar_curvature
from rgflow.flow import (
    ConeExit,
    EnvelopeExpired,
    StepUnderflow,
    Termination,
    abel_comparison,
    r_squared_bound,
    rhs_u,
    run,
    stable_dt,
    step,
)
from rgflow.initial import sinusoid
from rgflow.surface import build_sphere, build_torus


def test_rhs_vanishes_at_fixed_points(torus64, sphere4):
    for d in (torus64, sphere4):
        st = ConformalState(np.zeros(d.node_count))
        assert np.abs(rhs_u(d, st, FlowParams(alpha_prime=0.5))).max() <= 1e-14


def test_rhs_symbolic_ansatz():
    d = build_torus(64, 64, 1.0, 1.0)
    x = d.points[:, 0]
    ap = 0.1
    u = 0.01 * np.sin(2 * np.pi * x)
    R = 2 * 0.01 * (2 * np.pi) ** 2 * np.sin(2 * np.pi * x) * np.exp(-2 * u)
    F = R + ap * R**2 / 4
    w = np.exp(2 * u)
    r = np.sum(F * w) / np.sum(w)
    expected = -0.5 * (F - r)
    got = rhs_u(d, ConformalState(u), FlowParams(alpha_prime=ap))
    assert_allclose(got, expected, atol=1e-10)
    # zero mean against dmu by construction of r
    assert abs(d.integrate(got, u)) <= 1e-14


def test_rhs_refuses_states_outside_cone(torus64):
    st = ConformalState(sinusoid(torus64, 0.5, 1, 2))
    p = FlowParams(alpha_prime=1.0)
    assert cone_classify(torus64, st, p) is Cone.MIXED
    with pytest.raises(ConeExit):
        rhs_u(torus64, st, p)


def test_step_fixed_point(sphere4):
    st = ConformalState(np.zeros(sphere4.node_count))
    nxt = step(sphere4, st, FlowParams(alpha_prime=0.5))
    assert np.abs(nxt.u - st.u).max() <= 1e-12
    assert nxt.t > 0


def test_step_richardson_local_order(torus64):
    st = ConformalState(sinusoid(torus64, 0.1, 1, 2))
    p = FlowParams(alpha_prime=0.5)
    diffs = []
    for dt in (4e-3, 2e-3, 1e-3):
        one = step(torus64, st, p, dt=dt)
        half = step(torus64, step(torus64, st, p, dt=dt / 2), p, dt=dt / 2)
        diffs.append(np.abs(one.u - half.u).max())
    # one step against two half steps differs by O(dt^5)
    orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(orders > 4.5), orders


def test_step_underflow(sphere3):
    st = ConformalState(np.zeros(sphere3.node_count))
    with pytest.raises(StepUnderflow):
        step(sphere3, st, FlowParams(), dt=1e-13)
    traj = run(sphere3, st.u, FlowParams(dt_fixed=1e-13, t_end=1.0))
    assert traj.termination is Termination.STEP_UNDERFLOW
    assert traj.failure_time == 0.0
    assert len(traj.samples) == 1


def test_stable_dt(torus64, sphere4):
    p = FlowParams(alpha_prime=1.0, dt_safety=0.5)
    st = ConformalState(np.zeros(sphere4.node_count))
    # unit sphere: 1 + alpha' R / 2 = 2
    assert stable_dt(sphere4, st, p) == pytest.approx(0.5 * 2 / (abs(sphere4.lambda_max) * 2))
    assert stable_dt(torus64, ConformalState(np.zeros(torus64.node_count)), FlowParams(dt_fixed=1e-3)) == 1e-3


def _independent_ricci_stepper(n, L, u0, dt, steps):
    """Normalized Ricci flow du/dt = -(R - r)/2 on a flat torus, RK4, written from scratch."""
    k = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    lap_symbol = -(k[:, None] ** 2 + k[None, :] ** 2)

    def f(u):
        g = u.reshape(n, n)
        lap = np.real(np.fft.ifft2(lap_symbol * np.fft.fft2(g)))
        R = -2 * np.exp(-2 * g) * lap
        e = np.exp(2 * g)
        r = np.sum(R * e) / np.sum(e)
        return (-0.5 * (R - r)).ravel()

    u = u0.copy()
    for _ in range(steps):
        k1 = f(u)
        k2 = f(u + dt / 2 * k1)
        k3 = f(u + dt / 2 * k2)
        k4 = f(u + dt * k3)
        u = u + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def test_ricci_limit_matches_independent_stepper():
    n, L = 32, 2 * np.pi
    d = build_torus(n, n, L, L)
    u0 = sinusoid(d, 0.1, 1, 2) + 0.05 * sinusoid(d, 1.0, 3, 1)
    dt, steps = 2e-3, 100
    traj = run(d, u0, FlowParams(alpha_prime=0.0, t_end=dt * steps, dt_fixed=dt, sample_stride=steps))
    ref = _independent_ricci_stepper(n, L, u0, dt, steps)
    assert traj.termination is Termination.COMPLETED
    assert np.abs(traj.samples[-1].state.u - ref).max() <= 1e-10


def test_run_sphere_fixed_point(sphere4):
    traj = run(sphere4, np.zeros(sphere4.node_count), FlowParams(alpha_prime=0.5, t_end=1.0, sample_stride=200))
    assert traj.termination is Termination.COMPLETED
    assert traj.samples[-1].state.t == pytest.approx(1.0)
    for name in ("volume", "r", "min_R", "max_R", "entropy_N", "max_Q"):
        s = traj.series(name)
        assert np.ptp(s) <= 1e-10 * max(1.0, abs(s[0])), name


def test_run_unit_torus_volume(unit_torus_run):
    d, p, traj = unit_torus_run
    assert traj.termination is Termination.COMPLETED
    assert np.max(traj.series("volume_drift")) <= 1e-6
    t = traj.times
    assert np.all(np.diff(t) > 0)
    for s in traj.samples:
        assert cone_classify(d, s.state, p) is Cone.ALL_PLUS
    assert np.max(np.abs(traj.series("gauss_bonnet"))) <= 1e-8


def test_run_outside_cone_stops_at_zero(torus64):
    traj = run(torus64, sinusoid(torus64, 0.5, 1, 2), FlowParams(alpha_prime=1.0))
    assert traj.termination is Termination.CONE_EXIT
    assert traj.failure_time == 0.0
    assert traj.samples == []


def test_run_records_residual_and_brackets(sphere_run):
    d, p, traj = sphere_run
    inner = traj.samples[1:-1]
    assert inner and all(s.bracket is not None and s.bracket.next is not None for s in inner)
    assert all(s.diagnostics.residual_R is not None and s.diagnostics.residual_R < 1e-3 for s in inner)
    assert traj.samples[-1].bracket is None
    assert len(traj.step_times) == len(traj.step_r)


def test_run_progress_callback(sphere3):
    seen = []
    run(sphere3, sinusoid(sphere3, 0.02, 1, 1), FlowParams(t_end=0.05, sample_stride=5), progress=seen.append)
    assert seen and seen[-1].state.t == pytest.approx(0.05)


# --- Abel comparison --------------------------------------------------------


def test_abel_equilibrium():
    t = np.linspace(0, 1, 11)
    y = abel_comparison(t, np.sin(t), 0.0, FlowParams(alpha_prime=0.3), t)
    assert np.all(y == 0)


def test_abel_closed_form():
    t = np.array([0.0, 0.25, 0.5])
    y = abel_comparison(t, np.zeros(3), 1.0, FlowParams(), t)
    assert y[-1] == pytest.approx(2.0, abs=1e-6)
    assert_allclose(y, 1 / (1 - t), atol=1e-6)


def test_abel_step_refinement():
    ts = np.linspace(0, 1, 21)
    rs = 1.5 + 0.3 * np.cos(3 * ts)
    p = FlowParams(alpha_prime=0.4)
    coarse = abel_comparison(ts, rs, 1.2, p, ts, max_step=1e-3)
    fine = abel_comparison(ts, rs, 1.2, p, ts, max_step=1e-4)
    assert np.abs(coarse - fine).max() <= 1e-8


def test_abel_blowup_reports_inf():
    t = np.array([0.0, 0.5, 0.99, 1.5])
    y = abel_comparison(t, np.zeros(4), 1.0, FlowParams(), t)
    assert np.isfinite(y[:3]).all()
    assert y[3] == np.inf


# --- R^2 envelope -------------------------------------------------------------


def test_r_squared_bound_trivial(torus64, sphere4):
    p = FlowParams(alpha_prime=0.3)
    assert r_squared_bound(0.7, 0.0, torus64, p) == 0.0
    assert r_squared_bound(0.0, 2.5, torus64, p) == pytest.approx(2.5)
    assert r_squared_bound(0.0, 4.0, sphere4, p) == pytest.approx(4.0)


def test_r_squared_bound_torus_example():
    d = build_torus(16, 16, 1.0, 1.0)
    # c1 = 1, c2 = 1.05: 0.04 e / (1 - 1.05 * 0.04 (e - 1))
    expected = 0.04 * math.e / (1 - 1.05 * 0.04 * (math.e - 1))
    assert expected == pytest.approx(0.1171885, abs=1e-7)
    assert r_squared_bound(1.0, 0.04, d, FlowParams(alpha_prime=0.1)) == pytest.approx(expected, rel=1e-14)


def test_r_squared_bound_expiry(torus64):
    p = FlowParams(alpha_prime=0.0)
    # denominator 1 - R0^2 (e^t - 1) vanishes at t = log 2 for R0^2 = 1
    assert np.isfinite(r_squared_bound(0.69, 1.0, torus64, p, vol=1.0))
    with pytest.raises(EnvelopeExpired):
        r_squared_bound(0.70, 1.0, torus64, p, vol=1.0)


def test_r_squared_bound_negative_c1(sphere4):
    # unit sphere: c1 = 1 - 8 pi / (4 pi) = -1
    p = FlowParams(alpha_prime=0.0)
    val = r_squared_bound(0.1, 4.0, sphere4, p, vol=4 * np.pi)
    c1 = -1.0
    expected = 4.0 * c1 * math.exp(c1 * 0.1) / (c1 - 4.0 * (math.exp(c1 * 0.1) - 1))
    assert val == pytest.approx(expected, rel=1e-12)
    with pytest.raises(EnvelopeExpired):
        r_squared_bound(5.0, 4.0, sphere4, p, vol=4 * np.pi)


def test_r_squared_bound_zero_c1_limit(torus64):
    p = FlowParams(alpha_prime=1.0)
    val = r_squared_bound(0.2, 0.5, build_sphere(1), p, vol=4 * np.pi * 2)
    assert val == pytest.approx(0.5 / (1 - 1.5 * 0.5 * 0.2), rel=1e-12)


def test_envelope_holds_along_trajectory(unit_torus_run):
    d, p, traj = unit_torus_run
    R0 = scalar_curvature(d, traj.samples[0].state)
    R0_sq = float((R0**2).max())
    for s in traj.samples:
        R = scalar_curvature(d, s.state)
        try:
            env = r_squared_bound(s.state.t, R0_sq, d, p)
        except EnvelopeExpired:
            break
        assert (R**2).max() <= env + 1e-4
