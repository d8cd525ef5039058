import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from rgflow.curvature import (
    Cone,
    ConformalState,
    FlowParams,
    cone_classify,
    normalization_r,
    r_lower_bounds_check,
    scalar_curvature,
    volume,
)
from rgflow.initial import sinusoid
from rgflow.surface import SurfaceDomain, SurfaceKind, build_sphere, build_torus


def zero(d):
    return ConformalState(np.zeros(d.node_count))


def test_flat_and_round_backgrounds(torus64, sphere4):
    assert np.all(scalar_curvature(torus64, zero(torus64)) == 0)
    assert_allclose(scalar_curvature(sphere4, zero(sphere4)), 2.0, atol=1e-12)


def test_torus_sine_ansatz_symbolic():
    d = build_torus(64, 64, 1.0, 1.0)
    x = d.points[:, 0]
    eps = 0.01
    u = eps * np.sin(2 * np.pi * x)
    # Laplacian of u is -(2 pi)^2 u, so R = 2 eps (2 pi)^2 sin(2 pi x) exp(-2u)
    expected = 2 * eps * (2 * np.pi) ** 2 * np.sin(2 * np.pi * x) * np.exp(-2 * u)
    assert_allclose(scalar_curvature(d, ConformalState(u)), expected, atol=1e-10)


def test_constant_shift_scaling(sphere3):
    u = sinusoid(sphere3, 0.1, 2, 1)
    R = scalar_curvature(sphere3, ConformalState(u))
    Rc = scalar_curvature(sphere3, ConformalState(u + 0.3))
    assert_allclose(Rc, np.exp(-0.6) * R, rtol=1e-12)


@pytest.mark.parametrize("ap", [0.0, 0.5, 3.0])
def test_r_flat_torus_zero(torus64, ap):
    assert normalization_r(torus64, zero(torus64), FlowParams(alpha_prime=ap)) == 0.0


def test_r_unit_sphere(sphere4):
    assert normalization_r(sphere4, zero(sphere4), FlowParams(alpha_prime=1.0)) == pytest.approx(3.0, rel=1e-12)


def test_r_perturbed_sphere_against_refined_mesh():
    p = FlowParams(alpha_prime=0.3)
    vals = []
    for k in (3, 4, 6):
        d = build_sphere(k)
        vals.append(normalization_r(d, ConformalState(sinusoid(d, 0.1, 2, 1)), p))
    # refined-mesh oracle at subdivision 6
    assert abs(vals[1] - vals[2]) <= 1e-2 * abs(vals[2])
    assert abs(vals[1] - vals[2]) < abs(vals[0] - vals[2])


def test_r_invariant_under_node_relabeling(sphere3):
    u = sinusoid(sphere3, 0.1, 1, 1)
    st = ConformalState(u)
    R = scalar_curvature(sphere3, st)
    p = FlowParams(alpha_prime=0.7)
    perm = np.random.default_rng(0).permutation(sphere3.node_count)
    shuffled = SurfaceDomain(
        kind=SurfaceKind.ROUND_SPHERE,
        node_count=sphere3.node_count,
        background_scalar_curvature=sphere3.background_scalar_curvature[perm].copy(),
        quadrature_weights=sphere3.quadrature_weights[perm].copy(),
        points=sphere3.points[perm].copy(),
        lambda_max=sphere3.lambda_max,
    )
    r0 = normalization_r(sphere3, st, p, R=R)
    r1 = normalization_r(shuffled, ConformalState(u[perm]), p, R=R[perm])
    assert r1 == pytest.approx(r0, rel=1e-13)


def test_cone_examples(torus64, sphere4):
    assert cone_classify(sphere4, zero(sphere4), FlowParams(alpha_prime=1.0)) is Cone.ALL_PLUS
    assert cone_classify(torus64, zero(torus64), FlowParams(alpha_prime=5.0)) is Cone.ALL_PLUS
    # M- is empty on these surfaces; exercise the branch with a supplied curvature
    R = np.full(sphere4.node_count, -10.0)
    assert cone_classify(sphere4, zero(sphere4), FlowParams(alpha_prime=1.0), R=R) is Cone.ALL_MINUS


def test_cone_mixed_by_scaling_amplitude(torus64):
    p = FlowParams(alpha_prime=1.0)
    base = sinusoid(torus64, 1.0, 1, 2)
    eps, seen = 0.0, []
    while eps < 2.0:
        st = ConformalState(eps * base)
        R = scalar_curvature(torus64, st)
        c = cone_classify(torus64, st, p)
        # nodewise oracle
        expect = Cone.ALL_PLUS if (1 + 0.5 * R).min() > 1e-12 else Cone.MIXED
        assert c is expect
        seen.append(c)
        if c is Cone.MIXED:
            assert R.min() < -2.0 and R.max() > 0
            break
        eps += 0.02
    assert seen[0] is Cone.ALL_PLUS and seen[-1] is Cone.MIXED


def test_r_bounds_examples(torus64, sphere4):
    p = FlowParams(alpha_prime=1.0)
    assert r_lower_bounds_check(0.0, torus64, zero(torus64), p) == (True, True)
    r = normalization_r(sphere4, zero(sphere4), p)
    assert r_lower_bounds_check(r, sphere4, zero(sphere4), p) == (True, True)
    # the Young bound is vacuous at alpha' = 0
    assert r_lower_bounds_check(-5.0, torus64, zero(torus64), FlowParams())[0] is True
    assert r_lower_bounds_check(-5.0, torus64, zero(torus64), p) == (False, False)


_torus16 = build_torus(16, 16, 2 * np.pi, 2 * np.pi)
_sphere2 = build_sphere(2)


@given(
    amp=st.floats(0.0, 0.4),
    kx=st.integers(0, 3),
    ky=st.integers(0, 3),
    ap=st.floats(0.0, 2.0),
    on_sphere=st.booleans(),
)
def test_r_bounds_hold_on_random_cone_states(amp, kx, ky, ap, on_sphere):
    d = _sphere2 if on_sphere else _torus16
    st_ = ConformalState(sinusoid(d, amp, kx, ky))
    p = FlowParams(alpha_prime=ap)
    if cone_classify(d, st_, p) is not Cone.ALL_PLUS:
        return
    r = normalization_r(d, st_, p)
    assert r_lower_bounds_check(r, d, st_, p) == (True, True)


@given(amp=st.floats(0.0, 0.5), kx=st.integers(0, 5), ky=st.integers(0, 5))
def test_gauss_bonnet_torus(amp, kx, ky):
    st_ = ConformalState(sinusoid(_torus16, amp, kx, ky))
    assert abs(_torus16.integrate(scalar_curvature(_torus16, st_), st_.u)) <= 1e-8


def test_gauss_bonnet_sphere_refines():
    errs = []
    for k in (3, 4, 5):
        d = build_sphere(k)
        st_ = ConformalState(sinusoid(d, 0.2, 2, 1))
        errs.append(abs(d.integrate(scalar_curvature(d, st_), st_.u) - 8 * np.pi) / (8 * np.pi))
    assert errs[1] <= 0.01
    assert errs[0] > errs[1] > errs[2]


def test_volume(sphere4):
    assert volume(sphere4, ConformalState(np.full(sphere4.node_count, 0.5))) == pytest.approx(np.e * sphere4.area)


def test_state_validation():
    with pytest.raises(ValueError):
        ConformalState(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ConformalState(np.array([0.0, np.nan]))
    s = ConformalState([0.0, 1.0], 0.5).shifted(1.0, 0.25)
    assert_allclose(s.u, [1.0, 2.0])
    assert s.t == 0.75


@pytest.mark.parametrize(
    "kw",
    [
        {"alpha_prime": -0.1},
        {"dt_safety": 0.0},
        {"dt_safety": 1.5},
        {"t_end": 0.0},
        {"sample_stride": 0},
        {"residual_check_stride": 0},
        {"entropy_floor": 0.0},
        {"dt_fixed": -1.0},
    ],
)
def test_params_validation(kw):
    with pytest.raises(ValueError):
        FlowParams(**kw)
