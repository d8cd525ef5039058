"""Acceptance suite: one printed PASS/FAIL line per criterion.

Each criterion reads the validation battery and, where a cheap second route
exists, repeats the measurement with code written independently here.
Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
"""

import math

import numpy as np
import pytest

from rgflow import validation
from rgflow.curvature import ConformalState, FlowParams, scalar_curvature
from rgflow.flow import run
from rgflow.initial import sinusoid
from rgflow.potentials import solve_poisson
from rgflow.surface import build_sphere, build_torus
from rgflow.validation import Status


@pytest.fixture(scope="module")
def battery():
    results = validation.run_battery()
    return {g: {c.name: c for c in checks} for g, checks in results.items()}


def fmt(checks):
    return ", ".join(f"{c.name}={c.measured:.3g}" for c in checks)


def all_pass(checks):
    return bool(checks) and all(c.status is Status.PASS for c in checks)


def test_criterion_01_fixed_points(battery, acceptance):
    checks = list(battery["fixed_points"].values())
    worst = max(c.measured for c in checks)
    # second route: a coarse radius-2 sphere integrated independently of the battery
    d = build_sphere(2, 2.0)
    traj = run(d, np.zeros(d.node_count), FlowParams(alpha_prime=1.0, t_end=1.0, sample_stride=10**9))
    own = float(np.abs(traj.samples[-1].state.u).max())
    ok = len(checks) == 9 and all_pass(checks) and worst <= 1e-8 and own <= 1e-8
    assert acceptance(1, "fixed points stay put", ok, f"worst drift {worst:.2e}, coarse r=2 sphere {own:.2e}")


def test_criterion_02_volume(battery, acceptance):
    checks = [battery[g]["volume_drift"] for g in ("torus_perturbed", "sphere_perturbed")]
    ok = all_pass(checks) and max(c.measured for c in checks) <= 1e-6
    assert acceptance(2, "volume conserved", ok, fmt(checks))


def test_criterion_03_gauss_bonnet(battery, acceptance):
    torus = battery["torus_perturbed"]["gauss_bonnet"]
    sphere = battery["sphere_perturbed"]["gauss_bonnet"]
    # second route: direct quadrature of R on a fresh perturbed torus
    d = build_torus(64, 64, 2 * math.pi, 2 * math.pi)
    st = ConformalState(sinusoid(d, 0.05, 1, 2))
    R = scalar_curvature(d, st)
    own = abs(float(np.sum(R * np.exp(2 * st.u))) * (2 * math.pi / 64) ** 2)
    ok = torus.passed and torus.measured <= 1e-6 and sphere.passed and sphere.measured <= 0.01 and own <= 1e-6
    assert acceptance(3, "Gauss-Bonnet constant in time", ok, f"{fmt([torus, sphere])}, direct torus {own:.1e}")


def test_criterion_04_evolution_residuals(battery, acceptance):
    torus = battery["torus_perturbed"]
    sphere = battery["sphere_perturbed"]
    keys = ("R", "R2", "gradR2", "r")
    resid = [torus[f"evolution[{k}]"] for k in keys]
    resid += [sphere[f"evolution[{k}]"] for k in ("R", "R2", "r")]
    halving = [torus[f"evolution_halving[{k}]"] for k in keys]
    ok = (
        all_pass(resid)
        and all(c.threshold <= 1e-3 for c in resid)
        and all_pass(halving)
        and all(c.measured <= 1 / 3 for c in halving)
    )
    worst = max(c.measured for c in resid)
    ratio = max(c.measured for c in halving)
    assert acceptance(4, "evolution identities", ok, f"worst residual {worst:.2e}, worst halving ratio {ratio:.3f}")


def test_criterion_05_entropy(battery, acceptance):
    s = battery["sphere_perturbed"]
    checks = [s["entropy_monotone"], s["entropy_forms"], s["entropy_fd"]]
    ok = all_pass(checks) and s["entropy_forms"].measured <= 1e-6 and s["entropy_fd"].measured <= 1e-3
    assert acceptance(5, "entropy monotone and dissipation forms agree", ok, fmt(checks))


def test_criterion_06_bounds(battery, acceptance):
    names = ("bound[abel]", "bound[R2_envelope]", "bound[r_young]", "bound[r_topological]")
    checks = [battery[g][n] for g in ("torus_perturbed", "sphere_perturbed") for n in names]
    ok = all_pass(checks)
    assert acceptance(6, "maximum-principle bounds", ok, f"worst excess {max(c.measured for c in checks):.2e}")


def test_criterion_07_ricci_limit(battery, acceptance):
    c = battery["ricci_limit"]["ricci_limit"]
    ok = c.passed and c.measured <= 0.6
    assert acceptance(7, "Ricci limit as alpha' -> 0", ok, f"ratio {c.measured:.3f}; {c.context}")


def test_criterion_08_torus_potential(battery, acceptance):
    t = battery["torus_perturbed"]
    checks = [t["w_energy"], t["w_log"], t["w_monotone"]]
    assert acceptance(8, "gradient-of-w estimates on the torus", all_pass(checks), fmt(checks))


def test_criterion_09_harnack(battery, acceptance):
    c = battery["sphere_perturbed"]["harnack"]
    ok = c.passed and c.measured <= 1e-3
    assert acceptance(9, "Harnack relation", ok, f"sup residual {c.measured:.2e}")


def test_criterion_10_oracles(battery, acceptance):
    o = battery["oracles"]
    checks = [o["oracle[torus_poisson]"], o["oracle[sphere_poisson]"], o["oracle[rk4_order]"]]
    # second route: invert a random band-limited source by hand with numpy.fft
    n, L = 64, 2 * math.pi
    d = build_torus(n, n, L, L)
    rng = np.random.default_rng(7)
    coeffs = np.zeros((n, n), complex)
    coeffs[:8, :8] = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    coeffs[0, 0] = 0
    src = np.real(np.fft.ifft2(coeffs)).ravel()
    src -= src.mean()
    k = np.fft.fftfreq(n, d=L / n) * 2 * math.pi
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    k2[0, 0] = 1.0
    phi_hat = -np.fft.fft2(src.reshape(n, n)) / k2
    phi_hat[0, 0] = 0
    own = np.real(np.fft.ifft2(phi_hat)).ravel()
    err = float(np.abs(solve_poisson(d, ConformalState(np.zeros(n * n)), src) - own).max())
    ok = all_pass(checks) and err <= 1e-12
    assert acceptance(10, "oracle equivalence", ok, f"{fmt(checks)}, fft route {err:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
