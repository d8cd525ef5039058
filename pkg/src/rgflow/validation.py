"""Oracle battery: identity residuals, limit comparisons and bound monitors.

Every check returns :class:`CheckResult` records instead of raising. A check
passes iff ``measured <= threshold``; one-sided checks are phrased as a
violation amount compared against a tolerance.

The battery runs a fixed list of scenarios, each owning its own domain and
trajectory, so they can be executed in separate processes. Results are
deterministic and serialize to a JSON report.
"""

from __future__ import annotations

import enum
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import identities
from .curvature import ConformalState, FlowParams, normalization_r, scalar_curvature
from .flow import (
    EnvelopeExpired,
    abel_comparison,
    r_squared_bound,
    run,
    step,
)
from .initial import initial_field
from .potentials import (
    entropy,
    entropy_dissipation,
    harnack,
    potentials,
    solve_poisson,
    torus_gradient_w_estimates,
)
from .surface import SurfaceKind, build_sphere, build_torus

BOUND_TOL = 1e-4
RESIDUAL_CAP = 1e-3
# threshold = C1 dt^2 + C2 h^2, calibrated on the 2 pi torus at 64^2
RESIDUAL_C1 = 500.0
RESIDUAL_C2 = 0.05
FIXED_POINT_TOL = 1e-8
RICCI_RATIO = 0.6
ENTROPY_SLACK = 1e-8
ENTROPY_STRICT = 1e-10
SOLITON_MSQ = 1e-8
HARNACK_TOL = 1e-3
DISSIPATION_FLOOR = 1e-9
PARALLEL_ENV = "RGFLOW_MAX_WORKERS"


class Status(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: Status
    measured: float
    threshold: float
    context: str = ""

    @classmethod
    def judge(cls, name, measured, threshold, context=""):
        measured = float(measured)
        ok = measured <= threshold  # NaN fails
        return cls(name, Status.PASS if ok else Status.FAIL, measured, float(threshold), context)

    @classmethod
    def skipped(cls, name, reason, threshold=float("nan")):
        return cls(name, Status.SKIPPED, float("nan"), float(threshold), reason)

    @property
    def passed(self):
        return self.status is Status.PASS

    def to_dict(self):
        def num(x):
            return x if math.isfinite(x) else None

        return {
            "name": self.name,
            "status": self.status.value,
            "measured": num(self.measured),
            "threshold": num(self.threshold),
            "context": self.context,
        }


def residual_threshold(dt, h):
    """Resolution-coupled residual threshold ``min(1e-3, C1 dt^2 + C2 h^2)``."""
    return min(RESIDUAL_CAP, RESIDUAL_C1 * dt * dt + RESIDUAL_C2 * h * h)


@dataclass(frozen=True)
class Scenario:
    """A canned run: domain, initial ansatz and flow parameters."""

    name: str
    kind: str
    resolution: int
    size: float
    alpha_prime: float
    ansatz: str = "flat"
    ansatz_args: dict = field(default_factory=dict)
    t_end: float = 1.0
    sample_stride: int = 50
    dt_fixed: float | None = None

    def domain(self):
        if self.kind == "torus":
            return build_torus(self.resolution, self.resolution, self.size, self.size)
        return build_sphere(self.resolution, self.size)

    def params(self):
        return FlowParams(
            alpha_prime=self.alpha_prime,
            t_end=self.t_end,
            sample_stride=self.sample_stride,
            dt_fixed=self.dt_fixed,
        )

    def run(self):
        d = self.domain()
        p = self.params()
        return d, p, run(d, initial_field(d, self.ansatz, **self.ansatz_args), p)


TWO_PI = 2.0 * math.pi
TORUS_PERTURBED = Scenario(
    "torus_perturbed", "torus", 64, TWO_PI, 0.5, "sinusoid", {"amplitude": 0.05, "kx": 1, "ky": 2}
)
SPHERE_PERTURBED = Scenario(
    "sphere_perturbed", "sphere", 4, 1.0, 0.1, "sinusoid", {"amplitude": 0.05, "kx": 2, "ky": 0}
)


def _bracketed(trajectory):
    return [s for s in trajectory.samples if s.bracket is not None and s.bracket.next is not None]


def _three(sample):
    b = sample.bracket
    return (b.prev, sample.state, b.next)


def _max_bracket_dt(trajectory):
    return max(
        (max(s.state.t - s.bracket.prev.t, s.bracket.next.t - s.state.t) for s in _bracketed(trajectory)),
        default=0.0,
    )


# --- fixed points ---------------------------------------------------------


def check_fixed_points(params=None, alphas=(0.0, 0.5, 1.0), torus_n=64, subdivisions=4):
    """Constant-curvature metrics must not move: ``|u(T) - u(0)|_inf <= 1e-8``."""
    t_end = 1.0 if params is None else params.t_end
    domains = [
        ("torus", build_torus(torus_n, torus_n, TWO_PI, TWO_PI)),
        ("sphere_r1", build_sphere(subdivisions, 1.0)),
        ("sphere_r2", build_sphere(subdivisions, 2.0)),
    ]
    out = []
    for label, d in domains:
        for ap in alphas:
            p = FlowParams(alpha_prime=ap, t_end=t_end, sample_stride=10**9)
            u0 = np.zeros(d.node_count)
            traj = run(d, u0, p)
            name = f"fixed_point[{label},alpha'={ap:g}]"
            if traj.failure_time is not None:
                out.append(CheckResult(name, Status.FAIL, float("inf"), FIXED_POINT_TOL, traj.termination.value))
                continue
            drift = float(np.abs(traj.samples[-1].state.u - u0).max())
            out.append(CheckResult.judge(name, drift, FIXED_POINT_TOL, f"T = {traj.samples[-1].state.t:g}"))
    return out


# --- Ricci limit ----------------------------------------------------------


def trajectory_distance(a, b):
    """Sup over common samples of ``|u_a - u_b|_inf``; the runs must share sample times."""
    if len(a.samples) != len(b.samples):
        raise ValueError("trajectories have different sample counts")
    dist = 0.0
    for sa, sb in zip(a.samples, b.samples):
        if abs(sa.state.t - sb.state.t) > 1e-12:
            raise ValueError("trajectories are sampled at different times")
        dist = max(dist, float(np.abs(sa.state.u - sb.state.u).max()))
    return dist


def check_ricci_limit(params=None, alphas=(0.2, 0.1, 0.05), scenario=TORUS_PERTURBED, dt=8e-4):
    """Distance to the ``alpha' = 0`` run must shrink at least linearly with ``alpha'``.

    All runs use the same fixed step so their samples coincide. ``measured`` is
    the largest ratio of consecutive distances.
    """
    t_end = scenario.t_end if params is None else params.t_end
    d = scenario.domain()
    u0 = initial_field(d, scenario.ansatz, **scenario.ansatz_args)

    def go(ap):
        p = FlowParams(alpha_prime=ap, t_end=t_end, sample_stride=25, dt_fixed=dt, residual_check_stride=10**9)
        return run(d, u0, p)

    ref = go(0.0)
    dists = [trajectory_distance(go(ap), ref) for ap in alphas]
    ratios = [dists[i + 1] / dists[i] if dists[i] > 0 else float("inf") for i in range(len(dists) - 1)]
    ctx = ", ".join(f"d({ap:g})={dd:.3e}" for ap, dd in zip(alphas, dists))
    return CheckResult.judge("ricci_limit", max(ratios), RICCI_RATIO, ctx)


# --- evolution identities ---------------------------------------------------


def evolution_residuals(domain, trajectory, params):
    """Sup-norm residual per identity over all bracketed samples.

    Keys are ``R``, ``R2``, ``gradR2`` (torus only) and ``r``.
    """
    out = {"R": 0.0, "R2": 0.0, "r": 0.0}
    torus = domain.kind is SurfaceKind.FLAT_TORUS
    if torus:
        out["gradR2"] = 0.0
    for s in _bracketed(trajectory):
        states = _three(s)
        ts = [x.t for x in states]
        Rs = [scalar_curvature(domain, x) for x in states]
        R = Rs[1]
        st = s.state

        def resid(vals, rhs):
            return float(np.max(np.abs(identities.central_difference(ts, vals) - rhs)))

        out["R"] = max(out["R"], resid(Rs, identities.dR_dt(domain, st, params, R=R)))
        out["R2"] = max(out["R2"], resid([x * x for x in Rs], identities.dR2_dt(domain, st, params, R=R)))
        rs = [normalization_r(domain, x, params, R=Rx) for x, Rx in zip(states, Rs)]
        out["r"] = max(out["r"], resid(rs, identities.dr_dt(domain, st, params, R=R)))
        if torus:
            G = [identities.grad_R_sq(domain, x, Rx) for x, Rx in zip(states, Rs)]
            out["gradR2"] = max(out["gradR2"], resid(G, identities.dgradR2_dt(domain, st, params, R=R)))
    return out


def check_evolution_residuals(domain, trajectory, params, threshold=None):
    """Central-difference time derivatives against the evolution identities."""
    if not _bracketed(trajectory):
        return [CheckResult.skipped(f"evolution[{k}]", "no bracketed samples") for k in ("R", "R2", "gradR2", "r")]
    if threshold is None:
        threshold = residual_threshold(_max_bracket_dt(trajectory), domain.spacing)
    res = evolution_residuals(domain, trajectory, params)
    out = []
    for key in ("R", "R2", "gradR2", "r"):
        name = f"evolution[{key}]"
        if key not in res:
            out.append(CheckResult.skipped(name, "needs pointwise Hessians; torus only", threshold))
        else:
            out.append(CheckResult.judge(name, res[key], threshold, f"h = {domain.spacing:.4g}"))
    return out


def check_residual_convergence(scenario=TORUS_PERTURBED, t_end=0.3, dt_coarse=1.5e-3, factor=3.0):
    """Residuals must shrink by ``factor`` when ``dt`` and ``h`` are halved together.

    ``measured`` is ``fine / coarse``, passing below ``1 / factor``. The coarse
    run uses half the scenario's torus resolution.
    """
    if scenario.kind != "torus":
        raise ValueError("the halving study runs on the torus")
    res = []
    for n, dt in ((scenario.resolution // 2, dt_coarse), (scenario.resolution, dt_coarse / 2)):
        d = build_torus(n, n, scenario.size, scenario.size)
        steps = round(t_end / dt)
        p = FlowParams(alpha_prime=scenario.alpha_prime, t_end=t_end, sample_stride=steps // 8, dt_fixed=dt)
        traj = run(d, initial_field(d, scenario.ansatz, **scenario.ansatz_args), p)
        res.append(evolution_residuals(d, traj, p))
    coarse, fine = res
    return [
        CheckResult.judge(
            f"evolution_halving[{k}]",
            fine[k] / coarse[k] if coarse[k] > 0 else 0.0,
            1.0 / factor,
            f"coarse {coarse[k]:.3e}, fine {fine[k]:.3e}",
        )
        for k in ("R", "R2", "gradR2", "r")
    ]


# --- bounds ---------------------------------------------------------------


def check_bounds(domain, trajectory, params, tol=BOUND_TOL):
    """Abel comparison for ``max R``, the ``R^2`` envelope and both lower bounds on ``r``."""
    samples = trajectory.samples
    times = trajectory.times
    maxR = trajectory.series("max_R")
    minR = trajectory.series("min_R")
    out = []

    y = abel_comparison(trajectory.step_times, trajectory.step_r, maxR[0], params, times)
    finite = np.isfinite(y)
    excess = float(np.max(maxR[finite] - y[finite])) if finite.any() else 0.0
    out.append(CheckResult.judge("bound[abel]", excess, tol, f"y(T) = {y[-1]:.6g}"))

    R0_sq = max(maxR[0] ** 2, minR[0] ** 2)
    vol0 = samples[0].diagnostics.volume
    excess, used = -np.inf, 0
    for t, hi, lo in zip(times, maxR, minR):
        try:
            env = r_squared_bound(t, R0_sq, domain, params, vol=vol0)
        except EnvelopeExpired:
            break
        used += 1
        excess = max(excess, max(hi * hi, lo * lo) - env)
    out.append(CheckResult.judge("bound[R2_envelope]", excess, tol, f"{used} samples before expiry"))

    rs = trajectory.series("r")
    ap = params.alpha_prime
    if ap == 0:
        out.append(CheckResult.skipped("bound[r_young]", "vacuous at alpha' = 0", tol))
    else:
        out.append(CheckResult.judge("bound[r_young]", float(np.max(-1.0 / ap - rs)), tol))
    vols = trajectory.series("volume")
    topo = 2.0 * math.pi * domain.euler_characteristic / vols
    out.append(CheckResult.judge("bound[r_topological]", float(np.max(topo - rs)), tol))
    return out


# --- conservation ---------------------------------------------------------


def check_conservation(domain, trajectory, volume_tol=1e-6, gb_torus=1e-6, gb_sphere=0.01):
    """Volume drift and the Gauss-Bonnet integral along the run."""
    drift = float(np.max(trajectory.series("volume_drift")))
    out = [CheckResult.judge("volume_drift", drift, volume_tol)]
    gb = trajectory.series("gauss_bonnet")
    target = 4.0 * math.pi * domain.euler_characteristic
    if domain.kind is SurfaceKind.FLAT_TORUS:
        out.append(CheckResult.judge("gauss_bonnet", float(np.max(np.abs(gb - target))), gb_torus, "absolute"))
    else:
        rel = float(np.max(np.abs(gb - target))) / target
        out.append(CheckResult.judge("gauss_bonnet", rel, gb_sphere, "relative to 8 pi"))
    return out


# --- entropy ----------------------------------------------------------------


def _positive_throughout(trajectory, params):
    return bool(np.all(trajectory.series("min_R") > params.entropy_floor))


def check_entropy_monotone(domain, trajectory, params):
    """``N`` non-increasing within 1e-8, strictly decreasing while ``int |M|^2 > 1e-8``.

    ``measured`` is the worst ``N_{k+1} - N_k - allowance_k`` with allowance
    ``1e-8`` near solitons and ``-1e-10`` otherwise; it passes at ``<= 0``.
    """
    name = "entropy_monotone"
    if not _positive_throughout(trajectory, params):
        return CheckResult.skipped(name, "scalar curvature is not positive throughout", 0.0)
    N = [entropy(domain, s.state, params) for s in trajectory.samples]
    worst, strict = -np.inf, 0
    for k in range(len(N) - 1):
        msq = trajectory.samples[k].diagnostics.msq_integral
        if msq is not None and msq > SOLITON_MSQ:
            allowance = -ENTROPY_STRICT
            strict += 1
        else:
            allowance = ENTROPY_SLACK
        worst = max(worst, N[k + 1] - N[k] - allowance)
    if len(N) < 2:
        worst = 0.0
    return CheckResult.judge(name, worst, 0.0, f"{strict} of {len(N) - 1} steps required strict decrease")


def check_entropy_dissipation(domain, trajectory, params, forms_tol=1e-6, fd_tol=1e-3):
    """Two closed forms of ``dN/dt`` against each other and against a central difference."""
    names = ("entropy_forms", "entropy_fd")
    if not _positive_throughout(trajectory, params):
        return [CheckResult.skipped(n, "scalar curvature is not positive throughout") for n in names]
    forms, fd_err = 0.0, 0.0
    for s in _bracketed(trajectory):
        st = s.state
        R = scalar_curvature(domain, st)
        rep = entropy_dissipation(domain, st, potentials(domain, st, params, R=R), params, R=R)
        # at a soliton dN/dt is roundoff; floor the scale at the size of N itself
        scale = max(abs(rep.dissipation_curvature_form), DISSIPATION_FLOOR * abs(rep.N), 1e-300)
        forms = max(forms, abs(rep.dN_dt - rep.dissipation_curvature_form) / scale)
        states = _three(s)
        fd = identities.central_difference([x.t for x in states], [entropy(domain, x, params) for x in states])
        fd_err = max(fd_err, abs(fd - rep.dissipation_curvature_form) / scale)
    return [
        CheckResult.judge(names[0], forms, forms_tol, "relative"),
        CheckResult.judge(names[1], fd_err, fd_tol, "relative"),
    ]


def check_harnack(domain, trajectory, params, tol=HARNACK_TOL):
    """``(1 + alpha' R/2) Q = dL/dt - |grad L|^2`` with ``dL/dt`` from central differences."""
    name = "harnack"
    if not _positive_throughout(trajectory, params):
        return CheckResult.skipped(name, "scalar curvature is not positive throughout", tol)
    worst = 0.0
    for s in _bracketed(trajectory):
        states = _three(s)
        Ls = [harnack(domain, x, params)[0] for x in states]
        fd = identities.central_difference([x.t for x in states], Ls)
        worst = max(worst, float(np.max(np.abs(fd - identities.harnack_rhs(domain, s.state, params)))))
    return CheckResult.judge(name, worst, tol)


# --- torus potential ----------------------------------------------------------


def check_potential_estimates(domain, trajectory, params, tol=BOUND_TOL):
    names = ("w_energy", "w_log", "w_monotone")
    if domain.kind is not SurfaceKind.FLAT_TORUS:
        return [CheckResult.skipped(n, "zero Euler characteristic only") for n in names]
    rep = torus_gradient_w_estimates(trajectory, domain, params, tol=tol)
    if rep.status == "trivial":
        return [CheckResult.skipped(n, "w vanishes identically") for n in names]
    return [
        CheckResult.judge(names[0], rep.energy_lhs - rep.energy_rhs, tol, "conservative variant"),
        CheckResult.judge(names[1], rep.log_lhs - rep.log_rhs, tol, "conservative variant"),
        CheckResult.judge(names[2], rep.max_increase / math.exp(rep.log_rhs), 1e-8, "relative step increase"),
    ]


# --- oracles ------------------------------------------------------------------


def check_oracles(torus_n=64, subdivisions=4, sphere_tol=2e-2):
    """Poisson inversions of eigenfunctions and the RK4 order by step halving."""
    out = []
    d = build_torus(torus_n, torus_n, TWO_PI, TWO_PI)
    x, y = d.points[:, 0], d.points[:, 1]
    st = ConformalState(np.zeros(d.node_count))
    err = 0.0
    for kx, ky in ((1, 0), (2, 3), (5, 1), (31, 17)):
        phi = np.cos(kx * x) * np.sin(ky * y) + np.sin(kx * x)
        lam = -(kx * kx + ky * ky)
        # -kx^2 eigenvalue for the pure sin(kx x) part
        src = lam * np.cos(kx * x) * np.sin(ky * y) - kx * kx * np.sin(kx * x)
        err = max(err, float(np.abs(solve_poisson(d, st, src) - phi).max()))
    out.append(CheckResult.judge("oracle[torus_poisson]", err, 1e-10))

    s = build_sphere(subdivisions, 1.0)
    z = s.points[:, 2]
    sol = solve_poisson(s, ConformalState(np.zeros(s.node_count)), -2.0 * z)
    out.append(CheckResult.judge("oracle[sphere_poisson]", float(np.abs(sol - z).max()), sphere_tol, "first harmonic z"))

    order = rk4_observed_order()
    out.append(CheckResult.judge("oracle[rk4_order]", 4.0 - order, 0.0, f"observed order {order:.3f}"))
    return out


def rk4_observed_order(n=32, alpha_prime=0.5, t_end=0.05, base_steps=10):
    """Richardson estimate ``log2(|u_h - u_{h/2}| / |u_{h/2} - u_{h/4}|)``."""
    d = build_torus(n, n, TWO_PI, TWO_PI)
    u0 = initial_field(d, "sinusoid", amplitude=0.1, kx=1, ky=1)
    p = FlowParams(alpha_prime=alpha_prime)
    finals = []
    for m in (base_steps, 2 * base_steps, 4 * base_steps):
        state = ConformalState(u0)
        h = t_end / m
        for _ in range(m):
            state = step(d, state, p, dt=h)
        finals.append(state.u)
    e1 = np.abs(finals[0] - finals[1]).max()
    e2 = np.abs(finals[1] - finals[2]).max()
    return float(np.log2(e1 / e2))


# --- battery ------------------------------------------------------------------


def trajectory_checks(domain, trajectory, params):
    """All checks that only need one trajectory."""
    out = check_conservation(domain, trajectory)
    out += check_evolution_residuals(domain, trajectory, params)
    out += check_bounds(domain, trajectory, params)
    out.append(check_entropy_monotone(domain, trajectory, params))
    out += check_entropy_dissipation(domain, trajectory, params)
    out.append(check_harnack(domain, trajectory, params))
    out += check_potential_estimates(domain, trajectory, params)
    return out


def _scenario_checks(scenario):
    d, p, traj = scenario.run()
    if traj.failure_time is not None:
        return [CheckResult(f"run[{scenario.name}]", Status.FAIL, traj.failure_time, float("inf"), traj.termination.value)]
    out = trajectory_checks(d, traj, p)
    if scenario.kind == "torus":
        out += check_residual_convergence(scenario)
    return out


BATTERY = {
    "fixed_points": check_fixed_points,
    "ricci_limit": lambda: [check_ricci_limit()],
    "oracles": check_oracles,
    "torus_perturbed": lambda: _scenario_checks(TORUS_PERTURBED),
    "sphere_perturbed": lambda: _scenario_checks(SPHERE_PERTURBED),
}


def _run_group(name):
    return name, BATTERY[name]()


def parallelism_cap():
    """Worker cap from ``RGFLOW_MAX_WORKERS``; defaults to the CPU count."""
    raw = os.environ.get(PARALLEL_ENV)
    if raw is None:
        return os.cpu_count() or 1
    cap = int(raw)
    if cap < 1:
        raise ValueError(f"{PARALLEL_ENV} must be a positive integer")
    return cap


def run_battery(groups=None, max_workers=None):
    """Run the named scenario groups (all by default).

    Returns
    -------
    dict
        Group name to list of :class:`CheckResult`, in battery order.
    """
    names = list(BATTERY) if groups is None else list(groups)
    workers = min(max_workers or parallelism_cap(), len(names))
    if workers <= 1:
        done = dict(map(_run_group, names))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = dict(pool.map(_run_group, names))
    return {n: done[n] for n in names}


def report_dict(results):
    flat = [c for checks in results.values() for c in checks]
    return {
        "passed": all(c.status is not Status.FAIL for c in flat),
        "counts": {s.value: sum(c.status is s for c in flat) for s in Status},
        "groups": {g: [c.to_dict() for c in checks] for g, checks in results.items()},
    }


def report_json(results):
    return json.dumps(report_dict(results), indent=2)
