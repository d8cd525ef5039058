"""Time integration of the conformal factor and the comparison ODEs."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import identities
from .curvature import (
    Cone,
    ConformalState,
    FlowParams,
    cone_classify,
    normalization_r,
    reaction,
    scalar_curvature,
    volume,
)
from .potentials import (
    NonpositiveCurvature,
    entropy,
    harnack,
    potentials,
    soliton_residual_integrals,
)

MIN_DT = 1e-12
ABEL_BLOWUP = 1e12


class Termination(enum.Enum):
    COMPLETED = "Completed"
    CONE_EXIT = "ConeExit"
    STEP_UNDERFLOW = "StepUnderflow"


class FlowError(RuntimeError):
    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class ConeExit(FlowError):
    """The state left ``M+``, where the flow stops being parabolic."""


class StepUnderflow(FlowError):
    """The stable step size fell below ``MIN_DT``."""


class EnvelopeExpired(ValueError):
    """The closed-form ``R^2`` envelope is past its blow-up time."""


@dataclass
class DiagnosticsRecord:
    t: float
    volume: float
    volume_drift: float
    r: float
    min_R: float
    max_R: float
    gauss_bonnet: float
    cone: str
    entropy_N: float | None = None
    max_Q: float | None = None
    residual_R: float | None = None
    msq_integral: float | None = None


@dataclass
class Bracket:
    """Neighbouring integrator states used for central differences in time."""

    prev: ConformalState
    next: ConformalState | None = None


@dataclass
class Sample:
    state: ConformalState
    diagnostics: DiagnosticsRecord
    bracket: Bracket | None = None


@dataclass
class Trajectory:
    samples: list[Sample] = field(default_factory=list)
    stride: int = 1
    termination: Termination = Termination.COMPLETED
    failure_time: float | None = None
    step_times: list[float] = field(default_factory=list)
    step_r: list[float] = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.state.t for s in self.samples])

    def series(self, name):
        return np.array([getattr(s.diagnostics, name) for s in self.samples], dtype=float)


def _rhs(domain, u, t, params):
    """Right-hand side of the conformal-factor equation plus ``(R, r)``; raises ``ConeExit``."""
    state = ConformalState(u, t)
    R = scalar_curvature(domain, state)
    if cone_classify(domain, state, params, R=R) is not Cone.ALL_PLUS:
        raise ConeExit("state left the M+ cone", t)
    F = domain.pointwise(lambda x: reaction(x, params.alpha_prime), R)
    e2u = np.exp(2.0 * u)
    r = np.dot(F * e2u, domain.quadrature_weights) / np.dot(e2u, domain.quadrature_weights)
    return -0.5 * (F - r), R, r


def rhs_u(domain, state, params):
    """``du/dt = -(R + alpha' R^2/4 - r) / 2``.

    Raises
    ------
    ConeExit
        If the state is not in ``M+``.
    """
    return _rhs(domain, state.u, state.t, params)[0]


def stable_dt(domain, state, params, R=None):
    """Explicit step bound ``dt_safety * 2 / (|lambda_max| * max(exp(-2u) (1 + alpha' R/2)))``."""
    if params.dt_fixed is not None:
        return params.dt_fixed
    if R is None:
        R = scalar_curvature(domain, state)
    stiffness = np.max(np.exp(-2.0 * state.u) * (1.0 + 0.5 * params.alpha_prime * R))
    return params.dt_safety * 2.0 / (abs(domain.lambda_max) * stiffness)


def step(domain, state, params, dt=None):
    """One classical RK4 step; ``r`` is re-evaluated at every stage.

    Raises
    ------
    ConeExit
        If any stage leaves ``M+``.
    StepUnderflow
        If the step size drops below ``MIN_DT``.
    """
    u, t = state.u, state.t
    k1, R, _ = _rhs(domain, u, t, params)
    if dt is None:
        dt = stable_dt(domain, state, params, R=R)
    if dt < MIN_DT:
        raise StepUnderflow(f"step size {dt:.3e} below {MIN_DT:g}", t)
    k2 = _rhs(domain, u + 0.5 * dt * k1, t + 0.5 * dt, params)[0]
    k3 = _rhs(domain, u + 0.5 * dt * k2, t + 0.5 * dt, params)[0]
    k4 = _rhs(domain, u + dt * k3, t + dt, params)[0]
    return ConformalState(u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), t + dt)


def diagnostics(domain, state, params, vol0, full=True):
    """Per-sample scalars; ``full`` adds the potential-based quantities."""
    R = scalar_curvature(domain, state)
    vol = volume(domain, state)
    rec = DiagnosticsRecord(
        t=state.t,
        volume=vol,
        volume_drift=abs(vol - vol0) / vol0,
        r=normalization_r(domain, state, params, R=R),
        min_R=float(R.min()),
        max_R=float(R.max()),
        gauss_bonnet=domain.integrate(R, state.u),
        cone=cone_classify(domain, state, params, R=R).value,
    )
    if not full:
        return rec
    pair = potentials(domain, state, params, R=R)
    try:
        rec.msq_integral = soliton_residual_integrals(domain, state, pair, params, R=R)[0]
    except NonpositiveCurvature:
        F = reaction(R, params.alpha_prime)
        grad_f_sq = domain.gradient_inner(pair.f, pair.f)
        rec.msq_integral = 0.5 * (
            domain.integrate((F - rec.r) ** 2, state.u)
            - np.dot(domain.quadrature_weights, R * grad_f_sq)
        )
    if rec.min_R > params.entropy_floor:
        rec.entropy_N = entropy(domain, state, params, R=R)
        rec.max_Q = float(harnack(domain, state, params, R=R)[1].max())
    return rec


def residual_R(domain, sample, params):
    """Sup-norm mismatch of the central-difference ``dR/dt`` against its evolution identity."""
    b = sample.bracket
    states = (b.prev, sample.state, b.next)
    Rs = [scalar_curvature(domain, s) for s in states]
    fd = identities.central_difference([s.t for s in states], Rs)
    return float(np.abs(fd - identities.dR_dt(domain, sample.state, params, R=Rs[1])).max())


def run(domain, initial_u, params: FlowParams, progress=None):
    """Integrate from ``u(0) = initial_u`` to ``params.t_end``.

    Leaving ``M+`` or a step underflow ends the run cleanly; the samples
    collected so far are kept and ``failure_time`` records when it happened.
    A sample is stored every ``params.sample_stride`` steps and at the end;
    every ``residual_check_stride``-th sample also keeps its neighbouring
    steps for central differences and gets the full diagnostics.
    """
    state = ConformalState(np.array(initial_u, dtype=float), 0.0)
    traj = Trajectory(stride=params.sample_stride)
    if cone_classify(domain, state, params) is not Cone.ALL_PLUS:
        traj.termination = Termination.CONE_EXIT
        traj.failure_time = 0.0
        return traj

    vol0 = volume(domain, state)
    traj.samples.append(Sample(state, diagnostics(domain, state, params, vol0)))
    traj.step_times.append(0.0)
    traj.step_r.append(traj.samples[0].diagnostics.r)
    pending = None
    prev = None
    n = 0
    n_samples = 1
    t_end = params.t_end
    while True:
        remaining = t_end - state.t
        if remaining <= 1e-14 * max(1.0, t_end):
            break
        try:
            dt = stable_dt(domain, state, params)
            if remaining > dt:
                dt = remaining / math.ceil(remaining / dt)
            else:
                dt = remaining
            new = step(domain, state, params, dt=dt)
        except FlowError as exc:
            traj.termination = (
                Termination.CONE_EXIT if isinstance(exc, ConeExit) else Termination.STEP_UNDERFLOW
            )
            traj.failure_time = exc.t
            break
        prev, state = state, new
        n += 1
        traj.step_times.append(state.t)
        traj.step_r.append(normalization_r(domain, state, params))
        if pending is not None:
            pending.bracket.next = state
            pending.diagnostics.residual_R = residual_R(domain, pending, params)
            pending = None
        last = t_end - state.t <= 1e-14 * max(1.0, t_end)
        if n % params.sample_stride == 0 or last:
            full = n_samples % params.residual_check_stride == 0 or last
            sample = Sample(state, diagnostics(domain, state, params, vol0, full=full))
            if full and not last:
                sample.bracket = Bracket(prev=prev)
                pending = sample
            traj.samples.append(sample)
            n_samples += 1
            if progress is not None:
                progress(sample)
    if pending is not None:
        pending.bracket = None
    return traj


@dataclass(frozen=True)
class AbelBound:
    """Comparison value ``y`` for ``max R`` and the closed-form envelope for ``max R^2``."""

    y: float
    y_sq_bound: float


def abel_comparison(r_times, r_values, y0, params, sample_times, max_step=1e-3):
    """Integrate ``y' = -r(t) y + y^2 + (alpha'/4) y^3`` with RK4.

    ``r(t)`` is linearly interpolated from the recorded series. The step is
    ``min(max_step, 0.05 / |df/dy|)`` so it shrinks as ``y`` grows; once
    ``|y| > 1e12`` the solution is reported as ``inf`` from then on.

    Returns
    -------
    ndarray
        ``y`` at ``sample_times``.
    """
    r_times = np.asarray(r_times, dtype=float)
    r_values = np.asarray(r_values, dtype=float)
    sample_times = np.asarray(sample_times, dtype=float)
    ap = params.alpha_prime

    def r_of(t):
        return np.interp(t, r_times, r_values)

    def f(t, y):
        return -r_of(t) * y + y * y + 0.25 * ap * y**3

    out = np.full(len(sample_times), np.inf)
    y, t = float(y0), float(sample_times[0]) if len(sample_times) else 0.0
    for i, target in enumerate(sample_times):
        while t < target - 1e-15:
            slope = abs(r_of(t)) + 2 * abs(y) + 0.75 * ap * y * y
            h = min(max_step, 0.05 / slope if slope > 0 else max_step, target - t)
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
            if not np.isfinite(y) or abs(y) > ABEL_BLOWUP:
                return out
        out[i] = y
    return out


def r_squared_bound(t, R0_sq, domain, params, vol=None):
    """Closed-form envelope ``R0^2 c1 e^{c1 t} / (c1 - c2 R0^2 (e^{c1 t} - 1))`` for ``max R^2``.

    ``c1 = 1 - 4 pi chi / Vol`` and ``c2 = 1 + alpha'/2``. It solves
    ``y' = c1 y + c2 y^2`` and is valid until the denominator reaches zero
    (for ``c1 < 0`` both numerator and denominator start negative).

    Raises
    ------
    EnvelopeExpired
        Once the denominator has crossed zero.
    """
    if vol is None:
        vol = domain.area
    c1 = 1.0 - 4.0 * math.pi * domain.euler_characteristic / vol
    c2 = 1.0 + 0.5 * params.alpha_prime
    if R0_sq == 0.0:
        return 0.0
    if abs(c1) < 1e-14:
        denom = 1.0 - c2 * R0_sq * t
        if denom <= 0:
            raise EnvelopeExpired(f"envelope expired before t = {t}")
        return R0_sq / denom
    growth = math.expm1(c1 * t)
    # denominator relative to its t = 0 value c1
    rel = 1.0 - c2 * R0_sq * growth / c1
    if rel <= 0:
        raise EnvelopeExpired(f"envelope expired before t = {t}")
    return R0_sq * math.exp(c1 * t) / rel
