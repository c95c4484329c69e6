"""Explicit time stepping of gamma_t = gamma_ss with per-record monitors."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .curve import (Curve, FourierSpec, ImmersionError, curvature_vectors, dual_lengths, row_norms,
                    resample_uniform, synthesize_fourier_curve)
from .projection import ProjectionError, is_one_to_one_convex_projection
from .ratio import min_huisken_ratio, min_symmetric_ratio, rate_tolerance
from .symmetry import (Hyperplane, SymmetryError, TangentialContactError, build_symmetric_pairing,
                       count_plane_crossings, is_symmetric_two_crossing, plane_crossing_locations,
                       symmetrize_curve, symmetry_defect)

log = logging.getLogger(__name__)

MIN_DT = 1e-15
# curvature cap relative to the initial curve: max(CAP_SCALE / L0, CAP_FACTOR * k_max(0))
CAP_SCALE = 200.0
CAP_FACTOR = 2.0

STATUS_MAX_STEPS = "reached max steps"
STATUS_LENGTH = "length floor"
STATUS_CAP = "curvature cap"
STATUS_ABORTED = "aborted"


class FlowAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    """Numerical and monitoring parameters of one flow run.

    Records are taken every ``record_every`` steps and additionally whenever
    the length has dropped by more than ``record_dl`` (relative) since the
    previous record, which resolves fast transients in time.

    ``planes`` is a tuple of ``(plane_id, Hyperplane)``; the first plane
    carries the anchor that pins vertex 0 at a crossing.  A ``None`` stop
    condition is disabled; ``curvature_cap="auto"`` derives the cap from the
    initial curve.
    """

    spec: FourierSpec
    n: int = 512
    sigma: float = 0.25
    resample_every: int = 25
    record_every: int = 100
    record_dl: float | None = 0.02
    max_steps: int | None = None
    length_floor: float | None = 0.05
    curvature_cap: float | str | None = "auto"
    symmetrize: bool = False
    planes: tuple = ()
    monitor_huisken: bool = True
    monitor_symmetric: bool = True
    monitor_projection: bool = False
    monitor_diagnostics: bool = True
    symmetry_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.sigma <= 0.5:
            raise ValueError("sigma must lie in (0, 0.5]")
        if self.n < 64:
            raise ValueError("n must be at least 64")
        if self.resample_every < 1 or self.record_every < 1:
            raise ValueError("cadences must be positive")
        if self.max_steps is None and self.length_floor is None and self.curvature_cap is None:
            raise ValueError("at least one stop condition is required")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")
        if self.record_dl is not None and not 0 < self.record_dl < 1:
            raise ValueError("record_dl must lie in (0, 1)")
        if self.length_floor is not None and not 0 < self.length_floor < 1:
            raise ValueError("length_floor must lie in (0, 1)")
        if isinstance(self.curvature_cap, str) and self.curvature_cap != "auto":
            raise ValueError("curvature_cap must be a number, 'auto' or None")
        ids = [pid for pid, _ in self.planes]
        if len(set(ids)) != len(ids):
            raise ValueError("plane ids must be unique")
        for _, plane in self.planes:
            if len(plane.normal) != self.spec.ambient_dim:
                raise ValueError("plane dimension does not match the curve")

    @property
    def anchor_plane(self) -> Hyperplane | None:
        return self.planes[0][1] if self.planes else None


@dataclass
class FlowState:
    """Curve at time ``t``; ``remesh_dl`` accumulates the length changes
    caused by resampling (zero for an exact reparametrization)."""

    t: float
    curve: Curve
    step: int = 0
    remesh_dl: float = 0.0

    @cached_property
    def kappa(self) -> np.ndarray:
        return curvature_vectors(self.curve)

    @cached_property
    def k(self) -> np.ndarray:
        return row_norms(self.kappa)

    @property
    def k_max(self) -> float:
        return float(self.k.max())

    @property
    def anchor(self) -> np.ndarray:
        return self.curve.points[0]


def anchored_resample(curve: Curve, n: int, plane: Hyperplane | None,
                      previous_anchor=None) -> Curve:
    """Uniform resampling with vertex 0 on the tracked plane crossing.

    The crossing nearest to ``previous_anchor`` is used (the one where the
    signed distance increases if there is no previous anchor), and the
    orientation is chosen so that the signed distance increases through
    vertex 0.
    """
    if plane is None:
        return resample_uniform(curve, n, anchor=0.0)
    try:
        spline = curve.interpolant()
        locs = plane_crossing_locations(curve, plane, spline)
    except TangentialContactError:
        locs = []
    if not locs:
        return resample_uniform(curve, n, anchor=0.0)
    nrm = np.asarray(plane.normal)
    slopes = np.array([spline(s, 1) @ nrm for s in locs])
    if previous_anchor is None:
        pick = int(np.argmax(slopes))
    else:
        prev = np.asarray(previous_anchor)
        pick = int(np.argmin([np.linalg.norm(spline(s) - prev) for s in locs]))
    out = resample_uniform(curve, n, anchor=locs[pick])
    if slopes[pick] < 0:
        out = Curve(np.roll(out.points[::-1], 1, axis=0))
    return out


def initial_state(config: FlowConfig) -> FlowState:
    curve = synthesize_fourier_curve(config.spec)
    return FlowState(0.0, anchored_resample(curve, config.n, config.anchor_plane))


def step(state: FlowState, config: FlowConfig) -> FlowState:
    """One forward-Euler step with ``dt = sigma * (min segment)^2``."""
    h = float(state.curve.segment_lengths.min())
    dt = config.sigma * h * h
    if dt < MIN_DT:
        raise FlowAbort("timestep collapse")
    pts = state.curve.points + dt * state.kappa
    try:
        curve = Curve(pts)
    except ImmersionError as exc:
        raise FlowAbort(f"collision/degeneracy: {exc}") from exc
    n_step = state.step + 1
    remesh_dl = state.remesh_dl
    if n_step % config.resample_every == 0:
        before = curve.length
        curve = anchored_resample(curve, config.n, config.anchor_plane, state.anchor)
        if config.symmetrize and config.planes:
            curve = symmetrize_curve(curve, [p for _, p in config.planes])
        remesh_dl += curve.length - before
    return FlowState(state.t + dt, curve, n_step, remesh_dl)


# -- trace -------------------------------------------------------------------

@dataclass
class Record:
    t: float
    step: int
    L: float
    k_max: float
    int_k2: float
    fenchel_slack: float
    remesh_dl: float = 0.0
    min_dpsi: float = np.nan
    min_I: float = np.nan
    min_I_interior: float = np.nan
    argmin_s0: float = np.nan
    alpha0: float = np.nan
    crossings: dict = field(default_factory=dict)
    symmetric_two_crossing: bool | None = None
    proj_injective: bool | None = None
    proj_convex: bool | None = None
    sym_defect: float = np.nan
    var_res1: float = np.nan
    var_res2: float = np.nan
    geo_slack: float = np.nan
    rate_bound: float = np.nan
    rate_ok: bool | None = None


@dataclass
class FlowTrace:
    config: FlowConfig
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    status: str = ""
    abort_reason: str = ""
    initial_length: float = np.nan
    curvature_cap: float = np.nan
    anchor_jumps: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")


def fenchel_check(curve: Curve, k: np.ndarray | None = None) -> float:
    """``int k^2 ds - 4 pi^2 / L``; non-negative for closed curves."""
    if k is None:
        k = np.linalg.norm(curvature_vectors(curve), axis=1)
    return float(np.sum(k ** 2 * dual_lengths(curve)) - 4 * np.pi ** 2 / curve.length)


def measure(state: FlowState, config: FlowConfig) -> Record:
    """Evaluate every enabled monitor on one snapshot."""
    curve = state.curve
    int_k2 = float(np.sum(state.k ** 2 * dual_lengths(curve)))
    rec = Record(t=state.t, step=state.step, L=curve.length, k_max=state.k_max,
                 int_k2=int_k2, fenchel_slack=int_k2 - 4 * np.pi ** 2 / curve.length,
                 remesh_dl=state.remesh_dl)
    if config.monitor_huisken:
        rec.min_dpsi = min_huisken_ratio(curve).value
    for pid, plane in config.planes:
        try:
            rec.crossings[pid] = count_plane_crossings(curve, plane).count
        except TangentialContactError:
            rec.crossings[pid] = None
    if config.monitor_symmetric and config.planes:
        rec.sym_defect = max(symmetry_defect(curve, p) for _, p in config.planes)
        plane = config.anchor_plane
        try:
            pairing = build_symmetric_pairing(curve, plane, state.anchor, config.symmetry_tol)
        except (SymmetryError, TangentialContactError):
            rec.symmetric_two_crossing = False
        else:
            rec.symmetric_two_crossing = True
            rep = min_symmetric_ratio(pairing, diagnostics=config.monitor_diagnostics)
            rec.min_I = rep.value
            rec.min_I_interior = rep.interior_value
            rec.argmin_s0 = 0.0 if rep.at_boundary else rep.s0
            rec.alpha0 = 0.0 if rep.at_boundary else rep.alpha0
            rec.var_res1, rec.var_res2 = rep.r1, rep.r2
            rec.geo_slack, rec.rate_bound = rep.geo_slack, rep.rate_bound
    if config.monitor_projection:
        try:
            proj = is_one_to_one_convex_projection(curve)
            rec.proj_injective, rec.proj_convex = proj.injective, proj.convex
        except ProjectionError:
            rec.proj_injective = rec.proj_convex = False
    return rec


def _central_difference(t: np.ndarray, f: np.ndarray, i: int) -> float:
    """Second-order derivative estimate at ``t[i]`` on a nonuniform grid."""
    h0, h1 = t[i] - t[i - 1], t[i + 1] - t[i]
    return (-h1 / (h0 * (h0 + h1)) * f[i - 1] + (h1 - h0) / (h0 * h1) * f[i]
            + h0 / (h1 * (h0 + h1)) * f[i + 1])


def observed_rate(trace: FlowTrace) -> np.ndarray:
    """Central-difference d(min I)/dt at interior records (NaN elsewhere)."""
    t = trace.times
    m = trace.column("min_I")
    out = np.full(len(t), np.nan)
    for i in range(1, len(t) - 1):
        if t[i - 1] < t[i] < t[i + 1] and np.all(np.isfinite(m[i - 1:i + 2])):
            out[i] = _central_difference(t, m, i)
    return out


def apply_rate_verdicts(trace: FlowTrace, tol: float = 1e-3) -> None:
    """Fill ``rate_ok`` where an interior argmin and both neighbours exist."""
    rates = observed_rate(trace)
    for rec, rate in zip(trace.records, rates):
        if np.isfinite(rate) and np.isfinite(rec.rate_bound):
            rec.rate_ok = bool(rate >= rec.rate_bound - rate_tolerance(rec.rate_bound, tol))
        else:
            rec.rate_ok = None


def resolve_cap(config: FlowConfig, state: FlowState) -> float:
    if config.curvature_cap is None:
        return np.inf
    if config.curvature_cap == "auto":
        return max(CAP_SCALE / state.curve.length, CAP_FACTOR * state.k_max)
    return float(config.curvature_cap)


def run(config: FlowConfig, progress=None) -> FlowTrace:
    """Integrate until the first stop condition, recording monitors.

    ``progress`` is called with each new :class:`Record` if given.
    """
    state = initial_state(config)
    trace = FlowTrace(config, initial_length=state.curve.length)
    trace.curvature_cap = cap = resolve_cap(config, state)
    floor = (config.length_floor or 0.0) * state.curve.length

    def record(st: FlowState):
        rec = measure(st, config)
        trace.records.append(rec)
        trace.snapshots.append(st.curve)
        if progress is not None:
            progress(rec)

    if config.max_steps == 0:
        trace.status = STATUS_MAX_STEPS
        return trace
    record(state)
    h_ref = state.curve.length / config.n
    while True:
        if state.curve.length <= floor:
            trace.status = STATUS_LENGTH
            break
        if state.k_max >= cap:
            trace.status = STATUS_CAP
            break
        if config.max_steps is not None and state.step >= config.max_steps:
            trace.status = STATUS_MAX_STEPS
            break
        prev_anchor = state.anchor
        try:
            state = step(state, config)
        except (FlowAbort, SymmetryError) as exc:
            trace.status = STATUS_ABORTED
            trace.abort_reason = str(exc)
            log.warning("flow aborted at step %d: %s", state.step, exc)
            break
        if state.step % config.resample_every == 0:
            h_ref = state.curve.length / config.n
            if np.linalg.norm(state.anchor - prev_anchor) > 4 * h_ref:
                trace.anchor_jumps += 1
        if (state.step % config.record_every == 0 or config.record_dl is not None
                and state.curve.length < (1 - config.record_dl) * trace.records[-1].L):
            record(state)
    if trace.records[-1].step != state.step:
        record(state)
    apply_rate_verdicts(trace)
    return trace


# -- post-run checks ---------------------------------------------------------

def length_decay_check(trace: FlowTrace, t_max: float | None = None,
                       include_remesh: bool = False) -> float:
    """Max relative gap between central-difference dL/dt and -int k^2 ds.

    By default the length changes caused by resampling are removed first,
    so only the motion of the curve enters dL/dt.
    """
    t = trace.times
    L = trace.column("L")
    if not include_remesh:
        L = L - trace.column("remesh_dl")
    k2 = trace.column("int_k2")
    worst = 0.0
    for i in range(1, len(t) - 1):
        if t_max is not None and t[i + 1] > t_max:
            break
        if not t[i - 1] < t[i] < t[i + 1]:
            continue
        dLdt = _central_difference(t, L, i)
        worst = max(worst, abs(dLdt + k2[i]) / k2[i])
    return worst


def crossing_monotonicity_monitor(trace: FlowTrace, plane_id: str) -> bool:
    """True iff the recorded crossing counts never increase."""
    counts = []
    for rec in trace.records:
        c = rec.crossings.get(plane_id)
        if c is None:
            warnings.warn(f"tangential contact with plane {plane_id!r} at t={rec.t:.6g}; row skipped")
            continue
        counts.append(c)
    return all(b <= a for a, b in zip(counts, counts[1:]))


def symmetric_persistence(trace: FlowTrace, config: FlowConfig) -> bool:
    """Every recorded snapshot passes the symmetric two-crossing test."""
    plane = config.anchor_plane
    return plane is not None and all(
        is_symmetric_two_crossing(c, plane, config.symmetry_tol).ok for c in trace.snapshots)
