"""End-to-end acceptance runs on the shipped configs, one test per criterion.

Each test logs a single pass/fail line; the lines are repeated in the
terminal summary.  The figure1.ini run takes several minutes.
"""

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from scsf.cli import (DIAG_TOL, LENGTH_DECAY_TOL, LENGTH_DECAY_WINDOW, MONOTONE_SLACK,
                      RATE_FRACTION, non_decreasing)
from scsf.config import parse_config
from scsf.curve import FourierSpec, synthesize_fourier_curve
from scsf.flow import STATUS_LENGTH, FlowTrace, crossing_monotonicity_monitor, length_decay_check, run
from scsf.ratio import min_huisken_ratio
from scsf.singularity import TYPE_I, SingularityReport, analyze

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
ORACLE_N = 512


@dataclass
class Experiment:
    trace: FlowTrace
    sing: SingularityReport
    seconds: float


def experiment(name):
    cfg = parse_config(CONFIGS / f"{name}.ini")
    start = time.perf_counter()
    trace = run(cfg.flow)
    sing = analyze(trace.times, trace.column("k_max"), trace.snapshots, trace.column("min_I"),
                   cfg.q_window, cfg.drift)
    return Experiment(trace, sing, time.perf_counter() - start)


@pytest.fixture(scope="session")
def circle_run():
    return experiment("circle")


@pytest.fixture(scope="session")
def ellipse_run():
    return experiment("ellipse")


@pytest.fixture(scope="session")
def figure1_run():
    return experiment("figure1")


@pytest.fixture(scope="session")
def six_run():
    return experiment("six_crossings")


def summary(parts):
    failed = [name for name, ok, _ in parts if not ok]
    detail = "; ".join(f"{name} {text}" for name, _, text in parts)
    return not failed, detail + (f"  [failed: {', '.join(failed)}]" if failed else "")


def test_criterion_1_circle(circle_run, criterion_log):
    tr, sing = circle_run.trace, circle_run.sing
    t, L = tr.times, tr.column("L")
    early = t <= 0.45
    err = float(np.max(np.abs(L[early] / (2 * np.pi * np.sqrt(1 - 2 * t[early])) - 1)))
    cls = sing.classification
    T = sing.fit.T if sing.fit.ok else np.nan
    round_err = float(np.max(np.abs(sing.roundness - 1))) if len(sing.roundness) else np.inf
    parts = [
        ("L(t)", err < 5e-3, f"max rel err {err:.2e}"),
        ("T_est", 0.495 <= T <= 0.505, f"{T:.6f}"),
        ("type", sing.verdict == TYPE_I and 0.45 <= cls.q_min and cls.q_max <= 0.55,
         f"{sing.verdict} Q in [{cls.q_min:.4f}, {cls.q_max:.4f}]"),
        ("roundness", round_err < 0.01, f"max |r-1| {round_err:.2e}"),
        ("runtime", circle_run.seconds < 60, f"{circle_run.seconds:.1f}s"),
    ]
    ok, detail = summary(parts)
    assert criterion_log(1, ok, detail), detail


def test_criterion_2_ellipse_huisken(ellipse_run, criterion_log):
    tr = ellipse_run.trace
    dpsi = tr.column("min_dpsi")
    mono, worst = non_decreasing(dpsi, MONOTONE_SLACK)
    final = float(dpsi[-1])
    parts = [
        ("monotone", mono, f"worst rel step {worst:.2e}"),
        ("final", abs(final - 1) <= 0.02 and tr.status == STATUS_LENGTH,
         f"{final:.5f} at {tr.status}"),
    ]
    ok, detail = summary(parts)
    assert criterion_log(2, ok, detail), detail


def test_criterion_3_symmetric_ratio(figure1_run, criterion_log):
    tr = figure1_run.trace
    min_I = tr.column("min_I")
    positive = bool(np.all(np.isfinite(min_I)) and np.all(min_I > 0))
    mono, worst = non_decreasing(min_I, MONOTONE_SLACK)
    counts = [r.crossings.get("y0") for r in tr.records]
    parts = [
        ("positive", positive, f"min {np.nanmin(min_I):.6f}"),
        ("monotone", mono, f"worst rel step {worst:.2e} over {len(min_I)} records"),
        ("crossings", all(c == 2 for c in counts), f"seen {sorted(set(counts), key=str)}"),
    ]
    ok, detail = summary(parts)
    assert criterion_log(3, ok, detail), detail


def test_criterion_4_type_one_round(figure1_run, criterion_log):
    tr, sing = figure1_run.trace, figure1_run.sing
    cls = sing.classification
    final_round = float(sing.roundness[-1]) if len(sing.roundness) else np.inf
    proj = all(bool(r.proj_injective) and bool(r.proj_convex) for r in tr.records)
    parts = [
        ("type", sing.verdict == TYPE_I, f"{sing.verdict} Q in [{cls.q_min:.3f}, {cls.q_max:.3f}]"),
        ("roundness monotone", sing.roundness_monotone(0.02),
         f"on {len(sing.tail_roundness())} tail records (whole run monotone from t={sing.monotone_since():.4g})"),
        ("roundness final", final_round <= 1.1, f"{final_round:.4f}"),
        ("rescaled d/psi", sing.final_rescaled_min_dpsi >= 0.95, f"{sing.final_rescaled_min_dpsi:.4f}"),
        ("projection", proj, f"{len(tr.records)} records"),
        ("runtime", figure1_run.seconds < 900, f"{figure1_run.seconds:.0f}s"),
    ]
    ok, detail = summary(parts)
    assert criterion_log(4, ok, detail), detail


def test_criterion_5_diagnostics(ellipse_run, figure1_run, criterion_log):
    parts = []
    for name, exp in (("ellipse", ellipse_run), ("figure1", figure1_run)):
        tr, sing = exp.trace, exp.sing
        r1 = tr.column("var_res1")
        r2 = tr.column("var_res2")
        geo = tr.column("geo_slack")
        r1, r2, geo = r1[np.isfinite(r1)], r2[np.isfinite(r2)], geo[np.isfinite(geo)]
        verdicts = [r.rate_ok for r in tr.records if r.rate_ok is not None]
        frac = sum(verdicts) / len(verdicts) if verdicts else np.nan
        fen = tr.column("fenchel_slack") / (4 * np.pi ** 2 / tr.column("L"))
        t_max = LENGTH_DECAY_WINDOW * sing.fit.T if sing.fit.ok else None
        decay = length_decay_check(tr, t_max=t_max)
        parts += [
            (f"{name} r1", len(r1) > 0 and np.all(np.abs(r1) < DIAG_TOL),
             f"max {np.abs(r1).max():.1e} ({len(r1)} argmins)"),
            (f"{name} r2", np.all(r2 > -DIAG_TOL), f"min {r2.min():.1e}"),
            (f"{name} geodesic", np.all(geo >= -DIAG_TOL), f"min {geo.min():.1e}"),
            (f"{name} rate", frac >= RATE_FRACTION, f"{sum(verdicts)}/{len(verdicts)}"),
            (f"{name} fenchel", np.all(fen >= -DIAG_TOL), f"min {fen.min():.1e}"),
            (f"{name} length decay", decay < LENGTH_DECAY_TOL, f"{decay:.2e}"),
        ]
    ok, detail = summary(parts)
    assert criterion_log(5, ok, detail), detail


def test_criterion_6_oracle(frozen, criterion_log):
    parts = []
    for name, entry in sorted(frozen["huisken_bruteforce_4096"].items()):
        terms = tuple(tuple(map(tuple, c)) for c in entry["terms"])
        value = min_huisken_ratio(synthesize_fourier_curve(FourierSpec(terms, ORACLE_N))).value
        gap = abs(value - entry["min_ratio"])
        parts.append((name, gap < 1e-4, f"{gap:.1e}"))
    ok, detail = summary(parts)
    assert criterion_log(6, ok, detail), detail


def test_criterion_7_sturm(six_run, criterion_log):
    tr = six_run.trace
    counts = [r.crossings.get("y0") for r in tr.records]
    parts = [
        ("start", counts[0] == 6, f"{counts[0]}"),
        ("non-increasing", crossing_monotonicity_monitor(tr, "y0"),
         f"sequence {[c for i, c in enumerate(counts) if i == 0 or c != counts[i - 1]]}"),
    ]
    ok, detail = summary(parts)
    assert criterion_log(7, ok, detail), detail
