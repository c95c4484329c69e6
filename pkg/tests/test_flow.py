import numpy as np
import pytest

from scsf.curve import Curve, FourierSpec, circle, synthesize_fourier_curve
from scsf.flow import (STATUS_LENGTH, STATUS_MAX_STEPS, FlowConfig, crossing_monotonicity_monitor,
                       fenchel_check, initial_state, length_decay_check, run, step,
                       symmetric_persistence)
from scsf.symmetry import Hyperplane, symmetry_defect

CIRCLE = (((1, 1.0, 0.0),), ((1, 0.0, 1.0),))
ELLIPSE = (((1, 2.0, 0.0),), ((1, 0.0, 1.0),))
FIG1 = (((1, 1.0, 0.0),), ((1, 0.0, 0.3),), ((2, 0.5, 0.0), (4, 0.5, 0.0), (6, 0.5, 0.0)))
Y0_2 = ("y0", Hyperplane.coordinate(1, 2))
Y0_3 = ("y0", Hyperplane.coordinate(1, 3))
X0_3 = ("x0", Hyperplane.coordinate(0, 3))


def quiet_config(terms, n=512, **kw):
    kw.setdefault("monitor_huisken", False)
    kw.setdefault("monitor_symmetric", False)
    return FlowConfig(FourierSpec(terms, n), n=n, **kw)


@pytest.fixture(scope="module")
def circle_trace():
    return run(quiet_config(CIRCLE, record_every=200, length_floor=0.5))


# -- shrinking circle -----------------------------------------------------------

def test_circle_length_follows_exact_solution(circle_trace):
    t, L = circle_trace.times, circle_trace.column("L")
    exact = 2 * np.pi * np.sqrt(1 - 2 * t)
    assert np.max(np.abs(L / exact - 1)) < 5e-3
    i = int(np.argmin(np.abs(t - 0.25)))
    assert abs(t[i] - 0.25) < 0.01
    assert L[i] == pytest.approx(2 * np.pi * np.sqrt(1 - 2 * t[i]), rel=5e-3)


def test_circle_error_shrinks_with_resolution():
    errs = []
    for n in (128, 256):
        tr = run(quiet_config(CIRCLE, n=n, record_every=100, length_floor=0.7))
        t, L = tr.times, tr.column("L")
        errs.append(np.max(np.abs(L / (2 * np.pi * np.sqrt(1 - 2 * t)) - 1)))
    assert errs[1] < errs[0]


def test_circle_stops_at_length_floor():
    tr = run(quiet_config(CIRCLE, n=128, record_every=50, length_floor=0.1))
    assert tr.status == STATUS_LENGTH
    assert np.all(np.diff(tr.times) > 0)
    assert tr.records[-1].L <= 0.1 * tr.initial_length


def test_circle_length_decay_residual(circle_trace):
    assert length_decay_check(circle_trace) < 0.01


def test_circle_fenchel_equality():
    for r in (0.5, 1.0, 3.0):
        c = circle(512, radius=r)
        assert abs(fenchel_check(c)) < 1e-3 * 4 * np.pi ** 2 / c.length


# -- generic invariants -----------------------------------------------------------

def test_planar_curve_stays_planar():
    lifted = tuple(ELLIPSE) + ((),)
    cfg = quiet_config(lifted, n=256)
    s = initial_state(cfg)
    for _ in range(500):
        s = step(s, cfg)
    assert np.max(np.abs(s.curve.points[:, 2])) <= 1e-12 * max(s.t, 1.0)


def test_figure1_length_strictly_decreasing():
    cfg = FlowConfig(FourierSpec(FIG1, 1024), n=1024, planes=(Y0_3,))
    s = initial_state(cfg)
    lengths = [s.curve.length]
    for _ in range(2000):
        s = step(s, cfg)
        lengths.append(s.curve.length)
    assert np.all(np.diff(lengths) < 0)


def test_max_steps_zero_gives_empty_trace():
    tr = run(quiet_config(CIRCLE, n=128, max_steps=0))
    assert tr.status == STATUS_MAX_STEPS
    assert tr.records == []


def test_max_steps_stop():
    tr = run(quiet_config(CIRCLE, n=128, max_steps=30, record_every=10, length_floor=None,
                          curvature_cap=None))
    assert tr.status == STATUS_MAX_STEPS
    assert [r.step for r in tr.records] == [0, 10, 20, 30]


@pytest.mark.parametrize("kw", [dict(sigma=0.9), dict(sigma=0.0), dict(n=16),
                                dict(record_every=0), dict(length_floor=1.5),
                                dict(max_steps=None, length_floor=None, curvature_cap=None),
                                dict(curvature_cap="big")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        quiet_config(CIRCLE, **kw)


def test_plane_dimension_mismatch():
    with pytest.raises(ValueError):
        quiet_config(CIRCLE, planes=(Y0_3,))


def test_duplicate_plane_ids():
    with pytest.raises(ValueError):
        quiet_config(FIG1, planes=(Y0_3, ("y0", Hyperplane.coordinate(0, 3))))


# -- Fenchel and length decay ---------------------------------------------------

def test_ellipse_fenchel_slack_matches_quadrature(frozen):
    c = synthesize_fourier_curve(FourierSpec(ELLIPSE, 2048))
    assert fenchel_check(c) == pytest.approx(frozen["ellipse_2_1"]["fenchel_slack"], rel=0.01)


def test_figure1_fenchel_positive():
    assert fenchel_check(synthesize_fourier_curve(FourierSpec(FIG1, 2048))) > 0


def test_ellipse_length_decay():
    tr = run(quiet_config(ELLIPSE, record_every=200, length_floor=0.5))
    assert length_decay_check(tr) < 0.02


# -- anchoring, symmetry and crossings -----------------------------------------------

def test_anchor_stays_on_plane():
    cfg = FlowConfig(FourierSpec(FIG1, 512), n=512, planes=(Y0_3,), monitor_huisken=False,
                     monitor_symmetric=False, max_steps=200, record_every=25)
    tr = run(cfg)
    for c in tr.snapshots:
        assert abs(c.points[0, 1]) < 1e-9 * c.length
    assert tr.anchor_jumps == 0


def test_symmetrization_keeps_defect_at_rounding_level():
    cfg = FlowConfig(FourierSpec(FIG1, 512), n=512, planes=(Y0_3, X0_3), symmetrize=True,
                     resample_every=25)
    s = initial_state(cfg)
    for _ in range(1000):
        s = step(s, cfg)
    for _, plane in cfg.planes:
        assert symmetry_defect(s.curve, plane) < 1e-14 * s.curve.length


def test_symmetric_persistence_without_symmetrization():
    cfg = FlowConfig(FourierSpec(FIG1, 512), n=512, planes=(Y0_3,), monitor_huisken=False,
                     monitor_symmetric=False, max_steps=2000, record_every=250)
    tr = run(cfg)
    assert symmetric_persistence(tr, cfg)
    assert all(symmetry_defect(c, Y0_3[1]) < 1e-6 * c.length for c in tr.snapshots)


def test_circle_crossings_constant_two():
    tr = run(quiet_config(CIRCLE, n=256, record_every=100, length_floor=0.5, planes=(Y0_2,)))
    assert all(r.crossings["y0"] == 2 for r in tr.records)
    assert crossing_monotonicity_monitor(tr, "y0")


def test_six_crossings_never_increase():
    terms = (((1, 1.0, 0.0),), ((3, 0.0, 0.5),))
    tr = run(quiet_config(terms, n=256, record_every=100, length_floor=0.3, planes=(Y0_2,)))
    counts = [r.crossings["y0"] for r in tr.records]
    assert counts[0] == 6
    assert crossing_monotonicity_monitor(tr, "y0")


def test_crossing_monitor_flags_increase():
    tr = run(quiet_config(CIRCLE, n=128, max_steps=20, record_every=10, planes=(Y0_2,)))
    tr.records[-1].crossings["y0"] = 4
    assert not crossing_monotonicity_monitor(tr, "y0")


def test_tangential_row_skipped_with_warning():
    tr = run(quiet_config(CIRCLE, n=128, max_steps=20, record_every=10, planes=(Y0_2,)))
    tr.records[1].crossings["y0"] = None
    with pytest.warns(UserWarning):
        assert crossing_monotonicity_monitor(tr, "y0")


def test_repeated_vertex_rejected():
    pts = circle(64).points.copy()
    pts[5] = pts[4]
    with pytest.raises(ValueError):
        Curve(pts)
