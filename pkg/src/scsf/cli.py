"""Command line driver: ``run``, ``check`` and ``replay``.

Exit codes: 0 ok, 2 configuration error, 3 flow aborted, 4 monitor violation.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, echo_config, parse_config
from .flow import (STATUS_ABORTED, FlowTrace, crossing_monotonicity_monitor, initial_state,
                   length_decay_check, run)
from .singularity import SingularityReport, analyze, classify_type, estimate_blowup_time
from .svg import emit_snapshot_svg, view_box
from .symmetry import TangentialContactError, is_symmetric_two_crossing

log = logging.getLogger("scsf")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_VIOLATION = 4

MONOTONE_SLACK = 1e-4
DIAG_TOL = 1e-3
RATE_FRACTION = 0.99
LENGTH_DECAY_TOL = 0.02
LENGTH_DECAY_WINDOW = 0.8


# -- monitor verdicts ----------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str


def non_decreasing(values, slack: float = MONOTONE_SLACK) -> tuple[bool, float]:
    """Whether each step drops by less than ``slack`` times the current value.

    Returns the verdict and the worst relative step.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if len(v) < 2:
        return True, 0.0
    rel = np.diff(v) / np.abs(v[1:])
    return bool(np.all(rel >= -slack)), float(rel.min())


def _finite(col: np.ndarray) -> np.ndarray:
    return col[np.isfinite(col)]


def monitor_checks(trace: FlowTrace, cfg: ExperimentConfig,
                   sing: SingularityReport | None = None) -> list[Check]:
    """Evaluate every enabled monitor over a finished trace."""
    flow = cfg.flow
    checks = []
    if not trace.records:
        return checks
    slack = trace.column("fenchel_slack")
    L = trace.column("L")
    rel = slack / (4 * np.pi ** 2 / L)
    checks.append(Check("fenchel", bool(np.all(rel >= -DIAG_TOL)), f"min relative slack {rel.min():.3e}"))

    T = sing.fit.T if sing is not None and sing.fit.ok else None
    t_max = LENGTH_DECAY_WINDOW * T if T is not None else None
    if len(trace.records) >= 3:
        res = length_decay_check(trace, t_max=t_max)
        window = f"t < {t_max:.6g}" if t_max is not None else "whole run"
        checks.append(Check("length_decay", res < LENGTH_DECAY_TOL, f"max residual {res:.3e} ({window})"))

    for pid, _ in flow.planes:
        ok = crossing_monotonicity_monitor(trace, pid)
        counts = [r.crossings.get(pid) for r in trace.records]
        seen = sorted({c for c in counts if c is not None})
        checks.append(Check(f"crossings_{pid}", ok, f"non-increasing; counts seen {seen}"))

    if flow.monitor_symmetric and flow.planes:
        sym = [r.symmetric_two_crossing for r in trace.records]
        checks.append(Check("symmetric_two_crossing", all(sym),
                            f"{sum(bool(s) for s in sym)}/{len(sym)} records"))
        min_I = trace.column("min_I")
        pos = bool(np.all(np.isfinite(min_I)) and np.all(min_I > 0))
        checks.append(Check("min_I_positive", pos, f"min {np.nanmin(min_I):.6g}"))
        mono, worst = non_decreasing(min_I)
        checks.append(Check("min_I_non_decreasing", mono, f"worst relative step {worst:.3e}"))
        if flow.monitor_diagnostics:
            r1 = _finite(trace.column("var_res1"))
            r2 = _finite(trace.column("var_res2"))
            geo = _finite(trace.column("geo_slack"))
            checks.append(Check("first_variation", bool(np.all(np.abs(r1) < DIAG_TOL)),
                                f"max |r1| {np.abs(r1).max() if len(r1) else 0:.3e} over {len(r1)} argmins"))
            checks.append(Check("second_variation", bool(np.all(r2 > -DIAG_TOL)),
                                f"min r2 {r2.min() if len(r2) else np.nan:.3e}"))
            checks.append(Check("geodesic_bound", bool(np.all(geo >= -DIAG_TOL)),
                                f"min slack {geo.min() if len(geo) else np.nan:.3e}"))
            verdicts = [r.rate_ok for r in trace.records if r.rate_ok is not None]
            frac = sum(verdicts) / len(verdicts) if verdicts else 1.0
            checks.append(Check("rate_bound", frac >= RATE_FRACTION,
                                f"{sum(verdicts)}/{len(verdicts)} records"))

    if flow.monitor_projection:
        inj = [bool(r.proj_injective) for r in trace.records]
        cvx = [bool(r.proj_convex) for r in trace.records]
        checks.append(Check("projection", all(inj) and all(cvx),
                            f"injective {sum(inj)}/{len(inj)}, convex {sum(cvx)}/{len(cvx)}"))
    return checks


# -- output ----------------------------------------------------------------------

def trace_columns(plane_ids) -> list[str]:
    return (["t", "step", "L", "k_max", "int_k2", "min_dpsi", "min_I", "argmin_s0"]
            + [f"crossings_{pid}" for pid in plane_ids]
            + ["proj_injective", "proj_convex", "sym_defect", "var_res1", "var_res2",
               "geo_slack", "rate_ok"])


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "nan" if math.isnan(v) else repr(v)


def write_trace_csv(trace: FlowTrace, path) -> None:
    ids = [pid for pid, _ in trace.config.planes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_columns(ids))
        for r in trace.records:
            row = [r.t, r.step, r.L, r.k_max, r.int_k2, r.min_dpsi, r.min_I, r.argmin_s0]
            row += [r.crossings.get(pid) for pid in ids]
            row += [r.proj_injective, r.proj_convex, r.sym_defect, r.var_res1, r.var_res2,
                    r.geo_slack, r.rate_ok]
            w.writerow([_cell(v) for v in row])


def read_trace_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace")
    header, body = rows[0], rows[1:]
    for col in ("t", "k_max"):
        if col not in header:
            raise ValueError(f"{path}: missing column {col!r}")
    out = {}
    for j, name in enumerate(header):
        out[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return out


def write_singularity_csv(sing: SingularityReport, t, path) -> None:
    t = np.asarray(t, dtype=float)
    Q = sing.classification.Q
    tail = sing.classification.tail
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "Q", "in_tail", "roundness"])
        for i, ti in enumerate(t):
            q = Q[i] if i < len(Q) else np.nan
            rd = sing.roundness[i] if i < len(sing.roundness) else np.nan
            w.writerow([_cell(ti), _cell(q), _cell(bool(tail[i]) if i < len(tail) else None), _cell(rd)])


def singularity_lines(sing: SingularityReport) -> list[str]:
    fit, cls = sing.fit, sing.classification
    lines = ["[singularity]"]
    if fit.ok:
        lines.append(f"T_est = {fit.T:.10g}")
        lines.append(f"fit_residual = {fit.residual:.3e}")
    else:
        lines.append(f"T_est = none ({fit.status})")
    lines.append(f"classification = {cls.verdict}")
    if np.isfinite(cls.q_min):
        lines.append(f"Q_tail = [{cls.q_min:.6g}, {cls.q_max:.6g}] over {int(cls.tail.sum())} records")
    if len(sing.roundness):
        lines.append(f"rescaled_roundness_final = {sing.roundness[-1]:.6g}")
        lines.append(f"rescaled_roundness_monotone_tail = {sing.roundness_monotone()}")
        lines.append(f"rescaled_roundness_monotone_since_t = {sing.monotone_since():.6g}")
    if np.isfinite(sing.final_min_dpsi):
        lines.append(f"final_min_dpsi = {sing.final_min_dpsi:.8g}")
    if np.isfinite(sing.final_rescaled_min_dpsi):
        lines.append(f"final_rescaled_min_dpsi = {sing.final_rescaled_min_dpsi:.8g}")
    if np.isfinite(sing.final_min_I):
        lines.append(f"final_min_I = {sing.final_min_I:.8g}")
    return lines


def write_report(path, trace: FlowTrace, checks: list[Check], sing: SingularityReport | None,
                 extra: list[str] = ()) -> None:
    lines = ["[run]", f"status = {trace.status}"]
    if trace.abort_reason:
        lines.append(f"abort_reason = {trace.abort_reason}")
    if trace.records:
        last = trace.records[-1]
        lines += [f"records = {len(trace.records)}", f"steps = {last.step}", f"t_final = {last.t:.10g}",
                  f"L0 = {trace.initial_length:.10g}", f"L_final = {last.L:.10g}",
                  f"k_max_final = {last.k_max:.10g}", f"curvature_cap = {trace.curvature_cap:.6g}",
                  f"anchor_jumps = {trace.anchor_jumps}"]
    lines += list(extra)
    lines += ["", "[monitors]"]
    lines += [f"{c.name} = {'pass' if c.ok else 'FAIL'} ({c.detail})" for c in checks]
    violations = [c.name for c in checks if not c.ok]
    lines.append(f"violations = {', '.join(violations) if violations else 'none'}")
    if sing is not None:
        lines += [""] + singularity_lines(sing)
    Path(path).write_text("\n".join(lines) + "\n")


def write_snapshots(trace: FlowTrace, cfg: ExperimentConfig, out: Path) -> int:
    if cfg.snapshot_every == 0 or not trace.snapshots:
        return 0
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    first = trace.snapshots[0].points
    boxes = {v: view_box(first, v) for v in cfg.views}
    picks = list(range(0, len(trace.snapshots), cfg.snapshot_every))
    if picks[-1] != len(trace.snapshots) - 1:
        picks.append(len(trace.snapshots) - 1)
    for i in picks:
        rec = trace.records[i]
        for v in cfg.views:
            emit_snapshot_svg(trace.snapshots[i].points, v, snap_dir / f"rec{i:05d}_{v}.svg",
                              box=boxes[v], label=f"t = {rec.t:.6g}, view {v}")
    return len(picks)


# -- commands ----------------------------------------------------------------------

def refuse_asymmetric(cfg: ExperimentConfig) -> str | None:
    """Reason to refuse the run, when the symmetric monitor cannot apply at t = 0."""
    flow = cfg.flow
    if not (flow.monitor_symmetric and flow.planes):
        return None
    state = initial_state(flow)
    try:
        verdict = is_symmetric_two_crossing(state.curve, flow.anchor_plane, flow.symmetry_tol)
    except TangentialContactError as exc:
        return f"not symmetric two-crossing ({exc})"
    if not verdict.ok:
        return (f"not symmetric two-crossing (crossings={verdict.crossings}, "
                f"defect={verdict.defect:.3e})")
    return None


def run_experiment(cfg: ExperimentConfig, out_dir=None, quiet: bool = False) -> int:
    out = Path(out_dir or cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.echo.ini").write_text(echo_config(cfg))
    except OSError as exc:
        raise OSError(f"cannot write to {out}: {exc.strerror}") from exc

    reason = refuse_asymmetric(cfg)
    if reason is not None:
        (out / "report.txt").write_text(
            f"[run]\nstatus = refused\n\n[monitors]\nsymmetric_two_crossing = FAIL ({reason})\n"
            "violations = symmetric_two_crossing\n")
        log.error("symmetric ratio monitor: %s", reason)
        return EXIT_VIOLATION

    def progress(rec):
        if not quiet:
            log.info("t=%.6g step=%d L=%.6g k_max=%.6g min_I=%.6g", rec.t, rec.step, rec.L,
                     rec.k_max, rec.min_I)

    trace = run(cfg.flow, progress=progress)
    sing = None
    if trace.records:
        sing = analyze(trace.times, trace.column("k_max"), trace.snapshots, trace.column("min_I"),
                       cfg.q_window, cfg.drift)
    checks = monitor_checks(trace, cfg, sing)
    write_trace_csv(trace, out / "trace.csv")
    if sing is not None:
        write_singularity_csv(sing, trace.times, out / "singularity.csv")
    write_report(out / "report.txt", trace, checks, sing)
    write_snapshots(trace, cfg, out)

    if not quiet:
        for c in checks:
            log.info("%s: %s (%s)", c.name, "pass" if c.ok else "FAIL", c.detail)
        if sing is not None:
            log.info("classification: %s", sing.verdict)
        log.info("status: %s; outputs in %s", trace.status, out)
    if trace.status == STATUS_ABORTED:
        log.error("flow aborted: %s", trace.abort_reason)
        return EXIT_ABORT
    if any(not c.ok for c in checks):
        return EXIT_VIOLATION
    return EXIT_OK


def replay(trace_path, out_dir=None, cfg: ExperimentConfig | None = None) -> str:
    """Blow-up fit and classification from an existing ``trace.csv``."""
    cols = read_trace_csv(trace_path)
    t, k = cols["t"], cols["k_max"]
    q_window, drift = (cfg.q_window, cfg.drift) if cfg else ((0.1, 10.0), 3.0)
    fit = estimate_blowup_time(t, k)
    cls = classify_type(t, k, fit.T, q_window[0], q_window[1], drift)
    min_I = cols.get("min_I")
    sing = SingularityReport(fit, cls, np.array([]), np.array([]),
                             final_min_dpsi=float(cols["min_dpsi"][-1]) if "min_dpsi" in cols and len(t) else np.nan,
                             final_min_I=float(min_I[-1]) if min_I is not None and len(t) else np.nan)
    text = "\n".join(singularity_lines(sing)) + "\n"
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "replay.txt").write_text(text)
        write_singularity_csv(sing, t, out / "singularity.csv")
    return text


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scsf", description="Space curve shortening flow experiments.")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the flow described by a config file")
    r.add_argument("config")
    c = sub.add_parser("check", help="parse and validate a config file")
    c.add_argument("config")
    rp = sub.add_parser("replay", help="re-run the singularity analysis on a trace.csv")
    rp.add_argument("trace")
    rp.add_argument("--config", help="config providing the classification window")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        if args.command == "check":
            cfg = parse_config(args.config)
            if not args.quiet:
                sys.stdout.write(echo_config(cfg))
            return EXIT_OK
        if args.command == "run":
            cfg = parse_config(args.config)
            return run_experiment(cfg, args.out, args.quiet)
        cfg = parse_config(args.config) if args.config else None
        text = replay(args.trace, args.out, cfg)
        if not args.quiet:
            sys.stdout.write(text)
        return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG if args.command != "run" else EXIT_ABORT

