"""Experiment configuration: a sectioned ``key = value`` text format.

Grammar
-------
Blank lines and lines starting with ``#`` or ``;`` are ignored.  Sections:

``[curve]``
    ``n`` (sample count) and one series per coordinate, named ``x``, ``y``,
    ``z``, ``x4``, ``x5``, ...  A series is a ``+``/``-`` separated sum of
    terms ``coef cos k``, ``coef sin k`` or a bare constant, e.g.
    ``z = 0.5 cos 2 + 0.5 cos 4 + 0.5 cos 6``.
``[flow]``
    ``sigma``, ``resample_every``, ``record_every``, ``record_dl``,
    ``max_steps``, ``length_floor``, ``curvature_cap`` (number, ``auto`` or
    ``none``), ``symmetrize``.
``[planes]``
    ``<id> = normal a b c ... offset d``.  The first plane anchors the
    symmetric frame.  Without the section the plane ``y = 0`` (id ``y0``)
    is used; an empty section means no planes.
``[monitors]``
    ``huisken``, ``symmetric``, ``projection``, ``diagnostics`` (booleans),
    ``symmetry_tol``.
``[analysis]``
    ``q_lo``, ``q_hi``, ``drift``: Type I window on ``k_max^2 (T - t)``.
``[output]``
    ``dir``, ``snapshot_every`` (records, 0 disables), ``views`` (e.g.
    ``xy xz yz``), ``seed`` (reserved).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curve import FourierSpec
from .flow import FlowConfig
from .symmetry import Hyperplane


class ConfigError(ValueError):
    """Invalid configuration; ``line`` and ``field`` locate the problem when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


AXIS_NAMES = ("x", "y", "z")
FLOW_KEYS = ("sigma", "resample_every", "record_every", "record_dl", "max_steps",
             "length_floor", "curvature_cap", "symmetrize")
MONITOR_KEYS = ("huisken", "symmetric", "projection", "diagnostics", "symmetry_tol")
ANALYSIS_KEYS = ("q_lo", "q_hi", "drift")
OUTPUT_KEYS = ("dir", "snapshot_every", "views", "seed")
SECTIONS = ("curve", "flow", "planes", "monitors", "analysis", "output")


def axis_name(i: int) -> str:
    return AXIS_NAMES[i] if i < 3 else f"x{i + 1}"


def axis_index(name: str) -> int:
    if name in AXIS_NAMES:
        return AXIS_NAMES.index(name)
    m = re.fullmatch(r"x([4-9]|[1-9]\d+)", name)
    if not m:
        raise ValueError(f"unknown coordinate {name!r}")
    return int(m.group(1)) - 1


@dataclass(frozen=True)
class ExperimentConfig:
    flow: FlowConfig
    out_dir: str = "out"
    snapshot_every: int = 10
    views: tuple = ("xy",)
    seed: int = 0
    q_window: tuple = (0.1, 10.0)
    drift: float = 3.0
    source: str = field(default="", compare=False)

    @property
    def planes(self):
        return self.flow.planes


# -- parsing helpers ---------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(cos|sin)|([+-]))")


def _tokens(text: str) -> list:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ValueError(f"cannot read series at {text[pos:].strip()!r}")
        out.append(m.group(1) or m.group(2) or m.group(3))
        pos = m.end()
    return out


def parse_series(text: str) -> tuple:
    """``"0.5 cos 2 - 0.1 sin 3 + 1"`` -> ``((2, .5, 0), (3, 0, -.1), (0, 1, 0))``."""
    toks = _tokens(text)
    if not toks:
        raise ValueError("empty series")
    terms, i = [], 0
    while i < len(toks):
        sign = 1.0
        if toks[i] in "+-":
            sign = -1.0 if toks[i] == "-" else 1.0
            i += 1
        elif terms:
            raise ValueError("terms must be joined by + or -")
        if i >= len(toks) or toks[i] in ("cos", "sin", "+", "-"):
            raise ValueError("expected a coefficient")
        coef = sign * float(toks[i])
        i += 1
        if i < len(toks) and toks[i] in ("cos", "sin"):
            kind = toks[i]
            if i + 1 >= len(toks) or not toks[i + 1].isdigit():
                raise ValueError(f"expected an integer frequency after {kind!r}")
            k = int(toks[i + 1])
            i += 2
            terms.append((k, coef, 0.0) if kind == "cos" else (k, 0.0, coef))
        else:
            terms.append((0, coef, 0.0))
    return tuple(terms)


def format_series(terms) -> str:
    out = []
    for k, a, b in terms:
        for coef, kind in ((a, "cos"), (b, "sin")):
            if coef == 0.0 and not (k == 0 and kind == "cos" and a == b == 0.0):
                continue
            body = f"{abs(coef)!r}" if k == 0 else f"{abs(coef)!r} {kind} {k}"
            if not out:
                out.append(body if coef >= 0 else f"-{body}")
            else:
                out.append(f"{'+' if coef >= 0 else '-'} {body}")
            if k == 0:
                break
    return " ".join(out) if out else "0.0"


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional(text: str, cast):
    return None if text.strip().lower() == "none" else cast(text)


def parse_plane(text: str) -> Hyperplane:
    toks = text.split()
    if not toks or toks[0] != "normal":
        raise ValueError("expected 'normal a b ... [offset d]'")
    toks = toks[1:]
    offset = 0.0
    if "offset" in toks:
        i = toks.index("offset")
        if i != len(toks) - 2:
            raise ValueError("'offset' must be followed by exactly one number at the end")
        offset = float(toks[i + 1])
        toks = toks[:i]
    return Hyperplane(tuple(float(v) for v in toks), offset)


def parse_views(text: str, dim: int) -> tuple:
    views = tuple(text.split())
    for v in views:
        if len(v) != 2 or v[0] == v[1] or any(c not in "xyz"[:dim] for c in v):
            raise ValueError(f"bad view {v!r}: need two distinct axes among {'xyz'[:dim]}")
    return views


# -- parser --------------------------------------------------------------------

class _Lines:
    """Maps (section, key) to line numbers, since configparser does not keep them."""

    def __init__(self, text: str):
        self.where: dict = {}
        section = None
        for no, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            m = re.fullmatch(r"\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                self.where.setdefault((section, None), no)
            elif section is not None and "=" in line:
                self.where.setdefault((section, line.split("=", 1)[0].strip().lower()), no)

    def __call__(self, section: str, key: str | None = None):
        return self.where.get((section, key))


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                   empty_lines_in_values=False)
    try:
        cp.read_string(text, source=source)
    except configparser.ParsingError as exc:
        no = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", line=no) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of a section", line=exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", line=exc.lineno,
                          field=f"{exc.section}.{exc.option}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", line=exc.lineno) from None
    lines = _Lines(text)

    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", line=lines(sec))
    allowed = {"flow": FLOW_KEYS, "monitors": MONITOR_KEYS, "analysis": ANALYSIS_KEYS,
               "output": OUTPUT_KEYS}
    for sec, keys in allowed.items():
        if cp.has_section(sec):
            for key in cp[sec]:
                if key not in keys:
                    raise ConfigError(f"unknown key {key!r}", line=lines(sec, key), field=f"{sec}.{key}")

    def get(sec, key, cast, default):
        if not cp.has_option(sec, key):
            return default
        try:
            return cast(cp[sec][key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), line=lines(sec, key), field=f"{sec}.{key}") from None

    # curve
    if not cp.has_section("curve"):
        raise ConfigError("missing [curve] section")
    n = get("curve", "n", int, None)
    if n is None:
        raise ConfigError("sample count is required", field="curve.n")
    coords = {}
    for key, value in cp["curve"].items():
        if key == "n":
            continue
        try:
            idx = axis_index(key)
            coords[idx] = parse_series(value)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lines("curve", key), field=f"curve.{key}") from None
    dim = len(coords)
    if dim < 2 or sorted(coords) != list(range(dim)):
        raise ConfigError("coordinates must be x, y[, z, x4, ...] without gaps", field="curve")
    try:
        spec = FourierSpec(tuple(coords[i] for i in range(dim)), n)
    except ValueError as exc:
        raise ConfigError(str(exc), line=lines("curve"), field="curve") from None

    # planes
    if cp.has_section("planes"):
        planes = []
        for key, value in cp["planes"].items():
            try:
                plane = parse_plane(value)
            except ValueError as exc:
                raise ConfigError(str(exc), line=lines("planes", key), field=f"planes.{key}") from None
            if len(plane.normal) != dim:
                raise ConfigError(f"normal has {len(plane.normal)} components, curve lives in R^{dim}",
                                  line=lines("planes", key), field=f"planes.{key}")
            planes.append((key, plane))
        planes = tuple(planes)
    else:
        planes = (("y0", Hyperplane.coordinate(1, dim)),)

    def cap(text):
        low = text.strip().lower()
        if low == "auto":
            return "auto"
        return _optional(low, float)

    flow_kw = dict(
        spec=spec, n=n,
        sigma=get("flow", "sigma", float, 0.25),
        resample_every=get("flow", "resample_every", int, 25),
        record_every=get("flow", "record_every", int, 100),
        record_dl=get("flow", "record_dl", lambda v: _optional(v, float), 0.02),
        max_steps=get("flow", "max_steps", lambda v: _optional(v, int), None),
        length_floor=get("flow", "length_floor", lambda v: _optional(v, float), 0.05),
        curvature_cap=get("flow", "curvature_cap", cap, "auto"),
        symmetrize=get("flow", "symmetrize", parse_bool, False),
        planes=planes,
        monitor_huisken=get("monitors", "huisken", parse_bool, True),
        monitor_symmetric=get("monitors", "symmetric", parse_bool, True),
        monitor_projection=get("monitors", "projection", parse_bool, False),
        monitor_diagnostics=get("monitors", "diagnostics", parse_bool, True),
        symmetry_tol=get("monitors", "symmetry_tol", float, 1e-6),
    )
    try:
        flow = FlowConfig(**flow_kw)
    except ValueError as exc:
        name = _field_of(str(exc))
        sec = "flow" if name in FLOW_KEYS else "curve" if name == "n" else None
        raise ConfigError(str(exc), line=lines(sec, name) if sec else None,
                          field=f"{sec}.{name}" if sec else None) from None

    q_lo = get("analysis", "q_lo", float, 0.1)
    q_hi = get("analysis", "q_hi", float, 10.0)
    drift = get("analysis", "drift", float, 3.0)
    if not 0 < q_lo < q_hi:
        raise ConfigError("need 0 < q_lo < q_hi", line=lines("analysis", "q_lo"), field="analysis.q_lo")
    if not drift > 1:
        raise ConfigError("drift must exceed 1", line=lines("analysis", "drift"), field="analysis.drift")

    snapshot_every = get("output", "snapshot_every", int, 10)
    if snapshot_every < 0:
        raise ConfigError("must be non-negative", line=lines("output", "snapshot_every"),
                          field="output.snapshot_every")
    views = get("output", "views", lambda v: parse_views(v, dim), ("xy",) if dim == 2 else ("xy", "xz", "yz"))
    return ExperimentConfig(
        flow=flow,
        out_dir=get("output", "dir", str, "out").strip(),
        snapshot_every=snapshot_every,
        views=views,
        seed=get("output", "seed", int, 0),
        q_window=(q_lo, q_hi),
        drift=drift,
        source=source,
    )


def _field_of(message: str) -> str | None:
    for key in FLOW_KEYS + ("n",):
        if message.startswith(key):
            return key
    return None


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text, str(path))


def _fmt(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def echo_config(cfg: ExperimentConfig) -> str:
    """Fully expanded config text (defaults filled); re-parses to an equal config."""
    f = cfg.flow
    lines = ["[curve]", f"n = {f.n}"]
    for i, coord in enumerate(f.spec.terms):
        lines.append(f"{axis_name(i)} = {format_series(coord)}")
    lines += ["", "[flow]"]
    for key in FLOW_KEYS:
        lines.append(f"{key} = {_fmt(getattr(f, key))}")
    lines += ["", "[planes]"]
    for pid, plane in f.planes:
        lines.append(f"{pid} = normal {' '.join(_fmt(v) for v in plane.normal)} offset {_fmt(plane.offset)}")
    lines += ["", "[monitors]"]
    for key in MONITOR_KEYS:
        attr = key if key == "symmetry_tol" else f"monitor_{key}"
        lines.append(f"{key} = {_fmt(getattr(f, attr))}")
    lines += ["", "[analysis]", f"q_lo = {_fmt(cfg.q_window[0])}", f"q_hi = {_fmt(cfg.q_window[1])}",
              f"drift = {_fmt(cfg.drift)}"]
    lines += ["", "[output]", f"dir = {cfg.out_dir}", f"snapshot_every = {cfg.snapshot_every}",
              f"views = {' '.join(cfg.views)}", f"seed = {cfg.seed}"]
    return "\n".join(lines) + "\n"
