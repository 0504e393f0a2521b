"""Scenario files, trajectory CSV serialization, and a standalone SVG plot.

Scenario files are flat UTF-8 JSON documents. Keys:

    c0, kappa, lambda, T, dt, sigma0, realized, horizon          (required)
    m0, impact_model, eps_deg, overflow_cap, gap_threshold,
    peak_prominence, bankruptcy_floor                            (optional)

realized is a number (constant path) or an array with one value per step.
Units follow the model convention: capital, vega, and lambda in millions;
marks in vol points; times in years. Parsing is strict: unknown keys are
rejected so experiment files stay reproducible.

Trajectory CSV: LF line endings, a "# scenario: {...}" comment carrying the
scenario JSON, a "# termination: ..." comment, a fixed header, then one row
per state with the outgoing step's profit breakdown (empty on the final row).
Numbers carry 12 significant digits, enough to round-trip the dynamics.
"""

from __future__ import annotations

import json
import math
from typing import Any, Optional

from .dynamics import (
    FundState,
    Guards,
    ImpactModel,
    ModelParams,
    RealizedPath,
    Scenario,
    StepBreakdown,
    Termination,
    Trajectory,
)
from .regimes import detect_gaps

__all__ = [
    "SchemaError",
    "parse_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "scenario_to_json",
    "serialize_trajectory_csv",
    "parse_trajectory_csv",
    "render_capital_svg",
]

CSV_HEADER = (
    "step,t,capital,avg_maturity,implied,vega,"
    "aged_vega,trade,realized_pnl,implied_pnl,total_pnl,denom_margin"
)

_REQUIRED_KEYS = ("c0", "kappa", "lambda", "T", "dt", "sigma0", "realized", "horizon")
_OPTIONAL_KEYS = (
    "m0",
    "impact_model",
    "eps_deg",
    "overflow_cap",
    "gap_threshold",
    "peak_prominence",
    "bankruptcy_floor",
)


class SchemaError(ValueError):
    """Structurally invalid document: unknown, missing, or mistyped field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _number(obj: dict, key: str) -> float:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(key, f"expected a number, got {type(value).__name__}")
    return float(value)


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario JSON document, applying defaults for omitted fields."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(obj)


def scenario_from_dict(obj: Any) -> Scenario:
    if not isinstance(obj, dict):
        raise SchemaError("$", f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in _REQUIRED_KEYS and key not in _OPTIONAL_KEYS:
            raise SchemaError(key, "unknown key")
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise SchemaError(key, "missing required key")

    realized_raw = obj["realized"]
    if isinstance(realized_raw, bool):
        raise SchemaError("realized", "expected a number or array of numbers")
    if isinstance(realized_raw, (int, float)):
        realized = RealizedPath.constant(float(realized_raw))
    elif isinstance(realized_raw, list):
        for i, v in enumerate(realized_raw):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"realized[{i}]", f"expected a number, got {type(v).__name__}")
        realized = RealizedPath.sequence([float(v) for v in realized_raw])
    else:
        raise SchemaError("realized", f"expected a number or array, got {type(realized_raw).__name__}")

    horizon = obj["horizon"]
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise SchemaError("horizon", f"expected an integer, got {type(horizon).__name__}")

    impact = obj.get("impact_model", "linear")
    if impact not in ("linear", "sqrt"):
        raise SchemaError("impact_model", f"expected 'linear' or 'sqrt', got {impact!r}")

    params = ModelParams(
        kappa=_number(obj, "kappa"),
        lam=_number(obj, "lambda"),
        maturity=_number(obj, "T"),
        dt=_number(obj, "dt"),
        impact_model=ImpactModel(impact),
    )
    guards = Guards(
        eps_deg=_number(obj, "eps_deg") if "eps_deg" in obj else Guards.eps_deg,
        overflow_cap=_number(obj, "overflow_cap") if "overflow_cap" in obj else Guards.overflow_cap,
        gap_threshold=_number(obj, "gap_threshold") if "gap_threshold" in obj else Guards.gap_threshold,
        peak_prominence=_number(obj, "peak_prominence") if "peak_prominence" in obj else Guards.peak_prominence,
        bankruptcy_floor=_number(obj, "bankruptcy_floor") if "bankruptcy_floor" in obj else None,
    )
    return Scenario(
        params=params,
        c0=_number(obj, "c0"),
        sigma0=_number(obj, "sigma0"),
        realized=realized,
        horizon=horizon,
        m0=_number(obj, "m0") if "m0" in obj else None,
        guards=guards,
    )


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical flat mapping of a scenario, every field explicit.

    parse_scenario(json.dumps(scenario_to_dict(s))) reproduces s.
    """
    realized: Any
    if scenario.realized.kind == "constant":
        realized = scenario.realized.value
    else:
        realized = list(scenario.realized.values)
    return {
        "c0": scenario.c0,
        "kappa": scenario.params.kappa,
        "lambda": scenario.params.lam,
        "T": scenario.params.maturity,
        "dt": scenario.params.dt,
        "sigma0": scenario.sigma0,
        "m0": scenario.m0,
        "impact_model": scenario.params.impact_model.value,
        "realized": realized,
        "horizon": scenario.horizon,
        "eps_deg": scenario.guards.eps_deg,
        "overflow_cap": scenario.guards.overflow_cap,
        "gap_threshold": scenario.guards.gap_threshold,
        "peak_prominence": scenario.guards.peak_prominence,
        "bankruptcy_floor": scenario.guards.bankruptcy_floor,
    }


def scenario_to_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))


def serialize_trajectory_csv(traj: Trajectory) -> str:
    """Render a trajectory as CSV text (see module docstring for the layout)."""
    lines = [
        f"# scenario: {scenario_to_json(traj.scenario)}",
        f"# termination: {traj.termination.value}",
        CSV_HEADER,
    ]
    for i, state in enumerate(traj.states):
        row = [
            str(i),
            _fmt(state.t),
            _fmt(state.capital),
            _fmt(state.avg_maturity),
            _fmt(state.implied),
            _fmt(state.vega),
        ]
        if i < len(traj.breakdowns):
            bd = traj.breakdowns[i]
            row += [
                _fmt(bd.aged_vega),
                _fmt(bd.trade),
                _fmt(bd.realized_pnl),
                _fmt(bd.implied_pnl),
                _fmt(bd.total_pnl),
                _fmt(bd.denom_margin),
            ]
        else:
            row += [""] * 6
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _parse_float(cell: str, line_no: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise SchemaError(column, f"line {line_no}: not a number: {cell!r}") from exc


def parse_trajectory_csv(text: str) -> Trajectory:
    """Rebuild a trajectory from serialize_trajectory_csv output.

    A file whose body carries no state rows yields the scenario's initial
    state alone (zero steps). Raises SchemaError with a line number for
    malformed or truncated rows.
    """
    scenario: Optional[Scenario] = None
    termination = Termination.HORIZON_REACHED
    header_seen = False
    states: list[FundState] = []
    rows: list[tuple[int, list[str]]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("scenario:"):
                scenario = parse_scenario(body[len("scenario:"):].strip())
            elif body.startswith("termination:"):
                value = body[len("termination:"):].strip()
                try:
                    termination = Termination(value)
                except ValueError as exc:
                    raise SchemaError("termination", f"line {line_no}: unknown value {value!r}") from exc
            continue
        if not header_seen:
            if line != CSV_HEADER:
                raise SchemaError("header", f"line {line_no}: expected {CSV_HEADER!r}")
            header_seen = True
            continue
        rows.append((line_no, line.split(",")))
    if scenario is None:
        raise SchemaError("scenario", "missing '# scenario:' comment line")
    if not header_seen:
        raise SchemaError("header", "missing column header line")

    breakdowns: list[StepBreakdown] = []
    for idx, (line_no, cells) in enumerate(rows):
        if len(cells) != 12:
            raise SchemaError("row", f"line {line_no}: expected 12 columns, got {len(cells)}")
        try:
            step_idx = int(cells[0])
        except ValueError as exc:
            raise SchemaError("step", f"line {line_no}: not an integer: {cells[0]!r}") from exc
        if step_idx != idx:
            raise SchemaError("step", f"line {line_no}: expected step {idx}, got {step_idx}")
        states.append(
            FundState(
                t=_parse_float(cells[1], line_no, "t"),
                capital=_parse_float(cells[2], line_no, "capital"),
                avg_maturity=_parse_float(cells[3], line_no, "avg_maturity"),
                implied=_parse_float(cells[4], line_no, "implied"),
                vega=_parse_float(cells[5], line_no, "vega"),
            )
        )
        is_last = idx == len(rows) - 1
        has_breakdown = any(cell != "" for cell in cells[6:])
        if is_last:
            if has_breakdown:
                raise SchemaError("row", f"line {line_no}: final row must have empty breakdown columns")
        else:
            if not has_breakdown:
                raise SchemaError("row", f"line {line_no}: missing breakdown columns")
            aged = _parse_float(cells[6], line_no, "aged_vega")
            trade = _parse_float(cells[7], line_no, "trade")
            breakdowns.append(
                StepBreakdown(
                    realized_pnl=_parse_float(cells[8], line_no, "realized_pnl"),
                    implied_pnl=_parse_float(cells[9], line_no, "implied_pnl"),
                    total_pnl=_parse_float(cells[10], line_no, "total_pnl"),
                    aged_vega=aged,
                    new_vega=aged + trade,
                    trade=trade,
                    denom_margin=_parse_float(cells[11], line_no, "denom_margin"),
                )
            )
    if not states:
        states = [scenario.initial_state()]
    negative = next((i for i, s in enumerate(states) if s.implied < 0), None)
    return Trajectory(
        scenario=scenario,
        states=tuple(states),
        breakdowns=tuple(breakdowns),
        termination=termination,
        negative_implied_step=negative,
    )


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            stepw = mult * mag
            break
    start = math.floor(lo / stepw) * stepw
    ticks = []
    v = start
    while v < hi + 0.5 * stepw:
        ticks.append(v)
        v += stepw
    return ticks


def render_capital_svg(traj: Trajectory, width: int = 800, height: int = 400) -> str:
    """Standalone SVG plot of capital versus step with axes, tick labels, and
    vertical markers on gap steps. Byte-identical output for identical input."""
    caps = traj.capital_series()
    n = len(caps)
    margin_l, margin_r, margin_t, margin_b = 70, 20, 20, 45
    pw = width - margin_l - margin_r
    ph = height - margin_t - margin_b

    y_ticks = _nice_ticks(min(min(caps), 0.0), max(caps))
    y_lo, y_hi = y_ticks[0], y_ticks[-1]
    x_ticks = [t for t in _nice_ticks(0, max(n - 1, 1)) if t <= n - 1 or n == 1]

    def sx(i: float) -> float:
        return margin_l + (i / max(n - 1, 1)) * pw

    def sy(c: float) -> float:
        return margin_t + (1.0 - (c - y_lo) / (y_hi - y_lo)) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for t in y_ticks:
        y = sy(t)
        parts.append(
            f'<line x1="{margin_l}" y1="{y:.2f}" x2="{width - margin_r}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{margin_l - 6}" y="{y + 4:.2f}" font-size="11" font-family="sans-serif" '
            f'text-anchor="end" fill="#333333">{t:g}</text>'
        )
    for t in x_ticks:
        x = sx(t)
        parts.append(
            f'<line x1="{x:.2f}" y1="{margin_t}" x2="{x:.2f}" y2="{height - margin_b}" '
            'stroke="#eeeeee" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{height - margin_b + 16}" font-size="11" font-family="sans-serif" '
            f'text-anchor="middle" fill="#333333">{t:g}</text>'
        )
    for gap in detect_gaps(traj):
        x = sx(gap.step)
        parts.append(
            f'<line x1="{x:.2f}" y1="{margin_t}" x2="{x:.2f}" y2="{height - margin_b}" '
            'stroke="#cc3333" stroke-width="1" stroke-dasharray="4,3"/>'
        )
    parts.append(
        f'<line x1="{margin_l}" y1="{height - margin_b}" x2="{width - margin_r}" y2="{height - margin_b}" '
        'stroke="#333333" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{height - margin_b}" '
        'stroke="#333333" stroke-width="1"/>'
    )
    points = " ".join(f"{sx(i):.2f},{sy(c):.2f}" for i, c in enumerate(caps))
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f5fbf" stroke-width="1.5"/>')
    parts.append(
        f'<text x="{margin_l + pw / 2:.2f}" y="{height - 8}" font-size="12" font-family="sans-serif" '
        'text-anchor="middle" fill="#333333">step</text>'
    )
    parts.append(
        f'<text x="16" y="{margin_t + ph / 2:.2f}" font-size="12" font-family="sans-serif" '
        f'text-anchor="middle" fill="#333333" transform="rotate(-90 16 {margin_t + ph / 2:.2f})">'
        "capital (millions)</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
