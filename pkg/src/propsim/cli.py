"""propsim command line: simulate, classify, sweep, critical, serve.

Scenario flags mirror the scenario file schema (--maturity maps to T,
--steps to horizon), so a run is expressible entirely inline. When both a
--scenario file and flags are given, flag values override file values.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

from .dynamics import (
    ModelParams,
    RangeError,
    Scenario,
    UndefinedCriticalError,
    critical_capital,
    simulate,
)
from .regimes import (
    InvalidAxisError,
    ParameterAxis,
    classify,
    report_to_dict,
    sweep,
)
from .scenario_io import (
    SchemaError,
    parse_trajectory_csv,
    render_capital_svg,
    scenario_from_dict,
    scenario_to_dict,
    serialize_trajectory_csv,
)

__all__ = ["Command", "parse_args", "execute", "main"]

DEFAULT_STEPS = 1000

_FLAG_TO_KEY = {
    "c0": "c0",
    "kappa": "kappa",
    "lam": "lambda",
    "maturity": "T",
    "dt": "dt",
    "sigma0": "sigma0",
    "m0": "m0",
    "steps": "horizon",
    "impact_model": "impact_model",
    "eps_deg": "eps_deg",
    "overflow_cap": "overflow_cap",
    "gap_threshold": "gap_threshold",
    "peak_prominence": "peak_prominence",
    "bankruptcy_floor": "bankruptcy_floor",
}


@dataclass
class Command:
    """A parsed invocation: one verb plus its validated options."""

    verb: str
    scenario: Optional[Scenario] = None
    scenario_file: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    out: Optional[str] = None
    plot: Optional[str] = None
    traj_path: Optional[str] = None
    gap_threshold: Optional[float] = None
    peak_prominence: Optional[float] = None
    axes: tuple = ()
    kappa: Optional[float] = None
    lam: Optional[float] = None
    maturity: Optional[float] = None
    dt: Optional[float] = None
    port: int = 8080
    ui_dir: Optional[str] = None


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", metavar="FILE", help="scenario JSON file")
    p.add_argument("--c0", type=float, help="initial capital (millions)")
    p.add_argument("--kappa", type=float, help="target exposure fraction")
    p.add_argument("--lambda", dest="lam", type=float, help="market impact per million traded")
    p.add_argument("--maturity", type=float, help="standard maturity T (years)")
    p.add_argument("--dt", type=float, help="step length (years)")
    p.add_argument("--sigma0", type=float, help="initial implied mark (vol points)")
    p.add_argument("--m0", type=float, help="initial average maturity (years, default T)")
    p.add_argument(
        "--realized",
        help="realized mark: a number, or comma-separated per-step values",
    )
    p.add_argument("--steps", type=int, help=f"horizon in steps (default {DEFAULT_STEPS})")
    p.add_argument("--impact-model", choices=["linear", "sqrt"], dest="impact_model")
    p.add_argument("--eps-deg", type=float, dest="eps_deg")
    p.add_argument("--overflow-cap", type=float, dest="overflow_cap")
    p.add_argument("--gap-threshold", type=float, dest="gap_threshold")
    p.add_argument("--peak-prominence", type=float, dest="peak_prominence")
    p.add_argument("--bankruptcy-floor", type=float, dest="bankruptcy_floor")


def _parse_realized(raw: str) -> Any:
    if "," in raw:
        return [float(v) for v in raw.split(",") if v.strip() != ""]
    return float(raw)


def _collect_overrides(ns: argparse.Namespace) -> dict:
    overrides: dict = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(ns, flag, None)
        if value is not None:
            overrides[key] = value
    if getattr(ns, "realized", None) is not None:
        overrides["realized"] = _parse_realized(ns.realized)
    return overrides


def _parse_axis(spec: str) -> ParameterAxis:
    if "=" in spec:
        name, _, rest = spec.partition("=")
        return ParameterAxis(name.strip(), tuple(float(v) for v in rest.split(",")))
    parts = spec.split(":")
    if len(parts) != 4:
        raise InvalidAxisError(
            f"bad axis spec {spec!r}; use name=v1,v2,... or name:lo:hi:count"
        )
    name, lo, hi, count = parts
    return ParameterAxis.linspace(name.strip(), float(lo), float(hi), int(count))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="propsim",
        description="Deterministic propping-up dynamics: simulate, classify, sweep, critical, serve.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its trajectory")
    _add_scenario_flags(p)
    p.add_argument("--out", metavar="CSV", help="trajectory CSV output path")
    p.add_argument("--plot", metavar="SVG", help="capital plot output path")

    p = sub.add_parser("classify", help="classify a trajectory CSV, print a JSON report")
    p.add_argument("traj", metavar="TRAJ_CSV", help="trajectory CSV file")
    p.add_argument("--gap-threshold", type=float, dest="gap_threshold")
    p.add_argument("--peak-prominence", type=float, dest="peak_prominence")

    p = sub.add_parser("sweep", help="classify a scenario over a parameter grid")
    _add_scenario_flags(p)
    p.add_argument(
        "--axis",
        action="append",
        required=True,
        metavar="SPEC",
        help="axis as name=v1,v2,... or name:lo:hi:count (repeat for a second axis)",
    )
    p.add_argument("--out", metavar="CSV", required=True, help="regime map CSV output path")

    p = sub.add_parser("critical", help="print the critical capital levels")
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--maturity", type=float, help="average maturity for the exact level")
    p.add_argument("--dt", type=float, default=0.01)

    p = sub.add_parser("serve", help="run the explorer HTTP service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui-dir", dest="ui_dir", help="directory of built UI assets to serve at /")

    return parser


def parse_args(argv: Optional[list[str]] = None) -> Command:
    """Parse argv into a validated Command. Usage problems exit with code 2."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    cmd = Command(verb=ns.verb)
    if ns.verb in ("simulate", "sweep"):
        cmd.scenario_file = ns.scenario
        cmd.overrides = _collect_overrides(ns)
        cmd.out = getattr(ns, "out", None)
        cmd.plot = getattr(ns, "plot", None)
        if ns.verb == "sweep":
            try:
                cmd.axes = tuple(_parse_axis(spec) for spec in ns.axis)
            except (InvalidAxisError, ValueError) as exc:
                parser.error(str(exc))
        if cmd.scenario_file is None:
            try:
                cmd.scenario = _scenario_from_overrides(cmd.overrides)
            except (SchemaError, RangeError) as exc:
                parser.error(str(exc))
    elif ns.verb == "classify":
        cmd.traj_path = ns.traj
        cmd.gap_threshold = ns.gap_threshold
        cmd.peak_prominence = ns.peak_prominence
    elif ns.verb == "critical":
        cmd.kappa = ns.kappa
        cmd.lam = ns.lam
        cmd.maturity = ns.maturity
        cmd.dt = ns.dt
        if ns.lam <= 0:
            parser.error("--lambda must be > 0 for a critical level to exist")
        if ns.kappa <= 0:
            parser.error("--kappa must be > 0")
    elif ns.verb == "serve":
        cmd.port = ns.port
        cmd.ui_dir = ns.ui_dir or os.environ.get("PROPSIM_UI_DIR")
    return cmd


def _scenario_from_overrides(overrides: dict) -> Scenario:
    doc = dict(overrides)
    doc.setdefault("horizon", DEFAULT_STEPS)
    missing = [k for k in ("c0", "kappa", "lambda", "T", "dt", "sigma0", "realized") if k not in doc]
    if missing:
        raise SchemaError(missing[0], "required when no --scenario file is given")
    return scenario_from_dict(doc)


def _load_scenario(cmd: Command) -> Scenario:
    if cmd.scenario_file is None:
        if cmd.scenario is not None:
            return cmd.scenario
        return _scenario_from_overrides(cmd.overrides)
    with open(cmd.scenario_file, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise SchemaError("$", "scenario file must hold a JSON object")
    doc.update(cmd.overrides)
    return scenario_from_dict(doc)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _run_simulate(cmd: Command) -> int:
    scenario = _load_scenario(cmd)
    traj = simulate(scenario)
    report = classify(traj)
    if cmd.out:
        with open(cmd.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(serialize_trajectory_csv(traj))
    if cmd.plot:
        with open(cmd.plot, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_capital_svg(traj))
    peak = max((p.value for p in report.peaks), default=None)
    summary = (
        f"termination={traj.termination.value} regime={report.regime.value} "
        f"steps={traj.steps} final_capital={_fmt(report.final_capital)}"
    )
    if peak is not None:
        summary += f" peak={_fmt(peak)}"
    if report.gaps:
        summary += f" gaps={len(report.gaps)}"
    print(summary)
    return 0


def _run_classify(cmd: Command) -> int:
    with open(cmd.traj_path, "r", encoding="utf-8") as fh:
        traj = parse_trajectory_csv(fh.read())
    report = classify(traj, cmd.gap_threshold, cmd.peak_prominence)
    print(json.dumps(report_to_dict(report), sort_keys=True))
    return 0


def _run_sweep(cmd: Command) -> int:
    scenario = _load_scenario(cmd)
    regime_map = sweep(scenario, cmd.axes)
    names = [axis.name for axis in regime_map.axes]
    lines = [",".join(names + ["regime", "termination", "final_capital", "peak_value", "gap_count", "bankruptcy_step"])]
    for cell in regime_map.cells:
        row = [_fmt(v) for v in cell.values]
        row += [
            cell.regime.value,
            cell.termination.value,
            _fmt(cell.final_capital),
            _fmt(cell.peak_value) if cell.peak_value is not None else "",
            str(cell.gap_count),
            str(cell.bankruptcy_step) if cell.bankruptcy_step is not None else "",
        ]
        lines.append(",".join(row))
    with open(cmd.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {len(regime_map.cells)} cells to {cmd.out}")
    return 0


def _run_critical(cmd: Command) -> int:
    # ModelParams is only a parameter carrier here; when no maturity is given
    # a dummy T > dt satisfies its invariants without affecting the result.
    carrier_t = cmd.maturity if cmd.maturity is not None and cmd.maturity > cmd.dt else cmd.dt + 1.0
    params = ModelParams(kappa=cmd.kappa, lam=cmd.lam, maturity=carrier_t, dt=cmd.dt)
    cc = critical_capital(params, cmd.maturity)
    print(f"approx {_fmt(cc.approx)}")
    if cc.exact is not None:
        print(f"exact {_fmt(cc.exact)}")
    return 0


def _run_serve(cmd: Command) -> int:
    from .service import create_server

    server = create_server(cmd.port, cmd.ui_dir)
    host, port = server.server_address[:2]
    print(f"propsim explorer service on http://{host}:{port}/ (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def execute(cmd: Command) -> int:
    """Run a parsed Command; returns the process exit code."""
    runners = {
        "simulate": _run_simulate,
        "classify": _run_classify,
        "sweep": _run_sweep,
        "critical": _run_critical,
        "serve": _run_serve,
    }
    try:
        return runners[cmd.verb](cmd)
    except (SchemaError, RangeError, InvalidAxisError, UndefinedCriticalError, OSError, ValueError) as exc:
        print(f"propsim: error: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[list[str]] = None) -> None:
    sys.exit(execute(parse_args(argv)))


if __name__ == "__main__":
    main()
