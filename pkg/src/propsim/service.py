"""Stateless HTTP JSON API over the simulation library.

Endpoints (HTTP/1.1, JSON bodies):

    POST /api/simulate   scenario fields (+ optional "downsample")
    POST /api/sweep      scenario fields + "axes" (1 or 2)
    POST /api/lyapunov   scenario fields (+ optional "epsilon")
    GET  /api/critical   ?kappa=&lambda=[&maturity=&dt=]
    GET  /healthz
    GET  /...            static UI assets when a ui_dir is configured

Every successful response echoes the effective scenario with defaults
resolved; errors carry {"error": {"code", "path", "message"}}. Handlers call
straight into the library and do no model arithmetic of their own, so
identical requests always produce identical bodies.
"""

from __future__ import annotations

import json
import queue
import sys
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path
from typing import Any, Optional
from urllib.parse import parse_qs, urlsplit

from .dynamics import (
    DegenerateDenominatorError,
    FundState,
    ModelParams,
    NoRootFoundError,
    RangeError,
    StepBreakdown,
    Termination,
    critical_capital,
    simulate,
    UndefinedCriticalError,
)
from .regimes import (
    InvalidAxisError,
    ParameterAxis,
    classify,
    lyapunov_estimate,
    report_to_dict,
    sweep,
)
from .scenario_io import SchemaError, scenario_from_dict, scenario_to_dict

__all__ = ["create_server", "DOWNSAMPLE_DEFAULT", "CELL_BUDGET"]

DOWNSAMPLE_DEFAULT = 2000
CELL_BUDGET = 40_000
MAX_BODY_BYTES = 16 * 1024 * 1024

# Simulation endpoints are GIL-bound, so running a few at a time costs no
# throughput while keeping /healthz and static assets responsive under a
# burst of compute requests.
_COMPUTE_SLOTS = 2
_compute_gate = threading.BoundedSemaphore(_COMPUTE_SLOTS)

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".svg": "image/svg+xml",
    ".json": "application/json",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".map": "application/json",
}

_FALLBACK_INDEX = """<!doctype html>
<html><head><meta charset="utf-8"><title>propsim service</title></head>
<body><h1>propsim explorer service</h1>
<p>No UI bundle is configured (start with --ui-dir or set PROPSIM_UI_DIR).</p>
<p>API: POST /api/simulate, POST /api/sweep, POST /api/lyapunov,
GET /api/critical, GET /healthz</p></body></html>
"""


class _ApiError(Exception):
    def __init__(self, status: int, code: str, path: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.path = path
        self.message = message


def _state_row(i: int, s: FundState) -> dict:
    return {
        "step": i,
        "t": s.t,
        "capital": s.capital,
        "avg_maturity": s.avg_maturity,
        "implied": s.implied,
        "vega": s.vega,
    }


def _breakdown_row(i: int, b: StepBreakdown) -> dict:
    return {
        "step": i,
        "aged_vega": b.aged_vega,
        "new_vega": b.new_vega,
        "trade": b.trade,
        "realized_pnl": b.realized_pnl,
        "implied_pnl": b.implied_pnl,
        "total_pnl": b.total_pnl,
        "denom_margin": b.denom_margin,
    }


def downsample_indices(n_states: int, limit: int, events: set[int]) -> list[int]:
    """Uniform-stride state indices capped near the limit; event indices and
    both endpoints are always kept."""
    keep = {i for i in events if 0 <= i < n_states}
    keep.add(0)
    keep.add(n_states - 1)
    if n_states <= limit:
        return list(range(n_states))
    budget = max(2, limit - len(keep))
    stride = max(1, -(-n_states // budget))
    keep.update(range(0, n_states, stride))
    return sorted(keep)


def _simulate_payload(body: dict) -> dict:
    downsample = body.pop("downsample", DOWNSAMPLE_DEFAULT)
    if not isinstance(downsample, int) or isinstance(downsample, bool) or downsample < 2:
        raise _ApiError(400, "SchemaError", "downsample", "expected an integer >= 2")
    scenario = scenario_from_dict(body)
    traj = simulate(scenario)
    if traj.termination is Termination.DEGENERATE_DENOMINATOR and not traj.breakdowns:
        raise _ApiError(
            422,
            "DegenerateDenominator",
            "c0",
            "the initial state sits on the critical capital; the first step is undefined",
        )
    report = classify(traj)
    events = {p.step for p in report.peaks}
    for g in report.gaps:
        events.add(g.step)
        events.add(g.step + 1)
    if report.bankruptcy_step is not None:
        events.add(report.bankruptcy_step)
    idx = downsample_indices(len(traj.states), downsample, events)
    return {
        "scenario": scenario_to_dict(scenario),
        "termination": traj.termination.value,
        "steps": traj.steps,
        "report": report_to_dict(report),
        "states": [_state_row(i, traj.states[i]) for i in idx],
        "breakdowns": [
            _breakdown_row(i, traj.breakdowns[i]) for i in idx if i < len(traj.breakdowns)
        ],
    }


def _parse_axis_obj(i: int, obj: Any) -> ParameterAxis:
    if not isinstance(obj, dict) or "name" not in obj:
        raise _ApiError(400, "InvalidAxis", f"axes[{i}]", "expected {name, values} or {name, lo, hi, count}")
    try:
        if "values" in obj:
            return ParameterAxis(str(obj["name"]), tuple(float(v) for v in obj["values"]))
        return ParameterAxis.linspace(
            str(obj["name"]), float(obj["lo"]), float(obj["hi"]), int(obj["count"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise _ApiError(400, "InvalidAxis", f"axes[{i}]", str(exc)) from exc
    except InvalidAxisError as exc:
        raise _ApiError(400, "InvalidAxis", f"axes[{i}].name", str(exc)) from exc


def _sweep_payload(body: dict) -> dict:
    axes_raw = body.pop("axes", None)
    if not isinstance(axes_raw, list) or not 1 <= len(axes_raw) <= 2:
        raise _ApiError(400, "InvalidAxis", "axes", "expected a list of 1 or 2 axis objects")
    axes = [_parse_axis_obj(i, a) for i, a in enumerate(axes_raw)]
    total = 1
    for a in axes:
        total *= len(a.values)
    if total > CELL_BUDGET:
        raise _ApiError(413, "CellBudgetExceeded", "axes", f"{total} cells exceed the budget of {CELL_BUDGET}")
    scenario = scenario_from_dict(body)
    regime_map = sweep(scenario, axes)
    return {
        "scenario": scenario_to_dict(scenario),
        "axes": [{"name": a.name, "values": list(a.values)} for a in regime_map.axes],
        "cells": [
            {
                "values": list(c.values),
                "regime": c.regime.value,
                "termination": c.termination.value,
                "final_capital": c.final_capital,
                "peak_value": c.peak_value,
                "gap_count": c.gap_count,
                "bankruptcy_step": c.bankruptcy_step,
            }
            for c in regime_map.cells
        ],
    }


def _lyapunov_payload(body: dict) -> dict:
    epsilon = body.pop("epsilon", 1e-8)
    if isinstance(epsilon, bool) or not isinstance(epsilon, (int, float)):
        raise _ApiError(400, "SchemaError", "epsilon", "expected a number")
    scenario = scenario_from_dict(body)
    estimate = lyapunov_estimate(scenario, float(epsilon))
    return {
        "scenario": scenario_to_dict(scenario),
        "epsilon": float(epsilon),
        "exponent": estimate.exponent,
        "steps": estimate.steps,
    }


def _critical_payload(query: dict) -> dict:
    def one(name: str, required: bool = True, default: Optional[float] = None) -> Optional[float]:
        if name not in query:
            if required:
                raise _ApiError(400, "SchemaError", name, "missing query parameter")
            return default
        try:
            return float(query[name][0])
        except ValueError as exc:
            raise _ApiError(400, "SchemaError", name, f"not a number: {query[name][0]!r}") from exc

    kappa = one("kappa")
    lam = one("lambda")
    maturity = one("maturity", required=False)
    dt = one("dt", required=False, default=0.01)
    if lam == 0:
        raise _ApiError(400, "UndefinedCritical", "lambda", "lambda = 0 has no critical capital")
    carrier_t = maturity if maturity is not None and maturity > dt else dt + 1.0
    params = ModelParams(kappa=kappa, lam=lam, maturity=carrier_t, dt=dt)
    cc = critical_capital(params, maturity)
    out = {"kappa": kappa, "lambda": lam, "dt": dt, "approx": cc.approx, "exact": cc.exact}
    if maturity is not None:
        out["maturity"] = maturity
    return out


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    timeout = 30  # parks at most one pool worker per idle keep-alive socket
    ui_dir: Optional[Path] = None

    # -- plumbing ---------------------------------------------------------
    def log_message(self, fmt: str, *args: Any) -> None:
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        # Key order is fixed by construction, so responses stay byte-stable
        # without sort_keys (which would double the big serialization holds).
        data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, status: int, code: str, path: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "path": path, "message": message}})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", "0") or "0")
        if length > MAX_BODY_BYTES:
            raise _ApiError(413, "BodyTooLarge", "$", f"body exceeds {MAX_BODY_BYTES} bytes")
        raw = self.rfile.read(length) if length else b""
        try:
            obj = json.loads(raw.decode("utf-8") or "null")
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise _ApiError(400, "SchemaError", "$", f"not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise _ApiError(400, "SchemaError", "$", "expected a JSON object body")
        return obj

    def _dispatch(self, fn, *args) -> None:
        try:
            payload = fn(*args)
        except _ApiError as exc:
            self._send_error_json(exc.status, exc.code, exc.path, exc.message)
        except SchemaError as exc:
            self._send_error_json(400, "SchemaError", exc.path, str(exc))
        except RangeError as exc:
            self._send_error_json(400, "RangeError", exc.field_name, str(exc))
        except InvalidAxisError as exc:
            self._send_error_json(400, "InvalidAxis", "axes", str(exc))
        except UndefinedCriticalError as exc:
            self._send_error_json(400, "UndefinedCritical", "lambda", str(exc))
        except DegenerateDenominatorError as exc:
            self._send_error_json(422, "DegenerateDenominator", "c0", str(exc))
        except NoRootFoundError as exc:
            self._send_error_json(422, "NoRootFound", "c0", str(exc))
        else:
            self._send_json(200, payload)

    # -- verbs ------------------------------------------------------------
    def do_POST(self) -> None:  # noqa: N802 (http.server naming)
        path = urlsplit(self.path).path
        try:
            body = self._read_body()
        except _ApiError as exc:
            self._send_error_json(exc.status, exc.code, exc.path, exc.message)
            return
        if path == "/api/simulate":
            with _compute_gate:
                self._dispatch(_simulate_payload, body)
        elif path == "/api/sweep":
            with _compute_gate:
                self._dispatch(_sweep_payload, body)
        elif path == "/api/lyapunov":
            with _compute_gate:
                self._dispatch(_lyapunov_payload, body)
        else:
            self._send_error_json(404, "NotFound", path, "unknown endpoint")

    def do_GET(self) -> None:  # noqa: N802
        parts = urlsplit(self.path)
        path = parts.path
        if path == "/healthz":
            self._send_json(200, {"status": "ok"})
        elif path == "/api/critical":
            self._dispatch(_critical_payload, parse_qs(parts.query))
        elif path.startswith("/api/"):
            self._send_error_json(404, "NotFound", path, "unknown endpoint")
        else:
            self._serve_static(path)

    # -- static assets ----------------------------------------------------
    def _serve_static(self, path: str) -> None:
        if path in ("", "/"):
            path = "/index.html"
        if self.ui_dir is None:
            if path == "/index.html":
                data = _FALLBACK_INDEX.encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "text/html; charset=utf-8")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)
            else:
                self._send_error_json(404, "NotFound", path, "no UI bundle configured")
            return
        base = self.ui_dir.resolve()
        target = (base / path.lstrip("/")).resolve()
        if base not in target.parents and target != base:
            self._send_error_json(404, "NotFound", path, "outside the UI bundle")
            return
        if not target.is_file():
            self._send_error_json(404, "NotFound", path, "no such asset")
            return
        ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        data = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


class _Server(HTTPServer):
    """HTTP server with a pre-spawned worker pool.

    Spawning a thread per connection (ThreadingMixIn) makes the accept loop
    block in Thread.start() while compute threads hold the GIL, so a burst of
    simulation requests would delay /healthz by the whole drain time. Here
    the accept loop only enqueues the socket; parked workers pick it up.
    """

    # A shallow listen backlog (socketserver defaults to 5) would push burst
    # connections into kernel SYN retransmit backoff, stalling /healthz for
    # seconds under concurrent load.
    request_queue_size = 128
    pool_size = 40

    def __init__(self, server_address, handler_class):
        super().__init__(server_address, handler_class)
        self._jobs: queue.Queue = queue.Queue()
        self._workers = [
            threading.Thread(target=self._work, name=f"propsim-http-{i}", daemon=True)
            for i in range(self.pool_size)
        ]
        for w in self._workers:
            w.start()

    def process_request(self, request, client_address) -> None:
        self._jobs.put((request, client_address))

    def _work(self) -> None:
        while True:
            job = self._jobs.get()
            if job is None:
                return
            request, client_address = job
            try:
                self.finish_request(request, client_address)
            except Exception:
                self.handle_error(request, client_address)
            finally:
                self.shutdown_request(request)

    def server_close(self) -> None:
        super().server_close()
        for _ in self._workers:
            self._jobs.put(None)
        for w in self._workers:
            w.join(timeout=1)


def create_server(port: int = 8080, ui_dir: Optional[str] = None, host: str = "127.0.0.1") -> HTTPServer:
    """Build a worker-pool HTTP server bound to host:port (port 0 picks a
    free one). The caller owns serve_forever()/server_close()."""
    # Short GIL slices keep /healthz responsive while CPU-bound simulation
    # requests run on sibling threads.
    sys.setswitchinterval(0.00005)
    handler = type(
        "BoundHandler",
        (_Handler,),
        {"ui_dir": Path(ui_dir) if ui_dir else None},
    )
    return _Server((host, port), handler)
