"""em-matcher/1 protocol server.

Wraps any callable mapping a list of record-pair JSON objects to a list of
floats in [0, 1]. Transports: newline-delimited JSON over stdio (default) or
HTTP (POST /predict, GET /meta). Malformed requests produce error responses
with the request id echoed; score-function exceptions never bring the server
down. Out-of-range scores are clamped with a logged warning.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, HTTPServer
from typing import Callable, Optional, Sequence

PROTOCOL_NAME = "em-matcher/1"

log = logging.getLogger("embridge")

ScoreFn = Callable[[Sequence[dict]], Sequence[float]]


@dataclass
class BridgeConfig:
    transport: str = "stdio"  # "stdio" | "http"
    threshold: float = 0.5
    max_batch: int = 512
    host: str = "127.0.0.1"
    port: int = 8040

    def __post_init__(self):
        if self.transport not in ("stdio", "http"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if not (0.0 < self.threshold < 1.0):
            raise ValueError("threshold must be in (0, 1)")
        if self.max_batch < 1:
            raise ValueError("max_batch must be positive")


def handshake(config: BridgeConfig) -> dict:
    return {"protocol": PROTOCOL_NAME, "threshold": config.threshold}


def _error(request_id, message: str) -> dict:
    return {"id": request_id, "error": message}


def _valid_pair(obj) -> bool:
    if not isinstance(obj, dict):
        return False
    for side in ("a", "b"):
        rec = obj.get(side)
        if not isinstance(rec, dict) or not isinstance(rec.get("attributes"), list):
            return False
        for attr in rec["attributes"]:
            if not isinstance(attr, dict) or "name" not in attr or "value" not in attr:
                return False
            if not isinstance(attr["value"], (str, int, float, type(None))) or isinstance(
                attr["value"], bool
            ):
                return False
    return True


def handle_request(obj, score_fn: ScoreFn, config: BridgeConfig) -> dict:
    """Score one request object; always returns a response, never raises."""
    request_id = obj.get("id") if isinstance(obj, dict) else None
    if not isinstance(obj, dict):
        return _error(request_id, "request must be a JSON object")
    pairs = obj.get("pairs")
    if not isinstance(pairs, list) or not pairs:
        return _error(request_id, "request must carry a non-empty 'pairs' list")
    if len(pairs) > config.max_batch:
        return _error(request_id, f"batch of {len(pairs)} exceeds max batch {config.max_batch}")
    if not all(_valid_pair(p) for p in pairs):
        return _error(request_id, "malformed record pair in 'pairs'")
    try:
        scores = list(score_fn(pairs))
    except Exception as e:  # score_fn failures must not kill the server
        return _error(request_id, f"score function failed: {e}")
    if len(scores) != len(pairs):
        return _error(request_id, "score function returned the wrong number of scores")
    out = []
    for s in scores:
        try:
            v = float(s)
        except (TypeError, ValueError):
            return _error(request_id, "score function returned a non-numeric score")
        if not (0.0 <= v <= 1.0) or v != v:
            clamped = min(max(0.0 if v != v else v, 0.0), 1.0)
            log.warning("clamped out-of-range score %r to %r", v, clamped)
            v = clamped
        out.append(v)
    return {"id": request_id, "scores": out}


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def serve_stdio(score_fn: ScoreFn, config: BridgeConfig, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stdout.write(_dumps(handshake(config)) + "\n")
    stdout.flush()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            resp = _error(None, f"invalid JSON: {e}")
        else:
            resp = handle_request(obj, score_fn, config)
        stdout.write(_dumps(resp) + "\n")
        stdout.flush()


class _Handler(BaseHTTPRequestHandler):
    score_fn: ScoreFn = None
    config: BridgeConfig = None

    def log_message(self, fmt, *args):
        log.debug(fmt, *args)

    def _send(self, code: int, payload: dict) -> None:
        body = _dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/meta":
            self._send(200, handshake(self.config))
        else:
            self._send(404, {"error": "unknown path"})

    def do_POST(self):
        if self.path != "/predict":
            self._send(404, {"error": "unknown path"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            obj = json.loads(self.rfile.read(length).decode("utf-8"))
        except Exception as e:
            self._send(200, _error(None, f"invalid JSON: {e}"))
            return
        self._send(200, handle_request(obj, self.score_fn, self.config))


def make_http_server(score_fn: ScoreFn, config: BridgeConfig) -> HTTPServer:
    handler = type("BoundHandler", (_Handler,), {"score_fn": staticmethod(score_fn), "config": config})
    return HTTPServer((config.host, config.port), handler)


def serve(score_fn: ScoreFn, config: Optional[BridgeConfig] = None) -> None:
    """Run the bridge until EOF (stdio) or interrupt (http)."""
    config = config or BridgeConfig()
    if config.transport == "stdio":
        serve_stdio(score_fn, config)
    else:
        server = make_http_server(score_fn, config)
        try:
            server.serve_forever()
        finally:
            server.server_close()
