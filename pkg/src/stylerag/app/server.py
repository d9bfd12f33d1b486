"""HTTP retrieval service.

Endpoints::

    GET  /health       -> {"status": "ok", "record_count": N}
    POST /v1/retrieve  -> style prompt bundle

``/v1/retrieve`` body fields: ``script_id`` and ``position`` (required),
``text`` (defaults to the script line at ``position``), ``k``, ``mode``,
``pref`` (a user-preference object), ``script`` (inline
``{"utterances": [{"speaker_id", "text"}, ...]}`` for scripts the server
does not know) and ``explicit_clip_id``.
"""

from __future__ import annotations

import json
import logging
import os
import signal
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any

from ..core import Script, StyleQuery, UserPreference
from ..errors import EndpointUnavailable, StyleRagError
from .config import AppConfig
from .database import StyleDatabase

log = logging.getLogger(__name__)


class BadRequest(Exception):
    def __init__(self, code: str, message: str) -> None:
        super().__init__(message)
        self.code = code


class ServiceState:
    """Holds the open database; ``reload`` swaps it in one assignment."""

    def __init__(self, config: AppConfig, db_path: str) -> None:
        self.config = config
        self.db_path = db_path
        self.scripts: dict[str, Script] = {}
        if config.scripts_dir:
            for name in sorted(os.listdir(config.scripts_dir)):
                if name.endswith(".json"):
                    s = Script.load(os.path.join(config.scripts_dir, name))
                    self.scripts[s.script_id] = s
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        db = StyleDatabase.open(self.db_path)
        retriever = db.retriever(self.config)
        retriever.scripts = self.scripts
        with self._lock:
            self.db, self.retriever = db, retriever

    def reload(self) -> None:
        self._load()
        log.info("index reloaded", extra={"record_count": self.db.index.count})

    def snapshot(self) -> tuple[StyleDatabase, Any]:
        with self._lock:
            return self.db, self.retriever

    def handle_retrieve(self, body: Any) -> dict[str, Any]:
        if not isinstance(body, dict):
            raise BadRequest("MalformedBody", "request body must be a JSON object")
        db, retriever = self.snapshot()
        try:
            script_id = str(body["script_id"])
            position = int(body["position"])
        except (KeyError, TypeError, ValueError):
            raise BadRequest("MalformedBody", "script_id and integer position are required") from None
        script = None
        if "script" in body:
            try:
                script = Script.from_dict({"script_id": script_id, **body["script"]})
            except (KeyError, TypeError, ValueError) as exc:
                raise BadRequest("MalformedBody", f"bad inline script: {exc}") from None
        else:
            script = retriever.scripts.get(script_id)
        if script is None:
            raise BadRequest("UnknownScript", f"script {script_id!r} is not registered; send it inline")
        if not 0 <= position < len(script):
            raise BadRequest("PositionOutOfRange", f"position {position} outside script of length {len(script)}")
        text = body.get("text") or script.utterances[position].text
        try:
            pref = UserPreference.from_dict(body.get("pref")) if body.get("pref") else None
            explicit = None
            if body.get("explicit_clip_id"):
                explicit = db.store[str(body["explicit_clip_id"])].clip
            query = StyleQuery(text, script_id, position, pref, explicit, int(body.get("k") or self.config.k))
            rconf = db.retrieval_config(self.config, k=query.k, embedding_mode=body.get("mode"))
        except StyleRagError as exc:
            raise BadRequest(exc.code, str(exc)) from None
        except (TypeError, ValueError) as exc:
            raise BadRequest("MalformedBody", str(exc)) from None
        return retriever.retrieve(query, rconf, script).to_dict()


def make_handler(state: ServiceState) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt: str, *args: Any) -> None:
            log.debug(fmt % args)

        def _send(self, status: int, payload: dict[str, Any]) -> None:
            out = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out)

        def _error(self, status: int, code: str, message: str) -> None:
            self._send(status, {"error": {"code": code, "message": message}})

        def do_GET(self) -> None:
            if self.path == "/health":
                db, _ = state.snapshot()
                self._send(200, {"status": "ok", "record_count": db.index.count})
            else:
                self._error(404, "NotFound", self.path)

        def do_POST(self) -> None:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if self.path != "/v1/retrieve":
                self._error(404, "NotFound", self.path)
                return
            try:
                body = json.loads(raw or b"null")
                self._send(200, state.handle_retrieve(body))
            except json.JSONDecodeError as exc:
                self._error(400, "MalformedBody", f"invalid JSON: {exc}")
            except BadRequest as exc:
                self._error(400, exc.code, str(exc))
            except EndpointUnavailable as exc:
                self._error(503, exc.code, str(exc))
            except StyleRagError as exc:
                self._error(422, exc.code, str(exc))
            except Exception as exc:  # noqa: BLE001
                log.exception("retrieve failed")
                self._error(500, "InternalError", str(exc))

    return Handler


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(state))
    # keep worker threads joinable so in-flight requests finish on close
    server.daemon_threads = False
    server.block_on_close = True
    return server


def serve(config: AppConfig, db_path: str) -> int:
    """Run until SIGINT/SIGTERM; SIGHUP reloads the index."""
    state = ServiceState(config, db_path)
    host, _, port = config.listen.rpartition(":")
    server = make_server(state, host or "127.0.0.1", int(port))
    log.info("serving", extra={"address": f"{server.server_address[0]}:{server.server_address[1]}",
                               "record_count": state.db.index.count})

    def stop(signum: int, frame: Any) -> None:
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, stop)
    signal.signal(signal.SIGINT, stop)
    if hasattr(signal, "SIGHUP"):
        signal.signal(signal.SIGHUP, lambda s, f: state.reload())
    try:
        server.serve_forever()
    finally:
        server.server_close()
    log.info("stopped")
    return 0
