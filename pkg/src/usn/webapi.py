"""JSON-over-HTTP plumbing shared by the three services.

Each service describes its API as a :class:`JsonApp`, a small method+path
router. The same app object backs both transports:

* in-process: :class:`LocalTransport` calls ``app.dispatch`` directly;
* loopback TCP: :func:`start_server` binds a threading HTTP server.

One dispatch path means in-process tests and scenario runs exercise exactly
the JSON surface remote clients see.
"""

from __future__ import annotations

import json
import logging
import re
import socket
import threading
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import TransportError, UsnError, status_for

log = logging.getLogger("usn.webapi")

# Browser consoles talk to the services cross-origin.
_CORS_HEADERS = {
    "Access-Control-Allow-Origin": "*",
    "Access-Control-Allow-Methods": "GET, POST, PUT, OPTIONS",
    "Access-Control-Allow-Headers": "Content-Type, X-UbiServ-Token, X-Session-Token",
}


@dataclass
class Request:
    method: str
    path: str
    params: dict = field(default_factory=dict)  # path template captures
    query: dict = field(default_factory=dict)
    headers: dict = field(default_factory=dict)  # keys lowercased
    body: dict = field(default_factory=dict)


def _compile(pattern: str) -> re.Pattern:
    parts = [
        f"(?P<{seg[1:-1]}>[^/]+)"
        if seg.startswith("{") and seg.endswith("}")
        else re.escape(seg)
        for seg in pattern.split("/")
    ]
    return re.compile("^" + "/".join(parts) + "$")


class JsonApp:
    """Tiny JSON API router: handlers take a Request and return a dict."""

    def __init__(self, name: str):
        self.name = name
        self._routes = []

    def route(self, method: str, pattern: str):
        def register(handler):
            self._routes.append((method.upper(), _compile(pattern), handler))
            return handler

        return register

    def dispatch(self, method, path, query=None, headers=None, body=None):
        """Run one request; returns (status, payload)."""
        headers = {k.lower(): v for k, v in (headers or {}).items()}
        for route_method, pattern, handler in self._routes:
            match = pattern.match(path)
            if match and route_method == method.upper():
                request = Request(
                    method=method.upper(),
                    path=path,
                    params=match.groupdict(),
                    query=dict(query or {}),
                    headers=headers,
                    body=dict(body or {}),
                )
                try:
                    return 200, handler(request)
                except UsnError as exc:
                    return status_for(exc.code), {"error": exc.code}
                except Exception:
                    log.exception("handler failed: %s %s", method, path)
                    return 500, {"error": "InternalError"}
        return 404, {"error": "NotFound"}


class LocalTransport:
    """In-process client transport speaking straight to a JsonApp."""

    def __init__(self, app: JsonApp):
        self._app = app

    def request(self, method, path, *, query=None, headers=None, body=None) -> dict:
        status, payload = self._app.dispatch(
            method, path, query=query, headers=headers, body=body
        )
        if status >= 400:
            raise UsnError(payload.get("error", "InternalError"))
        return payload


class HttpTransport:
    """Loopback-TCP client transport with the same surface as LocalTransport."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def request(self, method, path, *, query=None, headers=None, body=None) -> dict:
        url = self.base_url + path
        if query:
            url += "?" + urllib.parse.urlencode(query)
        data = None
        send_headers = dict(headers or {})
        if body is not None and method.upper() != "GET":
            data = json.dumps(body).encode("utf-8")
            send_headers["Content-Type"] = "application/json"
        req = urllib.request.Request(
            url, data=data, headers=send_headers, method=method.upper()
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            try:
                payload = json.loads(exc.read().decode("utf-8"))
            except (ValueError, OSError):
                payload = {}
            raise UsnError(payload.get("error", "InternalError")) from None
        except (urllib.error.URLError, socket.timeout, ConnectionError) as exc:
            raise TransportError(f"{method} {url}: {exc}") from None


def _make_handler(app: JsonApp):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s %s", self.address_string(), fmt % args)

        def _respond(self, status: int, payload: dict):
            raw = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(raw)))
            for key, value in _CORS_HEADERS.items():
                self.send_header(key, value)
            self.end_headers()
            self.wfile.write(raw)

        def _handle(self, method: str):
            split = urllib.parse.urlsplit(self.path)
            query = {k: v[0] for k, v in urllib.parse.parse_qs(split.query).items()}
            body = {}
            length = int(self.headers.get("Content-Length") or 0)
            if length:
                try:
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                except ValueError:
                    self._respond(400, {"error": "BadRequest"})
                    return
            status, payload = app.dispatch(
                method, split.path, query=query, headers=dict(self.headers), body=body
            )
            self._respond(status, payload)

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

        def do_PUT(self):
            self._handle("PUT")

        def do_OPTIONS(self):
            self.send_response(204)
            for key, value in _CORS_HEADERS.items():
                self.send_header(key, value)
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


class AppServer:
    """A JsonApp bound to a loopback TCP port, served from a daemon thread."""

    def __init__(self, app: JsonApp, host: str = "127.0.0.1", port: int = 0):
        try:
            self._httpd = ThreadingHTTPServer((host, port), _make_handler(app))
        except OSError as exc:
            raise UsnError("PortInUse", f"cannot bind {host}:{port}: {exc}") from None
        self._httpd.daemon_threads = True
        self.host, self.port = self._httpd.server_address[:2]
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name=f"usn-{app.name}", daemon=True
        )

    @property
    def base_url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "AppServer":
        self._thread.start()
        return self

    def serve_forever(self):
        self._httpd.serve_forever()

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()


def start_server(app: JsonApp, host: str = "127.0.0.1", port: int = 0) -> AppServer:
    return AppServer(app, host, port).start()
