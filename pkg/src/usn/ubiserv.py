"""Per-area presence server enforcing who may see whom.

One instance serves one bounded area. Devices register to get a session
token; presence means holding a live session here. A profile request
succeeds only when the requester is registered, the target is registered
in this same area, and the target has not switched its service off. The
decision is made against one consistent registry snapshot, then the
profile is fetched from the social network outside the lock.

The server authenticates to the social network lazily, retries once on an
expired or rejected token, and caches both the device-to-user binding and
the served view for a bounded time so upstream policy changes show up
within the cache TTL.
"""

from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass

from .core import ServiceArea, parse_usnd_id
from .errors import TransportError, UsnError
from .socialnet import SocialNetworkClient
from .webapi import HttpTransport, JsonApp

DEFAULT_CACHE_TTL = 30.0


@dataclass
class Session:
    session_token: str
    usnd_id: str
    area_id: str
    registered_at: float
    last_seen: float
    service_enabled: bool = True


class UbiServ:
    """Event-area server: presence registry plus mediated profile access."""

    def __init__(
        self,
        area: ServiceArea,
        sn_client: SocialNetworkClient,
        ubiserv_id: str,
        secret: str,
        cache_ttl: float = DEFAULT_CACHE_TTL,
        session_idle_timeout: float | None = None,
        clock=time.monotonic,
    ):
        if cache_ttl < 0:
            raise UsnError("ConfigError", "cache_ttl must be >= 0")
        if session_idle_timeout is not None and session_idle_timeout <= 0:
            raise UsnError("ConfigError", "session_idle_timeout must be positive")
        self.area = area
        self.ubiserv_id = ubiserv_id
        self._secret = secret
        self._sn = sn_client
        self._cache_ttl = float(cache_ttl)
        self._idle_timeout = session_idle_timeout
        self._clock = clock
        self._lock = threading.RLock()
        self._sessions = {}  # token -> Session
        self._by_usnd = {}  # usnd id -> token
        self._issued = set()
        self._sn_token = None
        self._profile_cache = {}  # user_id -> (payload, fetched_at)
        self._binding_cache = {}  # usnd id -> (user_id, fetched_at)

    # -- presence registry ----------------------------------------------

    def _expired(self, session: Session) -> bool:
        return (
            self._idle_timeout is not None
            and self._clock() - session.last_seen > self._idle_timeout
        )

    def _drop(self, session: Session):
        self._sessions.pop(session.session_token, None)
        self._by_usnd.pop(session.usnd_id, None)

    def _session_by_token(self, token) -> Session:
        session = self._sessions.get(token) if token else None
        if session is None:
            raise UsnError("UnknownSession")
        if self._expired(session):
            self._drop(session)
            raise UsnError("UnknownSession")
        session.last_seen = self._clock()
        return session

    def _session_by_usnd(self, usnd_value: str):
        token = self._by_usnd.get(usnd_value)
        if token is None:
            return None
        session = self._sessions[token]
        if self._expired(session):
            self._drop(session)
            return None
        return session

    def register_usnd(self, usnd_raw) -> dict:
        usnd = parse_usnd_id(usnd_raw)
        with self._lock:
            previous = self._by_usnd.get(usnd.value)
            if previous is not None:
                self._sessions.pop(previous, None)
            while True:
                token = secrets.token_hex(16)
                if token not in self._issued:
                    break
            self._issued.add(token)
            now = self._clock()
            self._sessions[token] = Session(
                session_token=token,
                usnd_id=usnd.value,
                area_id=self.area.area_id,
                registered_at=now,
                last_seen=now,
            )
            self._by_usnd[usnd.value] = token
        return {"session_token": token, "area_id": self.area.area_id}

    def deregister(self, session_token) -> dict:
        with self._lock:
            session = self._session_by_token(session_token)
            self._drop(session)
        return {"ok": True}

    def set_service_enabled(self, session_token, enabled: bool) -> dict:
        with self._lock:
            session = self._session_by_token(session_token)
            session.service_enabled = bool(enabled)
        return {"ok": True}

    def registered_count(self) -> int:
        with self._lock:
            return sum(
                1 for s in list(self._sessions.values()) if not self._expired(s)
            )

    # -- social network access --------------------------------------------

    def _authed(self, call):
        """Run call(token) with lazy auth and a single retry on a dead token."""
        try:
            if self._sn_token is None:
                self._sn_token = self._sn.authenticate(self.ubiserv_id, self._secret)
            try:
                return call(self._sn_token)
            except UsnError as exc:
                if exc.code not in ("ExpiredToken", "InvalidToken"):
                    raise
                self._sn_token = self._sn.authenticate(self.ubiserv_id, self._secret)
                return call(self._sn_token)
        except TransportError as exc:
            raise UsnError("UpstreamUnavailable", str(exc)) from None

    def _lookup_user(self, usnd_value: str) -> str:
        now = self._clock()
        cached = self._binding_cache.get(usnd_value)
        if cached is not None and now - cached[1] < self._cache_ttl:
            return cached[0]
        self._binding_cache.pop(usnd_value, None)
        user_id = self._authed(
            lambda token: self._sn.lookup_user_by_usnd(token, usnd_value)
        )
        self._binding_cache[usnd_value] = (user_id, self._clock())
        return user_id

    def fetch_profile(self, user_id: str) -> dict:
        """Served view for user_id, from cache when fresh."""
        now = self._clock()
        cached = self._profile_cache.get(user_id)
        if cached is not None and now - cached[1] < self._cache_ttl:
            return cached[0]
        self._profile_cache.pop(user_id, None)
        payload = self._authed(
            lambda token: self._sn.fetch_event_view(token, user_id)
        )
        self._profile_cache[user_id] = (payload, self._clock())
        return payload

    # -- the mediated request ------------------------------------------------

    def handle_profile_request(self, session_token, target_raw) -> dict:
        with self._lock:
            self._session_by_token(session_token)
            target = parse_usnd_id(target_raw)
            target_session = self._session_by_usnd(target.value)
            if target_session is None:
                raise UsnError("TargetNotPresent", target.value)
            if not target_session.service_enabled:
                raise UsnError("ServiceDisabled", target.value)
        user_id = self._lookup_user(target.value)
        return self.fetch_profile(user_id)


def ubiserv_from_config(config: dict, sn_transport=None) -> UbiServ:
    try:
        bounds = config["bounds"]
        area = ServiceArea(
            area_id=config["area_id"],
            name=config.get("name", config["area_id"]),
            min_x=float(bounds["min_x"]),
            min_y=float(bounds["min_y"]),
            max_x=float(bounds["max_x"]),
            max_y=float(bounds["max_y"]),
        )
        ubiserv_id = config["ubiserv_id"]
        secret = config["secret"]
    except (KeyError, TypeError, ValueError) as exc:
        raise UsnError("ConfigError", f"bad ubiserv config: {exc}") from None
    if sn_transport is None:
        sn_base_url = config.get("sn_base_url")
        if not sn_base_url:
            raise UsnError("ConfigError", "sn_base_url required")
        sn_transport = HttpTransport(sn_base_url)
    return UbiServ(
        area,
        SocialNetworkClient(sn_transport),
        ubiserv_id=ubiserv_id,
        secret=secret,
        cache_ttl=config.get("cache_ttl_seconds", DEFAULT_CACHE_TTL),
        session_idle_timeout=config.get("token_ttl_seconds"),
    )


def build_ubiserv_app(ubiserv: UbiServ) -> JsonApp:
    app = JsonApp("ubiserv")

    @app.route("POST", "/register")
    def register(req):
        return ubiserv.register_usnd(req.body.get("usnd_id"))

    @app.route("POST", "/deregister")
    def deregister(req):
        return ubiserv.deregister(req.body.get("session_token"))

    @app.route("POST", "/service")
    def service(req):
        enabled = req.body.get("enabled")
        if not isinstance(enabled, bool):
            raise UsnError("BadRequest", "enabled must be a boolean")
        return ubiserv.set_service_enabled(req.body.get("session_token"), enabled)

    @app.route("GET", "/profile")
    def profile(req):
        token = req.headers.get("x-session-token")
        return ubiserv.handle_profile_request(token, req.query.get("target", ""))

    @app.route("GET", "/health")
    def health(req):
        return {
            "area_id": ubiserv.area.area_id,
            "registered_count": ubiserv.registered_count(),
        }

    return app


class UbiServClient:
    """Device-side client for one area server over either transport."""

    def __init__(self, transport):
        self._transport = transport

    def _request(self, method, path, **kwargs) -> dict:
        try:
            return self._transport.request(method, path, **kwargs)
        except TransportError as exc:
            raise UsnError("UbiServUnreachable", str(exc)) from None

    def register(self, usnd_id) -> dict:
        return self._request("POST", "/register", body={"usnd_id": usnd_id})

    def deregister(self, session_token) -> dict:
        return self._request(
            "POST", "/deregister", body={"session_token": session_token}
        )

    def set_service(self, session_token, enabled: bool) -> dict:
        return self._request(
            "POST",
            "/service",
            body={"session_token": session_token, "enabled": enabled},
        )

    def request_profile(self, session_token, target_usnd) -> dict:
        return self._request(
            "GET",
            "/profile",
            query={"target": target_usnd},
            headers={"X-Session-Token": session_token},
        )

    def health(self) -> dict:
        return self._request("GET", "/health")
