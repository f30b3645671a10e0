"""Social network mock: accounts, device bindings, and per-context views.

Holds user profiles keyed by user id, a unique binding from device id to
user, and the view policies that decide which profile fields each context
may see. Event servers register with a shared secret and authenticate for
bearer tokens before they can resolve devices or fetch event views.

State fits in memory; an optional store path persists it as one JSON file
rewritten atomically on every mutation, so a restarted service comes back
with the same accounts.
"""

from __future__ import annotations

import hmac
import json
import os
import secrets
import threading
import time
from collections import Counter

from .core import (
    PolicyContext,
    ProfileField,
    ViewPolicy,
    evaluate_permissions,
    parse_usnd_id,
    policy_from_json,
    policy_to_json,
    profile_from_json,
    profile_to_json,
    served_to_json,
)
from .errors import UsnError
from .webapi import JsonApp

DEFAULT_TOKEN_TTL = 3600
MIN_SECRET_BYTES = 16

# A context with no stored policy falls back to serving the name alone.
_DEFAULT_FIELDS = frozenset({ProfileField.NAME})


class SocialNetwork:
    """In-memory social network backend.

    ``clock`` is injectable so token expiry is testable without sleeping.
    ``counters`` tallies requests by kind; the event-server cache contract
    is asserted against it.
    """

    def __init__(self, store_path=None, token_ttl=DEFAULT_TOKEN_TTL, clock=time.monotonic):
        if token_ttl <= 0:
            raise UsnError("ConfigError", "token_ttl must be positive")
        self._lock = threading.RLock()
        self._store_path = store_path
        self._token_ttl = int(token_ttl)
        self._clock = clock
        self._ubiservs = {}  # ubiserv_id -> secret
        self._profiles = {}  # user_id -> UserProfile
        self._policies = {}  # (user_id, PolicyContext) -> ViewPolicy
        self._usnd_index = {}  # usnd id string -> user_id
        self._tokens = {}  # token -> (ubiserv_id, issued_at)
        self._issued = set()
        self.counters = Counter()
        if store_path and os.path.exists(store_path):
            self._load()

    # -- persistence --------------------------------------------------

    def _load(self):
        with open(self._store_path, encoding="utf-8") as fh:
            data = json.load(fh)
        self._ubiservs.update(data.get("ubiservs", {}))
        for raw in data.get("profiles", []):
            profile = profile_from_json(raw)
            self._profiles[profile.user_id] = profile
            self._usnd_index[profile.usnd_id] = profile.user_id
        for raw in data.get("policies", []):
            policy = policy_from_json(raw)
            self._policies[(policy.user_id, policy.context)] = policy

    def _save(self):
        if not self._store_path:
            return
        data = {
            "schema": 1,
            "ubiservs": self._ubiservs,
            "profiles": [
                profile_to_json(p) for _, p in sorted(self._profiles.items())
            ],
            "policies": [
                policy_to_json(p)
                for _, p in sorted(
                    self._policies.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
                )
            ],
        }
        tmp = f"{self._store_path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, self._store_path)

    # -- event server registration and auth ----------------------------

    def register_ubiserv(self, ubiserv_id, secret) -> dict:
        if not ubiserv_id or not isinstance(ubiserv_id, str):
            raise UsnError("BadRequest", "ubiserv_id required")
        if not isinstance(secret, str) or len(secret.encode("utf-8")) < MIN_SECRET_BYTES:
            raise UsnError("BadRequest", f"secret must be at least {MIN_SECRET_BYTES} bytes")
        with self._lock:
            if ubiserv_id in self._ubiservs:
                raise UsnError("DuplicateUbiServ", ubiserv_id)
            self._ubiservs[ubiserv_id] = secret
            self._save()
        return {"ok": True}

    def authenticate(self, ubiserv_id, secret) -> dict:
        with self._lock:
            self.counters["auth"] += 1
            stored = self._ubiservs.get(ubiserv_id)
            if stored is None:
                raise UsnError("UnknownUbiServ", str(ubiserv_id))
            if not hmac.compare_digest(stored, str(secret or "")):
                raise UsnError("BadSecret")
            while True:
                token = secrets.token_hex(16)
                if token not in self._issued:
                    break
            self._issued.add(token)
            self._tokens[token] = (ubiserv_id, self._clock())
        return {"token": token, "ttl_seconds": self._token_ttl}

    def _check_token(self, token) -> str:
        """Return the ubiserv id a live token belongs to."""
        if not token:
            raise UsnError("InvalidToken")
        entry = self._tokens.get(token)
        if entry is None:
            raise UsnError("InvalidToken")
        ubiserv_id, issued_at = entry
        if self._clock() - issued_at > self._token_ttl:
            del self._tokens[token]
            raise UsnError("ExpiredToken")
        return ubiserv_id

    # -- accounts -------------------------------------------------------

    def upsert_profile(self, raw_profile: dict) -> dict:
        profile = profile_from_json(raw_profile)
        with self._lock:
            self.counters["upsert_profile"] += 1
            usnd = profile.usnd_id
            bound = self._usnd_index.get(usnd)
            if bound is not None and bound != profile.user_id:
                raise UsnError("DeviceAlreadyBound", f"{usnd} -> {bound}")
            previous = self._profiles.get(profile.user_id)
            if previous is not None and previous.usnd_id != usnd:
                self._usnd_index.pop(previous.usnd_id, None)
            self._profiles[profile.user_id] = profile
            self._usnd_index[usnd] = profile.user_id
            self._save()
        return {"ok": True}

    def delete_profile(self, user_id) -> dict:
        with self._lock:
            profile = self._profiles.pop(user_id, None)
            if profile is None:
                raise UsnError("UnknownUser", str(user_id))
            self._usnd_index.pop(profile.usnd_id, None)
            for context in PolicyContext:
                self._policies.pop((user_id, context), None)
            self._save()
        return {"ok": True}

    def set_view_policy(self, user_id, raw_policy: dict) -> dict:
        raw = dict(raw_policy)
        raw.setdefault("user_id", user_id)
        policy = policy_from_json(raw)
        if policy.user_id != user_id:
            raise UsnError("PolicyMismatch", f"{policy.user_id} != {user_id}")
        with self._lock:
            self.counters["set_policy"] += 1
            if user_id not in self._profiles:
                raise UsnError("UnknownUser", str(user_id))
            self._policies[(user_id, policy.context)] = policy
            self._save()
        return {"ok": True}

    # -- queries ----------------------------------------------------------

    def lookup_user_by_usnd(self, token, usnd_raw) -> dict:
        usnd = parse_usnd_id(usnd_raw)
        with self._lock:
            self.counters["lookup"] += 1
            self._check_token(token)
            user_id = self._usnd_index.get(usnd.value)
            if user_id is None:
                raise UsnError("UnknownDevice", usnd.value)
        return {"user_id": user_id}

    def _served(self, user_id, context: PolicyContext) -> dict:
        profile = self._profiles.get(user_id)
        if profile is None:
            raise UsnError("UnknownUser", str(user_id))
        policy = self._policies.get((user_id, context))
        if policy is None:
            policy = ViewPolicy(user_id=user_id, context=context, allowed_fields=_DEFAULT_FIELDS)
        return served_to_json(evaluate_permissions(profile, policy))

    def serve_event_view(self, token, user_id) -> dict:
        """The view an authenticated event server gets of one user."""
        with self._lock:
            self.counters["serve_event"] += 1
            self._check_token(token)
            return self._served(user_id, PolicyContext.UBISERV_EVENT)


def build_sn_app(sn: SocialNetwork) -> JsonApp:
    app = JsonApp("sn")

    @app.route("POST", "/ubiserv/register")
    def register_ubiserv(req):
        return sn.register_ubiserv(req.body.get("ubiserv_id"), req.body.get("secret"))

    @app.route("POST", "/ubiserv/auth")
    def auth(req):
        return sn.authenticate(req.body.get("ubiserv_id"), req.body.get("secret"))

    @app.route("POST", "/users")
    def upsert_user(req):
        return sn.upsert_profile(req.body)

    @app.route("PUT", "/users/{user_id}/policy")
    def set_policy(req):
        return sn.set_view_policy(req.params["user_id"], req.body)

    @app.route("GET", "/lookup")
    def lookup(req):
        token = req.headers.get("x-ubiserv-token")
        return sn.lookup_user_by_usnd(token, req.query.get("usnd_id", ""))

    @app.route("GET", "/profiles/{user_id}")
    def get_profile(req):
        token = req.headers.get("x-ubiserv-token")
        return sn.serve_event_view(token, req.params["user_id"])

    @app.route("GET", "/health")
    def health(req):
        return {"status": "ok", "component": "sn"}

    return app


class SocialNetworkClient:
    """Thin typed wrapper over either transport to the social network API."""

    def __init__(self, transport):
        self._transport = transport

    def register_ubiserv(self, ubiserv_id, secret) -> dict:
        return self._transport.request(
            "POST",
            "/ubiserv/register",
            body={"ubiserv_id": ubiserv_id, "secret": secret},
        )

    def authenticate(self, ubiserv_id, secret) -> str:
        reply = self._transport.request(
            "POST", "/ubiserv/auth", body={"ubiserv_id": ubiserv_id, "secret": secret}
        )
        return reply["token"]

    def upsert_profile(self, profile_json: dict) -> dict:
        return self._transport.request("POST", "/users", body=profile_json)

    def set_view_policy(self, user_id, policy_json: dict) -> dict:
        return self._transport.request(
            "PUT", f"/users/{user_id}/policy", body=policy_json
        )

    def lookup_user_by_usnd(self, token, usnd_id) -> str:
        reply = self._transport.request(
            "GET",
            "/lookup",
            query={"usnd_id": usnd_id},
            headers={"X-UbiServ-Token": token},
        )
        return reply["user_id"]

    def fetch_event_view(self, token, user_id) -> dict:
        return self._transport.request(
            "GET", f"/profiles/{user_id}", headers={"X-UbiServ-Token": token}
        )
