"""Fixture files: validated account and placement data for a run.

A fixture bundle declares event-server credentials, user profiles, view
policies, and initial floor placements. Everything is validated up front
so a bad file never leaves a half-seeded store, and seeding is idempotent:
credentials that already exist are skipped, profiles are upserted.
"""

from __future__ import annotations

import json

from .core import (
    parse_usnd_id,
    policy_from_json,
    profile_from_json,
)
from .errors import TransportError, UsnError
from .socialnet import MIN_SECRET_BYTES, SocialNetworkClient

_SECTIONS = ("ubiservs", "profiles", "policies", "placements")


def _fail(message: str):
    raise UsnError("FixtureParseError", message)


def parse_fixtures(data) -> dict:
    """Validate a fixture bundle; returns it in normalized dict form."""
    if not isinstance(data, dict):
        _fail("fixture bundle must be an object")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        _fail(f"unknown fixture sections: {sorted(unknown)}")
    out = {section: [] for section in _SECTIONS}

    seen_ubiservs = set()
    for i, entry in enumerate(data.get("ubiservs", [])):
        if not isinstance(entry, dict):
            _fail(f"ubiservs[{i}] must be an object")
        ubiserv_id = entry.get("ubiserv_id")
        secret = entry.get("secret")
        if not ubiserv_id or not isinstance(ubiserv_id, str):
            _fail(f"ubiservs[{i}]: ubiserv_id required")
        if not isinstance(secret, str) or len(secret.encode("utf-8")) < MIN_SECRET_BYTES:
            _fail(f"ubiservs[{i}]: secret must be at least {MIN_SECRET_BYTES} bytes")
        if ubiserv_id in seen_ubiservs:
            _fail(f"ubiservs[{i}]: duplicate ubiserv_id {ubiserv_id}")
        seen_ubiservs.add(ubiserv_id)
        area_id = entry.get("area_id")
        if area_id is not None and not isinstance(area_id, str):
            _fail(f"ubiservs[{i}]: area_id must be a string")
        out["ubiservs"].append(
            {"ubiserv_id": ubiserv_id, "secret": secret, "area_id": area_id}
        )

    user_ids = set()
    usnd_ids = set()
    for i, entry in enumerate(data.get("profiles", [])):
        try:
            profile = profile_from_json(entry)
        except UsnError as exc:
            _fail(f"profiles[{i}]: {exc}")
        if profile.user_id in user_ids:
            _fail(f"profiles[{i}]: duplicate user_id {profile.user_id}")
        if profile.usnd_id in usnd_ids:
            _fail(f"profiles[{i}]: usnd_id {profile.usnd_id} bound twice")
        user_ids.add(profile.user_id)
        usnd_ids.add(profile.usnd_id)
        out["profiles"].append(dict(entry))

    seen_policies = set()
    for i, entry in enumerate(data.get("policies", [])):
        try:
            policy = policy_from_json(entry)
        except UsnError as exc:
            _fail(f"policies[{i}]: {exc}")
        if policy.user_id not in user_ids:
            _fail(f"policies[{i}]: unknown user {policy.user_id}")
        key = (policy.user_id, policy.context)
        if key in seen_policies:
            _fail(f"policies[{i}]: duplicate policy for {key}")
        seen_policies.add(key)
        out["policies"].append(dict(entry))

    placed = set()
    for i, entry in enumerate(data.get("placements", [])):
        if not isinstance(entry, dict):
            _fail(f"placements[{i}] must be an object")
        try:
            usnd = parse_usnd_id(entry.get("usnd_id"))
        except UsnError as exc:
            _fail(f"placements[{i}]: {exc}")
        if usnd.value in placed:
            _fail(f"placements[{i}]: {usnd.value} placed twice")
        placed.add(usnd.value)
        area_id = entry.get("area_id")
        if not area_id or not isinstance(area_id, str):
            _fail(f"placements[{i}]: area_id required")
        normalized = {"usnd_id": usnd.value, "area_id": area_id}
        for key in ("x", "y"):
            value = entry.get(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                _fail(f"placements[{i}]: {key} must be a number")
            normalized[key] = float(value)
        heading = entry.get("heading", 0.0)
        if isinstance(heading, bool) or not isinstance(heading, (int, float)):
            _fail(f"placements[{i}]: heading must be a number")
        normalized["heading"] = float(heading)
        beacon = entry.get("beacon_enabled", True)
        if not isinstance(beacon, bool):
            _fail(f"placements[{i}]: beacon_enabled must be a boolean")
        normalized["beacon_enabled"] = beacon
        out["placements"].append(normalized)

    return out


def load_fixtures(path: str) -> dict:
    """Read and validate a fixture bundle.

    Accepts either a standalone fixture file or a scenario script, in
    which case the script's embedded fixtures section is used.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
    except ValueError as exc:
        _fail(f"{path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        _fail(f"{path}: top level must be an object")
    if data.get("schema") != 1:
        _fail(f"{path}: schema must be 1")
    if isinstance(data.get("fixtures"), dict):
        return parse_fixtures(data["fixtures"])
    body = {k: v for k, v in data.items() if k != "schema"}
    return parse_fixtures(body)


def seed_social_network(client: SocialNetworkClient, fixtures: dict) -> int:
    """Push a validated bundle to the social network; returns profile count.

    Safe to run repeatedly: existing credentials are kept, profiles and
    policies are overwritten with the fixture versions.
    """
    try:
        for entry in fixtures.get("ubiservs", []):
            try:
                client.register_ubiserv(entry["ubiserv_id"], entry["secret"])
            except UsnError as exc:
                if exc.code != "DuplicateUbiServ":
                    raise
        for profile in fixtures.get("profiles", []):
            client.upsert_profile(profile)
        for policy in fixtures.get("policies", []):
            client.set_view_policy(policy["user_id"], policy)
    except TransportError as exc:
        raise UsnError("UpstreamUnavailable", str(exc)) from None
    return len(fixtures.get("profiles", []))
