"""Scenario engine: boots the stack, replays scripted steps, checks asserts.

A scenario is a JSON script (``schema: 1``) naming service areas, a
fixture bundle, and an ordered step list. Each run boots a fresh social
network, one area server and one floor per area, seeds the fixtures,
creates a device per placement, then executes the steps in order.

Steps either act (attach, move, point, scan, request, set_policy,
opt_out, opt_in, deregister, parallel) or assert against the recorded
result of an earlier step (by its ``id``). Errors raised by an acting
step are recorded as its outcome, not aborted on, so scripts can probe
failure paths; assert failures are tallied and decide the final verdict.

The transcript is JSON lines: a header, one entry per step, and a
verdict line. Entries carry no tokens, timestamps, or port numbers, so
replaying a script yields byte-identical transcripts. Steps are fully
scripted; the recorded seed identifies generated script variants rather
than driving any engine-side randomness.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass

from .core import ServiceArea, canonical_json, parse_usnd_id, policy_from_json
from .device import DisplayRecord, UsndDevice
from .errors import UsnError
from .fixtures import parse_fixtures, seed_social_network
from .socialnet import SocialNetwork, SocialNetworkClient, build_sn_app
from .ubiserv import DEFAULT_CACHE_TTL, UbiServ, UbiServClient, build_ubiserv_app
from .webapi import HttpTransport, LocalTransport, start_server
from .world import (
    DEFAULT_CONE_HALF_ANGLE_RAD,
    DEFAULT_DISCOVERY_RANGE_M,
    World,
)

_ACTIONS = {
    "attach",
    "deregister",
    "move",
    "point",
    "scan",
    "request",
    "set_policy",
    "opt_out",
    "opt_in",
    "assert",
    "parallel",
}

_ASSERT_CHECKS = {
    "outcome",
    "error",
    "display_labels",
    "display_lines",
    "target_user_id",
    "neighbors",
    "contains",
    "excludes",
}


def _fail(message: str):
    raise UsnError("ScriptParseError", message)


def _require_placed(step, i, placed):
    usnd = step.get("usnd_id")
    if usnd not in placed:
        _fail(f"steps[{i}]: usnd_id {usnd!r} has no placement")


def _validate_step(step, i, *, placed, users, area_ids, known_ids, allow_nested=True):
    if not isinstance(step, dict):
        _fail(f"steps[{i}] must be an object")
    action = step.get("action")
    if action not in _ACTIONS:
        _fail(f"steps[{i}]: unknown action {action!r}")
    step_id = step.get("id")
    if step_id is not None:
        if not isinstance(step_id, str) or not step_id:
            _fail(f"steps[{i}]: id must be a non-empty string")
        if step_id in known_ids:
            _fail(f"steps[{i}]: duplicate id {step_id}")

    if action == "attach":
        _require_placed(step, i, placed)
        if step.get("area_id") not in area_ids:
            _fail(f"steps[{i}]: unknown area {step.get('area_id')!r}")
    elif action in ("deregister", "point", "scan", "opt_out", "opt_in"):
        _require_placed(step, i, placed)
    elif action == "move":
        _require_placed(step, i, placed)
        for key in ("x", "y"):
            value = step.get(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                _fail(f"steps[{i}]: {key} must be a number")
        heading = step.get("heading", 0.0)
        if isinstance(heading, bool) or not isinstance(heading, (int, float)):
            _fail(f"steps[{i}]: heading must be a number")
    elif action == "request":
        _require_placed(step, i, placed)
        try:
            parse_usnd_id(step.get("target"))
        except UsnError as exc:
            _fail(f"steps[{i}]: bad target: {exc}")
    elif action == "set_policy":
        user_id = step.get("user_id")
        if user_id not in users:
            _fail(f"steps[{i}]: unknown user {user_id!r}")
        try:
            policy_from_json(
                {
                    "user_id": user_id,
                    "context": step.get("context"),
                    "allowed_fields": step.get("allowed_fields"),
                }
            )
        except UsnError as exc:
            _fail(f"steps[{i}]: bad policy: {exc}")
    elif action == "assert":
        ref = step.get("step")
        if ref not in known_ids:
            _fail(f"steps[{i}]: assert references unknown step {ref!r}")
        checks = set(step) & _ASSERT_CHECKS
        if not checks:
            _fail(f"steps[{i}]: assert has no checks")
        extra = set(step) - _ASSERT_CHECKS - {"action", "id", "step"}
        if extra:
            _fail(f"steps[{i}]: unknown assert keys {sorted(extra)}")
    elif action == "parallel":
        if not allow_nested:
            _fail(f"steps[{i}]: parallel cannot nest")
        subs = step.get("steps")
        if not isinstance(subs, list) or not subs:
            _fail(f"steps[{i}]: parallel needs a non-empty steps list")
        for j, sub in enumerate(subs):
            if isinstance(sub, dict) and sub.get("action") in ("assert", "parallel"):
                _fail(f"steps[{i}].steps[{j}]: {sub.get('action')} not allowed here")
            _validate_step(
                sub,
                f"{i}.{j}",
                placed=placed,
                users=users,
                area_ids=area_ids,
                known_ids=known_ids,
                allow_nested=False,
            )
            if isinstance(sub, dict) and sub.get("id"):
                known_ids.add(sub["id"])

    if step_id is not None:
        known_ids.add(step_id)


def validate_script(script) -> dict:
    """Check a parsed scenario document; returns it with fixtures normalized."""
    if not isinstance(script, dict):
        _fail("script must be a JSON object")
    if script.get("schema") != 1:
        _fail("schema must be 1")
    name = script.get("name")
    if not name or not isinstance(name, str):
        _fail("name required")
    seed = script.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("seed must be an integer")
    transport = script.get("transport", "local")
    if transport not in ("local", "tcp"):
        _fail("transport must be 'local' or 'tcp'")

    areas = script.get("areas")
    if not isinstance(areas, list) or not areas:
        _fail("at least one area required")
    area_ids = set()
    for i, area in enumerate(areas):
        if not isinstance(area, dict):
            _fail(f"areas[{i}] must be an object")
        area_id = area.get("area_id")
        if not area_id or not isinstance(area_id, str):
            _fail(f"areas[{i}]: area_id required")
        if area_id in area_ids:
            _fail(f"areas[{i}]: duplicate area {area_id}")
        area_ids.add(area_id)
        try:
            ServiceArea(
                area_id=area_id,
                name=area.get("name", area_id),
                min_x=float(area["min_x"]),
                min_y=float(area["min_y"]),
                max_x=float(area["max_x"]),
                max_y=float(area["max_y"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            _fail(f"areas[{i}]: bad bounds: {exc}")
        except UsnError as exc:
            _fail(f"areas[{i}]: {exc}")

    try:
        fixtures = parse_fixtures(script.get("fixtures", {}))
    except UsnError as exc:
        _fail(str(exc))

    creds_by_area = {}
    for cred in fixtures["ubiservs"]:
        area_id = cred.get("area_id")
        if area_id is None:
            continue
        if area_id not in area_ids:
            _fail(f"ubiserv {cred['ubiserv_id']}: unknown area {area_id}")
        if area_id in creds_by_area:
            _fail(f"area {area_id} has two ubiserv credentials")
        creds_by_area[area_id] = cred
    missing = area_ids - set(creds_by_area)
    if missing:
        _fail(f"areas without a ubiserv credential: {sorted(missing)}")

    placed = set()
    for placement in fixtures["placements"]:
        if placement["area_id"] not in area_ids:
            _fail(
                f"placement {placement['usnd_id']}: unknown area {placement['area_id']}"
            )
        placed.add(placement["usnd_id"])
    users = {profile["user_id"] for profile in fixtures["profiles"]}

    steps = script.get("steps")
    if not isinstance(steps, list):
        _fail("steps must be a list")
    known_ids = set()
    for i, step in enumerate(steps):
        _validate_step(
            step, i, placed=placed, users=users, area_ids=area_ids, known_ids=known_ids
        )

    out = dict(script)
    out["seed"] = seed
    out["transport"] = transport
    out["fixtures"] = fixtures
    return out


def load_script(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc}")
    except ValueError as exc:
        _fail(f"{path} is not valid JSON: {exc}")
    return validate_script(data)


class _Env:
    """Booted service set for one scenario run."""

    def __init__(self, script: dict):
        self.transport = script["transport"]
        self.servers = []
        try:
            self._boot(script)
        except BaseException:
            self.close()
            raise

    def _boot(self, script: dict):
        self.sn = SocialNetwork()
        sn_app = build_sn_app(self.sn)
        if self.transport == "tcp":
            server = start_server(sn_app)
            self.servers.append(server)
            self._sn_url = server.base_url
        else:
            self._sn_app = sn_app
        self.sn_client = SocialNetworkClient(self._sn_transport())
        seed_social_network(self.sn_client, script["fixtures"])

        creds = {
            cred["area_id"]: cred
            for cred in script["fixtures"]["ubiservs"]
            if cred.get("area_id")
        }
        world_cfg = script.get("world", {})
        cache_ttl = script.get("cache_ttl_seconds", DEFAULT_CACHE_TTL)
        self.worlds = {}
        self.ubiservs = {}
        self.endpoints = {}
        for area_cfg in script["areas"]:
            area = ServiceArea(
                area_id=area_cfg["area_id"],
                name=area_cfg.get("name", area_cfg["area_id"]),
                min_x=float(area_cfg["min_x"]),
                min_y=float(area_cfg["min_y"]),
                max_x=float(area_cfg["max_x"]),
                max_y=float(area_cfg["max_y"]),
            )
            world = World(
                area,
                discovery_range_m=world_cfg.get(
                    "discovery_range_m", DEFAULT_DISCOVERY_RANGE_M
                ),
                cone_half_angle_rad=world_cfg.get(
                    "cone_half_angle_rad", DEFAULT_CONE_HALF_ANGLE_RAD
                ),
            )
            cred = creds[area.area_id]
            ubi = UbiServ(
                area,
                SocialNetworkClient(self._sn_transport()),
                ubiserv_id=cred["ubiserv_id"],
                secret=cred["secret"],
                cache_ttl=cache_ttl,
            )
            app = build_ubiserv_app(ubi)
            if self.transport == "tcp":
                server = start_server(app)
                self.servers.append(server)
                endpoint = HttpTransport(server.base_url)
            else:
                endpoint = LocalTransport(app)
            self.worlds[area.area_id] = world
            self.ubiservs[area.area_id] = ubi
            self.endpoints[area.area_id] = endpoint

        self.devices = {}
        self.placement_area = {}
        self.attach_area = {}
        for placement in script["fixtures"]["placements"]:
            usnd = placement["usnd_id"]
            world = self.worlds[placement["area_id"]]
            world.place(usnd, placement["x"], placement["y"], placement["heading"])
            if not placement["beacon_enabled"]:
                world.set_beacon(usnd, False)
            self.devices[usnd] = UsndDevice(usnd)
            self.placement_area[usnd] = placement["area_id"]

    def _sn_transport(self):
        if self.transport == "tcp":
            return HttpTransport(self._sn_url)
        return LocalTransport(self._sn_app)

    def world_of(self, usnd: str) -> World:
        return self.worlds[self.placement_area[usnd]]

    def close(self):
        for server in self.servers:
            server.stop()


def _execute_action(env: _Env, step: dict):
    """Run one acting step; returns (outcome_json, stored_result)."""
    action = step["action"]
    usnd = step.get("usnd_id")
    try:
        if action == "attach":
            device = env.devices[usnd]
            area_id = step["area_id"]
            device.attach(env.endpoints[area_id], env.world_of(usnd))
            env.attach_area[usnd] = area_id
            return {"area_id": area_id}, {"area_id": area_id}
        if action == "deregister":
            env.devices[usnd].detach()
            return {"ok": True}, {"ok": True}
        if action == "move":
            world = env.world_of(usnd)
            tick = world.step(
                [
                    {
                        "usnd_id": usnd,
                        "x": step["x"],
                        "y": step["y"],
                        "heading": step.get("heading", 0.0),
                    }
                ]
            )
            return {"tick": tick}, {"tick": tick}
        if action == "point":
            record = env.devices[usnd].point_and_request()
            return record.to_json(), record
        if action == "scan":
            neighbors = env.devices[usnd].scan()
            return {"neighbors": neighbors}, neighbors
        if action == "request":
            device = env.devices[usnd]
            area_id = env.attach_area.get(usnd, env.placement_area[usnd])
            client = UbiServClient(env.endpoints[area_id])
            payload = client.request_profile(
                device.session_token or "", step["target"]
            )
            return payload, payload
        if action == "set_policy":
            policy = {
                "user_id": step["user_id"],
                "context": step["context"],
                "allowed_fields": step["allowed_fields"],
            }
            env.sn_client.set_view_policy(step["user_id"], policy)
            return {"ok": True}, {"ok": True}
        if action in ("opt_out", "opt_in"):
            enabled = action == "opt_in"
            env.devices[usnd].set_service(enabled)
            env.world_of(usnd).set_beacon(usnd, enabled)
            return {"ok": True, "enabled": enabled}, {"ok": True}
        raise UsnError("InternalError", f"unhandled action {action}")
    except UsnError as exc:
        return {"error": exc.code}, exc


def _actor(step: dict) -> str:
    if "usnd_id" in step:
        return step["usnd_id"]
    if "user_id" in step:
        return step["user_id"]
    return "harness"


def _describe(result) -> str:
    if isinstance(result, UsnError):
        return f"error {result.code}"
    if isinstance(result, DisplayRecord):
        return "display record"
    if isinstance(result, list):
        return f"list of {len(result)}"
    return "payload"


def _check_assert(step: dict, results: dict):
    """Evaluate one assert step; returns (passed, detail)."""
    target = results.get(step["step"])
    problems = []

    if "outcome" in step:
        want_error = step["outcome"] == "error"
        if isinstance(target, UsnError) != want_error:
            problems.append(f"expected {step['outcome']}, got {_describe(target)}")
    if "error" in step:
        if not isinstance(target, UsnError) or target.code != step["error"]:
            problems.append(f"expected error {step['error']}, got {_describe(target)}")
    if "display_labels" in step:
        if isinstance(target, DisplayRecord):
            labels = [label for label, _ in target.lines]
            if labels != step["display_labels"]:
                problems.append(f"labels {labels} != {step['display_labels']}")
        else:
            problems.append(f"expected display record, got {_describe(target)}")
    if "display_lines" in step:
        if isinstance(target, DisplayRecord):
            lines = [[label, value] for label, value in target.lines]
            if lines != step["display_lines"]:
                problems.append(f"lines {lines} != {step['display_lines']}")
        else:
            problems.append(f"expected display record, got {_describe(target)}")
    if "target_user_id" in step:
        got = None
        if isinstance(target, DisplayRecord):
            got = target.target_user_id
        elif isinstance(target, dict):
            got = target.get("user_id")
        if got != step["target_user_id"]:
            problems.append(f"user {got} != {step['target_user_id']}")
    if "neighbors" in step:
        if not isinstance(target, list) or target != step["neighbors"]:
            problems.append(f"neighbors {target} != {step['neighbors']}")
    if "contains" in step:
        items = target if isinstance(target, list) else []
        for wanted in step["contains"]:
            if wanted not in items:
                problems.append(f"{wanted} missing")
    if "excludes" in step:
        items = target if isinstance(target, list) else []
        for unwanted in step["excludes"]:
            if unwanted in items:
                problems.append(f"{unwanted} present")

    return (not problems, "; ".join(problems))


@dataclass
class ScenarioResult:
    name: str
    seed: int
    transport: str
    passed: bool
    asserts_total: int
    asserts_failed: int
    steps: int
    transcript_lines: list

    @property
    def transcript_text(self) -> str:
        return "\n".join(self.transcript_lines) + "\n"

    @property
    def transcript_hash(self) -> str:
        return hashlib.sha256(self.transcript_text.encode("utf-8")).hexdigest()

    def write_transcript(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.transcript_text)


def run_script(script: dict, seed: int | None = None) -> ScenarioResult:
    """Execute an already-validated scenario document."""
    script = validate_script(script)
    if seed is not None:
        script["seed"] = seed

    try:
        env = _Env(script)
    except UsnError as exc:
        raise UsnError("ServiceBootFailure", f"{exc.code}: {exc.message}") from None

    lines = [
        canonical_json(
            {
                "scenario": script["name"],
                "seed": script["seed"],
                "transport": script["transport"],
            }
        )
    ]
    results = {}
    asserts_total = 0
    asserts_failed = 0
    try:
        for index, step in enumerate(script["steps"]):
            action = step["action"]
            if action == "assert":
                asserts_total += 1
                passed, detail = _check_assert(step, results)
                if not passed:
                    asserts_failed += 1
                outcome = {"step": step["step"], "pass": passed}
                if detail:
                    outcome["detail"] = detail
                stored = outcome
            elif action == "parallel":
                subs = step["steps"]
                slots = [None] * len(subs)

                def runner(i, sub):
                    slots[i] = _execute_action(env, sub)

                threads = [
                    threading.Thread(target=runner, args=(i, sub))
                    for i, sub in enumerate(subs)
                ]
                for thread in threads:
                    thread.start()
                for thread in threads:
                    thread.join()
                sub_outcomes = []
                stored = []
                for sub, slot in zip(subs, slots):
                    sub_outcome, sub_result = slot
                    sub_outcomes.append(sub_outcome)
                    stored.append(sub_result)
                    if sub.get("id"):
                        results[sub["id"]] = sub_result
                outcome = {"results": sub_outcomes}
            else:
                outcome, stored = _execute_action(env, step)
            if step.get("id"):
                results[step["id"]] = stored
            lines.append(
                canonical_json(
                    {
                        "tick": index,
                        "actor": _actor(step),
                        "action": action,
                        "outcome": outcome,
                    }
                )
            )
    finally:
        env.close()

    passed = asserts_failed == 0
    lines.append(
        canonical_json(
            {
                "verdict": "pass" if passed else "fail",
                "asserts": asserts_total,
                "failed": asserts_failed,
                "steps": len(script["steps"]),
            }
        )
    )
    return ScenarioResult(
        name=script["name"],
        seed=script["seed"],
        transport=script["transport"],
        passed=passed,
        asserts_total=asserts_total,
        asserts_failed=asserts_failed,
        steps=len(script["steps"]),
        transcript_lines=lines,
    )


def run_scenario(
    script_path: str, transcript_path: str | None = None, seed: int | None = None
) -> ScenarioResult:
    script = load_script(script_path)
    result = run_script(script, seed=seed)
    if transcript_path:
        result.write_transcript(transcript_path)
    return result
