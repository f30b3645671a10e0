"""Deterministic 2D event floor: positions, headings, and discovery.

Devices are points inside a bounded rectangle. Discovery is an
omnidirectional beacon with an inclusive range cutoff; aiming is a
directional cone around the device heading, resolving to the nearest
candidate. All mutation goes through place/set_beacon/step under one lock,
and step applies its whole move list atomically or not at all.

A uniform grid (cell size = discovery range) accelerates range queries.
The grid is an optimization only; tests pin behavior to a brute-force
scan, so query results must never depend on it.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

from .core import ServiceArea, canonical_json, parse_usnd_id
from .errors import UsnError
from .webapi import JsonApp

TWO_PI = 2.0 * math.pi

DEFAULT_DISCOVERY_RANGE_M = 4.5
DEFAULT_CONE_HALF_ANGLE_RAD = math.pi / 6.0


def normalize_heading(heading: float) -> float:
    h = math.fmod(float(heading), TWO_PI)
    if h < 0.0:
        h += TWO_PI
    if h >= TWO_PI:
        h -= TWO_PI
    return h + 0.0  # fold -0.0 into 0.0 for byte-stable snapshots


@dataclass(frozen=True)
class DevicePose:
    usnd_id: str
    x: float
    y: float
    heading: float
    beacon_enabled: bool = True


def _num(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise UsnError("BadRequest", f"{name} must be a number")
    result = float(value)
    if not math.isfinite(result):
        raise UsnError("BadRequest", f"{name} must be finite")
    return result


class World:
    """Single-writer floor state with concurrent read access."""

    def __init__(
        self,
        area: ServiceArea,
        discovery_range_m: float = DEFAULT_DISCOVERY_RANGE_M,
        cone_half_angle_rad: float = DEFAULT_CONE_HALF_ANGLE_RAD,
    ):
        if discovery_range_m <= 0:
            raise UsnError("ConfigError", "discovery_range_m must be positive")
        if not 0 < cone_half_angle_rad < math.pi / 2:
            raise UsnError("ConfigError", "cone_half_angle_rad must be in (0, pi/2)")
        self.area = area
        self.discovery_range_m = float(discovery_range_m)
        self.cone_half_angle_rad = float(cone_half_angle_rad)
        self._poses: dict[str, DevicePose] = {}
        self._tick = 0
        self._lock = threading.RLock()
        self._grid: dict[tuple, list] = {}
        self._grid_dirty = True

    @classmethod
    def from_config(cls, config: dict) -> "World":
        area_cfg = config.get("area")
        if not isinstance(area_cfg, dict):
            raise UsnError("ConfigError", "world config needs an 'area' object")
        try:
            area = ServiceArea(
                area_id=area_cfg["area_id"],
                name=area_cfg.get("name", area_cfg["area_id"]),
                min_x=float(area_cfg["min_x"]),
                min_y=float(area_cfg["min_y"]),
                max_x=float(area_cfg["max_x"]),
                max_y=float(area_cfg["max_y"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise UsnError("ConfigError", f"bad area: {exc}") from None
        return cls(
            area,
            discovery_range_m=config.get("discovery_range_m", DEFAULT_DISCOVERY_RANGE_M),
            cone_half_angle_rad=config.get(
                "cone_half_angle_rad", DEFAULT_CONE_HALF_ANGLE_RAD
            ),
        )

    @property
    def tick(self) -> int:
        with self._lock:
            return self._tick

    def __len__(self):
        with self._lock:
            return len(self._poses)

    # -- mutation ------------------------------------------------------

    def place(self, usnd_raw, x, y, heading=0.0) -> None:
        usnd = parse_usnd_id(usnd_raw)
        px, py = _num(x, "x"), _num(y, "y")
        hd = normalize_heading(_num(heading, "heading"))
        if not self.area.contains(px, py):
            raise UsnError("OutOfBounds", f"({px}, {py}) outside {self.area.area_id}")
        with self._lock:
            self._poses[usnd.value] = DevicePose(usnd.value, px, py, hd, True)
            self._grid_dirty = True

    def set_beacon(self, usnd_raw, enabled: bool) -> None:
        usnd = parse_usnd_id(usnd_raw)
        with self._lock:
            pose = self._poses.get(usnd.value)
            if pose is None:
                raise UsnError("UnknownDevice", usnd.value)
            self._poses[usnd.value] = DevicePose(
                pose.usnd_id, pose.x, pose.y, pose.heading, bool(enabled)
            )

    def step(self, moves) -> int:
        """Apply every move or none; returns the new tick."""
        staged = []
        for move in moves:
            if isinstance(move, dict):
                usnd_raw = move.get("usnd_id")
                x, y = move.get("x"), move.get("y")
                heading = move.get("heading")
            else:
                usnd_raw, x, y, heading = move
            usnd = parse_usnd_id(usnd_raw)
            px, py = _num(x, "x"), _num(y, "y")
            hd = normalize_heading(_num(heading, "heading"))
            staged.append((usnd.value, px, py, hd))
        with self._lock:
            for usnd_value, px, py, _ in staged:
                pose = self._poses.get(usnd_value)
                if pose is None:
                    raise UsnError("UnknownDevice", usnd_value)
                if not self.area.contains(px, py):
                    raise UsnError(
                        "OutOfBounds", f"({px}, {py}) outside {self.area.area_id}"
                    )
            for usnd_value, px, py, hd in staged:
                pose = self._poses[usnd_value]
                self._poses[usnd_value] = DevicePose(
                    usnd_value, px, py, hd, pose.beacon_enabled
                )
            self._tick += 1
            if staged:
                self._grid_dirty = True
            return self._tick

    # -- grid ------------------------------------------------------------

    def _cell(self, x: float, y: float) -> tuple:
        size = self.discovery_range_m
        return (math.floor(x / size), math.floor(y / size))

    def _rebuild_grid(self):
        self._grid = {}
        for pose in self._poses.values():
            self._grid.setdefault(self._cell(pose.x, pose.y), []).append(pose.usnd_id)
        self._grid_dirty = False

    def _candidates_near(self, x: float, y: float):
        """Ids in the 3x3 cell block around (x, y); superset of range hits."""
        if self._grid_dirty:
            self._rebuild_grid()
        cx, cy = self._cell(x, y)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                yield from self._grid.get((cx + dx, cy + dy), ())

    # -- queries -----------------------------------------------------------

    def _require_pose(self, usnd_raw) -> DevicePose:
        usnd = parse_usnd_id(usnd_raw)
        pose = self._poses.get(usnd.value)
        if pose is None:
            raise UsnError("UnknownDevice", usnd.value)
        return pose

    def neighbors(self, usnd_raw) -> list:
        """Beacon-enabled ids within range, nearest first, ties by id."""
        with self._lock:
            pose = self._require_pose(usnd_raw)
            hits = []
            for other_id in self._candidates_near(pose.x, pose.y):
                if other_id == pose.usnd_id:
                    continue
                other = self._poses[other_id]
                if not other.beacon_enabled:
                    continue
                dist = math.hypot(other.x - pose.x, other.y - pose.y)
                if dist <= self.discovery_range_m:
                    hits.append((dist, other_id))
            hits.sort()
            return [other_id for _, other_id in hits]

    def resolve_pointing(self, usnd_raw) -> str:
        """Nearest beacon-enabled id within range and inside the aim cone."""
        with self._lock:
            pose = self._require_pose(usnd_raw)
            best = None
            for other_id in self._candidates_near(pose.x, pose.y):
                if other_id == pose.usnd_id:
                    continue
                other = self._poses[other_id]
                if not other.beacon_enabled:
                    continue
                dist = math.hypot(other.x - pose.x, other.y - pose.y)
                if dist > self.discovery_range_m:
                    continue
                bearing = math.atan2(other.y - pose.y, other.x - pose.x)
                deviation = abs(math.remainder(bearing - pose.heading, TWO_PI))
                if deviation > self.cone_half_angle_rad:
                    continue
                key = (dist, other_id)
                if best is None or key < best:
                    best = key
            if best is None:
                raise UsnError("NoTarget")
            return best[1]

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "area": {
                    "area_id": self.area.area_id,
                    "name": self.area.name,
                    "min_x": self.area.min_x,
                    "min_y": self.area.min_y,
                    "max_x": self.area.max_x,
                    "max_y": self.area.max_y,
                },
                "tick": self._tick,
                "discovery_range_m": self.discovery_range_m,
                "cone_half_angle_rad": self.cone_half_angle_rad,
                "poses": [
                    {
                        "usnd_id": pose.usnd_id,
                        "x": pose.x,
                        "y": pose.y,
                        "heading": pose.heading,
                        "beacon_enabled": pose.beacon_enabled,
                    }
                    for _, pose in sorted(self._poses.items())
                ],
            }

    def snapshot_json(self) -> str:
        return canonical_json(self.snapshot())


def build_world_app(world: World) -> JsonApp:
    app = JsonApp("world")

    @app.route("GET", "/world")
    def get_world(req):
        return world.snapshot()

    @app.route("POST", "/world/place")
    def place(req):
        body = req.body
        world.place(
            body.get("usnd_id"),
            body.get("x"),
            body.get("y"),
            body.get("heading", 0.0),
        )
        return {"ok": True}

    @app.route("POST", "/world/beacon")
    def beacon(req):
        body = req.body
        if not isinstance(body.get("enabled"), bool):
            raise UsnError("BadRequest", "enabled must be a boolean")
        world.set_beacon(body.get("usnd_id"), body["enabled"])
        return {"ok": True}

    @app.route("POST", "/world/step")
    def step(req):
        moves = req.body.get("moves", [])
        if not isinstance(moves, list):
            raise UsnError("BadRequest", "moves must be a list")
        return {"tick": world.step(moves)}

    @app.route("GET", "/health")
    def health(req):
        return {"status": "ok", "component": "world"}

    return app
