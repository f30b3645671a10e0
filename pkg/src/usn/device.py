"""Device emulator: registration, discovery, aiming, and display.

A device owns one hardware id. It attaches to the area server for a
session, scans the floor for peers, and turns a served profile into a
display record with one labeled line per field. The device keeps no
profile cache of its own, so every aim-and-request hits the area server
fresh, and any error code from a lower layer surfaces unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    FIELD_ORDER,
    ProfileField,
    ServedProfile,
    parse_usnd_id,
    served_from_json,
)
from .errors import UsnError
from .ubiserv import UbiServClient
from .webapi import HttpTransport, LocalTransport

FIELD_LABELS = {
    ProfileField.NAME: "Name",
    ProfileField.LOCATION: "Location",
    ProfileField.WORK_DOMAIN: "Work domain",
    ProfileField.CONTACT_INFO: "Contact",
    ProfileField.QUALIFICATIONS: "Qualifications",
    ProfileField.EXPERIENCE: "Experience",
    ProfileField.JOB_INTEREST: "Job interest",
    ProfileField.PICTURES: "Pictures",
}


@dataclass(frozen=True)
class DisplayRecord:
    target_user_id: str
    lines: tuple  # ((label, value), ...) in canonical field order

    def to_json(self) -> dict:
        return {
            "target_user_id": self.target_user_id,
            "lines": [[label, value] for label, value in self.lines],
        }


def render(served) -> DisplayRecord:
    """Pure mapping from a served profile to display lines.

    Accepts a ServedProfile or its JSON dict form. Fields appear in
    canonical order; absent fields produce no line.
    """
    if not isinstance(served, ServedProfile):
        served = served_from_json(served)
    lines = []
    for field in FIELD_ORDER:
        if field not in served.fields:
            continue
        value = served.fields[field]
        if field is ProfileField.PICTURES:
            value = ", ".join(value)
        lines.append((FIELD_LABELS[field], value))
    return DisplayRecord(target_user_id=served.user_id, lines=tuple(lines))


def _as_ubiserv_client(endpoint) -> UbiServClient:
    if isinstance(endpoint, UbiServClient):
        return endpoint
    if isinstance(endpoint, str):
        return UbiServClient(HttpTransport(endpoint))
    if hasattr(endpoint, "request"):
        return UbiServClient(endpoint)
    if hasattr(endpoint, "dispatch"):
        return UbiServClient(LocalTransport(endpoint))
    raise UsnError("ConfigError", f"not a ubiserv endpoint: {endpoint!r}")


class UsndDevice:
    """One emulated handheld. Single-threaded from the caller's side."""

    def __init__(self, usnd_id: str):
        self.usnd_id = parse_usnd_id(usnd_id).value
        self.session_token = None
        self.area_id = None
        self.last_display = None
        self._ubiserv = None
        self._world = None

    @property
    def attached(self) -> bool:
        return self.session_token is not None

    def attach(self, ubiserv_endpoint, world) -> dict:
        """Register with an area server; on success the session is live.

        Failure leaves prior state untouched, so a device attached to a
        dead server keeps its old session.
        """
        client = _as_ubiserv_client(ubiserv_endpoint)
        reply = client.register(self.usnd_id)
        self._ubiserv = client
        self._world = world
        self.session_token = reply["session_token"]
        self.area_id = reply["area_id"]
        return reply

    def detach(self) -> None:
        self._require_attached()
        try:
            self._ubiserv.deregister(self.session_token)
        finally:
            self.session_token = None
            self.area_id = None

    def set_service(self, enabled: bool) -> None:
        self._require_attached()
        self._ubiserv.set_service(self.session_token, enabled)

    def _require_attached(self):
        if self.session_token is None:
            raise UsnError("NotAttached")

    def scan(self) -> list:
        """Peer ids in discovery range, nearest first."""
        self._require_attached()
        return self._world.neighbors(self.usnd_id)

    def point_and_request(self) -> DisplayRecord:
        """Aim, resolve the target, fetch its view, render it."""
        self._require_attached()
        target = self._world.resolve_pointing(self.usnd_id)
        reply = self._ubiserv.request_profile(self.session_token, target)
        record = render(reply)
        self.last_display = record
        return record
