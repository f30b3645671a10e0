"""Shared domain types, identifier validation, and permission evaluation.

Every other module builds on the types here. All of them are immutable
values: safe to hand between concurrent request handlers without locking.

Canonical serialization is UTF-8 JSON with lower_snake field names; sets of
profile fields serialize as sorted arrays so golden files are byte-stable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Union

from .errors import UsnError

USND_ID_RE = re.compile(r"^USND-[0-9A-F]{8}$")
USER_ID_RE = re.compile(r"^[A-Za-z0-9_]{1,64}$")

# Per-value size cap for profile content, in UTF-8 bytes.
MAX_FIELD_VALUE_BYTES = 4096


class ProfileField(Enum):
    """Closed set of fields a profile can carry.

    Declaration order is the canonical display order (name always first).
    The serialized names below are the wire contract.
    """

    NAME = "name"
    LOCATION = "location"
    WORK_DOMAIN = "work_domain"
    CONTACT_INFO = "contact_info"
    QUALIFICATIONS = "qualifications"
    EXPERIENCE = "experience"
    JOB_INTEREST = "job_interest"
    PICTURES = "pictures"

    @classmethod
    def from_name(cls, name: str) -> "ProfileField":
        try:
            return cls(name)
        except ValueError:
            raise UsnError("InvalidField", f"unknown profile field {name!r}") from None


FIELD_ORDER = tuple(ProfileField)

# A field value is a string, except pictures, which carries opaque asset ids.
FieldValue = Union[str, tuple]


class PolicyContext(Enum):
    PUBLIC = "public"
    UBISERV_EVENT = "ubiserv_event"

    @classmethod
    def from_name(cls, name: str) -> "PolicyContext":
        try:
            return cls(name)
        except ValueError:
            raise UsnError("InvalidPolicy", f"unknown context {name!r}") from None


@dataclass(frozen=True)
class UsndId:
    """Validated device identifier: ``USND-`` plus 8 uppercase hex digits."""

    value: str

    def __str__(self) -> str:
        return self.value


def parse_usnd_id(raw: str) -> UsndId:
    """Parse a device id, rejecting anything outside the exact grammar."""
    if not isinstance(raw, str) or not USND_ID_RE.match(raw):
        raise UsnError("MalformedId", f"not a valid device id: {raw!r}")
    return UsndId(raw)


def require_usnd_id(raw: str) -> str:
    """Validate and return the id string itself (common at API boundaries)."""
    return parse_usnd_id(raw).value


def require_user_id(raw: str) -> str:
    if not isinstance(raw, str) or not USER_ID_RE.match(raw):
        raise UsnError("InvalidProfile", f"not a valid user id: {raw!r}")
    return raw


def _check_value_size(field: ProfileField, text: str) -> None:
    if len(text.encode("utf-8")) > MAX_FIELD_VALUE_BYTES:
        raise UsnError(
            "InvalidProfile",
            f"value for {field.value} exceeds {MAX_FIELD_VALUE_BYTES} bytes",
        )


def _normalize_field_value(field: ProfileField, value) -> FieldValue:
    if field is ProfileField.PICTURES:
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, str) for v in value
        ):
            raise UsnError("InvalidProfile", "pictures must be a list of asset ids")
        for v in value:
            _check_value_size(field, v)
        return tuple(value)
    if not isinstance(value, str):
        raise UsnError("InvalidProfile", f"value for {field.value} must be a string")
    _check_value_size(field, value)
    return value


def _normalize_fields(raw: Mapping) -> Mapping[ProfileField, FieldValue]:
    fields = {}
    for key, value in raw.items():
        field = key if isinstance(key, ProfileField) else ProfileField.from_name(key)
        fields[field] = _normalize_field_value(field, value)
    return MappingProxyType(fields)


@dataclass(frozen=True)
class UserProfile:
    """A full stored profile: the social identity, its device, and its data.

    The name field is mandatory; no value may exceed 4096 bytes.
    """

    user_id: str
    usnd_id: str
    fields: Mapping[ProfileField, FieldValue]

    def __post_init__(self):
        object.__setattr__(self, "user_id", require_user_id(self.user_id))
        object.__setattr__(self, "usnd_id", require_usnd_id(self.usnd_id))
        object.__setattr__(self, "fields", _normalize_fields(self.fields))
        if ProfileField.NAME not in self.fields:
            raise UsnError("InvalidProfile", "profile must carry a name")


@dataclass(frozen=True)
class ViewPolicy:
    """Which profile fields one user exposes in one context."""

    user_id: str
    context: PolicyContext
    allowed_fields: frozenset

    def __post_init__(self):
        object.__setattr__(self, "user_id", require_user_id(self.user_id))
        if not isinstance(self.context, PolicyContext):
            raise UsnError("InvalidPolicy", "context must be a PolicyContext")
        fields = frozenset(self.allowed_fields)
        if not all(isinstance(f, ProfileField) for f in fields):
            raise UsnError("InvalidPolicy", "allowed_fields must be profile fields")
        object.__setattr__(self, "allowed_fields", fields)


@dataclass(frozen=True)
class ServedProfile:
    """The field-filtered view actually delivered to a requesting device."""

    user_id: str
    fields: Mapping[ProfileField, FieldValue]

    def __post_init__(self):
        object.__setattr__(self, "user_id", require_user_id(self.user_id))
        object.__setattr__(self, "fields", _normalize_fields(self.fields))


def evaluate_permissions(profile: UserProfile, policy: ViewPolicy) -> ServedProfile:
    """Restrict a profile to the fields its event policy allows.

    Fields the policy allows but the profile does not carry are silently
    omitted, so a requester cannot distinguish denied from absent.
    """
    if policy.user_id != profile.user_id:
        raise UsnError(
            "PolicyMismatch",
            f"policy is for {policy.user_id}, profile is {profile.user_id}",
        )
    if policy.context is not PolicyContext.UBISERV_EVENT:
        raise UsnError("WrongContext", "only event-context policies apply here")
    served = {
        field: value
        for field, value in profile.fields.items()
        if field in policy.allowed_fields
    }
    return ServedProfile(user_id=profile.user_id, fields=served)


@dataclass(frozen=True)
class ServiceArea:
    """Physical coverage zone of one event, served by exactly one server."""

    area_id: str
    name: str
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not self.area_id:
            raise UsnError("InvalidProfile", "area_id must be non-empty")
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise UsnError("OutOfBounds", "area bounds must have positive extent")

    def contains(self, x: float, y: float) -> bool:
        # Closed rectangle: corners and edges count as inside.
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y


# ---------------------------------------------------------------------------
# JSON codecs
# ---------------------------------------------------------------------------


def canonical_json(data) -> str:
    """Byte-stable JSON: sorted keys, no whitespace, raw unicode."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fields_to_json(fields: Mapping[ProfileField, FieldValue]) -> dict:
    return {
        f.value: (list(v) if isinstance(v, tuple) else v) for f, v in fields.items()
    }


def fields_from_json(raw: Mapping) -> Mapping[ProfileField, FieldValue]:
    if not isinstance(raw, Mapping):
        raise UsnError("InvalidProfile", "fields must be an object")
    return _normalize_fields(raw)


def profile_to_json(profile: UserProfile) -> dict:
    return {
        "user_id": profile.user_id,
        "usnd_id": profile.usnd_id,
        "fields": fields_to_json(profile.fields),
    }


def profile_from_json(raw: Mapping) -> UserProfile:
    if not isinstance(raw, Mapping):
        raise UsnError("InvalidProfile", "profile must be an object")
    return UserProfile(
        user_id=raw.get("user_id", ""),
        usnd_id=raw.get("usnd_id", ""),
        fields=fields_from_json(raw.get("fields", {})),
    )


def policy_to_json(policy: ViewPolicy) -> dict:
    return {
        "user_id": policy.user_id,
        "context": policy.context.value,
        "allowed_fields": sorted(f.value for f in policy.allowed_fields),
    }


def policy_from_json(raw: Mapping) -> ViewPolicy:
    if not isinstance(raw, Mapping):
        raise UsnError("InvalidPolicy", "policy must be an object")
    allowed = raw.get("allowed_fields")
    if not isinstance(allowed, (list, tuple)):
        raise UsnError("InvalidPolicy", "allowed_fields must be an array")
    return ViewPolicy(
        user_id=raw.get("user_id", ""),
        context=PolicyContext.from_name(raw.get("context", "")),
        allowed_fields=frozenset(ProfileField.from_name(n) for n in allowed),
    )


def served_to_json(served: ServedProfile) -> dict:
    return {"user_id": served.user_id, "fields": fields_to_json(served.fields)}


def served_from_json(raw: Mapping) -> ServedProfile:
    if not isinstance(raw, Mapping):
        raise UsnError("InvalidProfile", "served profile must be an object")
    return ServedProfile(
        user_id=raw.get("user_id", ""), fields=fields_from_json(raw.get("fields", {}))
    )
