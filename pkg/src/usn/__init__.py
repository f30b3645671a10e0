"""Proximity-scoped social profile sharing: services, device emulator, harness."""

from .core import (
    FIELD_ORDER,
    PolicyContext,
    ProfileField,
    ServedProfile,
    ServiceArea,
    UserProfile,
    UsndId,
    ViewPolicy,
    evaluate_permissions,
    parse_usnd_id,
)
from .device import FIELD_LABELS, DisplayRecord, UsndDevice, render
from .errors import TransportError, UsnError
from .scenario import ScenarioResult, load_script, run_scenario, run_script
from .socialnet import SocialNetwork, SocialNetworkClient, build_sn_app
from .ubiserv import UbiServ, UbiServClient, build_ubiserv_app
from .webapi import HttpTransport, JsonApp, LocalTransport, start_server
from .world import World, build_world_app

__version__ = "0.1.0"

__all__ = [
    "FIELD_LABELS",
    "FIELD_ORDER",
    "DisplayRecord",
    "HttpTransport",
    "JsonApp",
    "LocalTransport",
    "PolicyContext",
    "ProfileField",
    "ScenarioResult",
    "ServedProfile",
    "ServiceArea",
    "SocialNetwork",
    "SocialNetworkClient",
    "TransportError",
    "UbiServ",
    "UbiServClient",
    "UserProfile",
    "UsnError",
    "UsndDevice",
    "UsndId",
    "ViewPolicy",
    "World",
    "build_sn_app",
    "build_ubiserv_app",
    "build_world_app",
    "evaluate_permissions",
    "load_script",
    "parse_usnd_id",
    "render",
    "run_scenario",
    "run_script",
    "start_server",
    "__version__",
]
