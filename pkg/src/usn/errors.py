"""Error codes shared by every service and client in the stack.

Failures cross process boundaries as ``{"error": "<code>"}`` JSON bodies.
The code strings are the wire contract; clients re-raise them unmodified so
the code seen at a device equals the code emitted by the failing layer.
"""

from __future__ import annotations


class UsnError(Exception):
    """Operation failure carrying a stable wire-level error code."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(message or code)
        self.code = code
        self.message = message or code


class TransportError(Exception):
    """A peer service could not be reached at all (connection-level failure).

    Deliberately not a UsnError: the caller decides which wire code the
    unreachable peer maps to (UpstreamUnavailable, UbiServUnreachable, ...).
    """


# HTTP status for each wire code; anything unlisted is a 400.
_HTTP_STATUS = {
    "MalformedId": 400,
    "InvalidProfile": 400,
    "InvalidPolicy": 400,
    "InvalidField": 400,
    "PolicyMismatch": 400,
    "WrongContext": 400,
    "BadRequest": 400,
    "OutOfBounds": 400,
    "InvalidToken": 401,
    "ExpiredToken": 401,
    "BadSecret": 401,
    "UnknownSession": 401,
    "ServiceDisabled": 403,
    "UnknownUser": 404,
    "UnknownDevice": 404,
    "UnknownUbiServ": 404,
    "TargetNotPresent": 404,
    "NoTarget": 404,
    "NotFound": 404,
    "DuplicateUbiServ": 409,
    "DeviceAlreadyBound": 409,
    "UpstreamUnavailable": 502,
    "InternalError": 500,
}


def status_for(code: str) -> int:
    return _HTTP_STATUS.get(code, 400)
