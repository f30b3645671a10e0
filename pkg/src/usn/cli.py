"""Command line entry point.

Subcommands: ``serve`` boots one service from a JSON config and prints a
single ``READY <component> <port>`` line once it is listening; ``seed``
pushes a fixture file to a running social network; ``run`` executes a
scenario script and writes its transcript; ``world-dump`` prints a floor
snapshot. Exit codes: 0 success, 1 assertion failure, 2 config error,
3 environment error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .core import canonical_json
from .errors import TransportError, UsnError
from .fixtures import load_fixtures, seed_social_network
from .scenario import run_scenario
from .socialnet import (
    DEFAULT_TOKEN_TTL,
    SocialNetwork,
    SocialNetworkClient,
    build_sn_app,
)
from .ubiserv import build_ubiserv_app, ubiserv_from_config
from .webapi import AppServer, HttpTransport
from .world import World, build_world_app

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_CONFIG = 2
EXIT_ENVIRONMENT = 3

_CONFIG_CODES = {"ConfigError", "ScriptParseError", "FixtureParseError", "BadRequest"}


def _setup_logging():
    level_name = os.environ.get("USN_LOG", "").lower()
    level = {"debug": logging.DEBUG, "info": logging.INFO}.get(
        level_name, logging.WARNING
    )
    logging.basicConfig(
        level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s"
    )


def _load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsnError("ConfigError", f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise UsnError("ConfigError", f"{path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsnError("ConfigError", f"{path}: top level must be an object")
    return data


def _build_component(component: str, config: dict):
    if component == "sn":
        sn = SocialNetwork(
            store_path=config.get("store_path"),
            token_ttl=config.get("token_ttl_seconds", DEFAULT_TOKEN_TTL),
        )
        return build_sn_app(sn)
    if component == "ubiserv":
        return build_ubiserv_app(ubiserv_from_config(config))
    if component == "world":
        return build_world_app(World.from_config(config))
    raise UsnError("ConfigError", f"unknown component {component}")


def _cmd_serve(args) -> int:
    config = _load_config(args.config)
    app = _build_component(args.component, config)
    port = config.get("port", 0)
    if isinstance(port, bool) or not isinstance(port, int) or port < 0:
        raise UsnError("ConfigError", "port must be a non-negative integer")
    host = config.get("host", "127.0.0.1")
    server = AppServer(app, host=host, port=port)
    print(f"READY {args.component} {server.port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def _cmd_seed(args) -> int:
    fixtures = load_fixtures(args.fixtures)
    client = SocialNetworkClient(HttpTransport(args.sn))
    count = seed_social_network(client, fixtures)
    print(count)
    return EXIT_OK


def _default_transcript_path(scenario_path: str) -> str:
    stem = os.path.splitext(os.path.basename(scenario_path))[0]
    return f"{stem}.transcript.jsonl"


def _cmd_run(args) -> int:
    transcript_path = args.transcript or _default_transcript_path(args.scenario)
    result = run_scenario(args.scenario, transcript_path=transcript_path, seed=args.seed)
    print(f"TRANSCRIPT {transcript_path}")
    if result.passed:
        print(f"PASS {result.name} asserts={result.asserts_total}")
        return EXIT_OK
    print(
        f"FAIL {result.name} failed={result.asserts_failed}/{result.asserts_total}",
        file=sys.stderr,
    )
    return EXIT_ASSERTION


def _cmd_world_dump(args) -> int:
    snapshot = HttpTransport(args.world).request("GET", "/world")
    print(canonical_json(snapshot))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usn", description="Proximity social discovery services and harness."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run one service until interrupted")
    serve.add_argument("component", choices=["sn", "ubiserv", "world"])
    serve.add_argument("--config", required=True)
    serve.set_defaults(func=_cmd_serve)

    seed = sub.add_parser("seed", help="push fixture accounts to a social network")
    seed.add_argument("--sn", required=True, help="social network base URL")
    seed.add_argument("--fixtures", required=True)
    seed.set_defaults(func=_cmd_seed)

    run = sub.add_parser("run", help="execute a scenario script")
    run.add_argument("scenario")
    run.add_argument("--transcript", default=None)
    run.add_argument("--seed", type=int, default=None)
    run.set_defaults(func=_cmd_run)

    dump = sub.add_parser("world-dump", help="print a world snapshot")
    dump.add_argument("--world", required=True, help="world base URL")
    dump.set_defaults(func=_cmd_world_dump)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsnError as exc:
        print(f"ERROR {exc.code}: {exc.message}", file=sys.stderr)
        if exc.code in _CONFIG_CODES:
            return EXIT_CONFIG
        return EXIT_ENVIRONMENT
    except TransportError as exc:
        print(f"ERROR UpstreamUnavailable: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT


if __name__ == "__main__":
    sys.exit(main())
