"""Standalone engine server process.

Subprocess-launched engines run this entry point. The orchestrator appends
`--port <n> --engine-name <s> --codec <text|binary>` to the configured
command line and mirrors the port in the NRPL_PORT environment variable;
engine type and any extra settings come from the configured arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import engines  # noqa: F401  (registers the built-in engine types)
from .engine import PORT_ENV_VAR, create_engine_script, serve_tcp
from .wire import Codec


def _port_from_env() -> int | None:
    raw = os.environ.get(PORT_ENV_VAR, "")
    try:
        return int(raw) or None
    except ValueError:
        return None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lockstep-engine",
        description="Serve one simulation engine over a TCP port.",
    )
    parser.add_argument("--engine-type", required=True,
                        help="registered engine type, e.g. vehicle_sim")
    parser.add_argument("--engine-name", required=True)
    parser.add_argument("--port", type=int, default=_port_from_env(),
                        help=f"TCP port to listen on (default: ${PORT_ENV_VAR})")
    parser.add_argument("--codec", choices=["text", "binary"], default="binary")
    parser.add_argument("--extra", default="{}",
                        help="engine settings as a JSON object")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    if args.port is None:
        parser.error(f"--port is required (or set ${PORT_ENV_VAR})")
    try:
        extra = json.loads(args.extra)
    except json.JSONDecodeError as exc:
        parser.error(f"--extra is not valid JSON: {exc}")
    if not isinstance(extra, dict):
        parser.error("--extra must be a JSON object")

    try:
        script = create_engine_script(args.engine_type, args.engine_name, extra)
        serve_tcp(script, args.port, Codec.from_name(args.codec))
    except Exception as exc:
        print(f"lockstep-engine: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
