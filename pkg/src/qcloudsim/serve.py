"""Newline-delimited JSON protocol exposing the environment over stdio or TCP.

One object per line. Commands: handshake, reset, step, close. Failures of
a command are answered in-band as {"error": name, "detail": text} and the
session continues; only close (or EOF) ends it. Each TCP connection gets
its own independent environment instance.
"""

from __future__ import annotations

import json
import socketserver
import sys
from typing import Any, Callable

from .env import EpisodeOver, InvalidAction, QCloudEnv
from .workload import RoundOutOfRange

PROTOCOL_VERSION = 1


class ProtocolSession:
    """Drives one environment from a stream of JSON command lines."""

    def __init__(self, env: QCloudEnv) -> None:
        self.env = env
        self.closed = False

    def handle_line(self, line: str) -> dict[str, Any]:
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": "ProtocolError", "detail": f"bad JSON: {exc}"}
        if not isinstance(message, dict) or "cmd" not in message:
            return {"error": "ProtocolError", "detail": "expected an object with a 'cmd' field"}
        cmd = message["cmd"]
        handler = getattr(self, f"_cmd_{str(cmd).replace('-', '_')}", None)
        if handler is None:
            return {"error": "UnknownCommand", "detail": f"unknown cmd {cmd!r}"}
        try:
            return handler(message)
        except (InvalidAction, EpisodeOver, RoundOutOfRange, ValueError, TypeError) as exc:
            return {"error": type(exc).__name__, "detail": str(exc)}

    def _cmd_handshake(self, message: dict) -> dict:
        return {
            "obs_dim": self.env.obs_dim,
            "n_actions": self.env.n_actions,
            "protocol": PROTOCOL_VERSION,
            "normalize": self.env.config.normalize,
        }

    def _cmd_reset(self, message: dict) -> dict:
        obs = self.env.reset(seed=message.get("seed"), round=message.get("round"))
        return {"obs": obs.tolist()}

    def _cmd_step(self, message: dict) -> dict:
        if "action" not in message:
            return {"error": "InvalidAction", "detail": "step requires an 'action' field"}
        action = message["action"]
        if isinstance(action, bool) or not isinstance(action, int):
            return {"error": "InvalidAction", "detail": f"action must be an integer, got {action!r}"}
        result = self.env.step(action)
        return {
            "obs": result.observation.tolist(),
            "reward": result.reward,
            "terminated": result.terminated,
            "truncated": result.truncated,
            "info": result.info,
        }

    def _cmd_close(self, message: dict) -> dict:
        self.closed = True
        return {"ok": True}


def serve_stdio(env_factory: Callable[[], QCloudEnv]) -> None:
    """Serve one session over stdin/stdout; returns at close or EOF."""
    session = ProtocolSession(env_factory())
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        response = session.handle_line(line)
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
        if session.closed:
            break


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        session = ProtocolSession(self.server.env_factory())  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            response = session.handle_line(line)
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            if session.closed:
                break


class EnvServer(socketserver.ThreadingTCPServer):
    """TCP server; every connection runs an independent session."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], env_factory: Callable[[], QCloudEnv]) -> None:
        super().__init__(address, _SessionHandler)
        self.env_factory = env_factory


def serve_tcp(env_factory: Callable[[], QCloudEnv], host: str, port: int) -> None:
    with EnvServer((host, port), env_factory) as server:
        server.serve_forever()
