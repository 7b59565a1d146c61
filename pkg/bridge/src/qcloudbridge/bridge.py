"""Gymnasium-style environment backed by a protocol server.

The bridge never simulates anything itself: every reset/step is one JSON
line to the server and one line back. The default transport spawns the
server as a subprocess and talks over its stdio; the TCP transport
connects to an already-running server.
"""

from __future__ import annotations

import json
import select
import socket
import subprocess
import sys
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

try:  # pragma: no cover - exercised only where gymnasium is installed
    import gymnasium as _gym
    from gymnasium import spaces as _gym_spaces
except ImportError:
    _gym = None
    _gym_spaces = None

from . import spaces as _local_spaces

SUPPORTED_PROTOCOL = 1


class ProtocolError(Exception):
    """The server answered with something the protocol does not allow."""


class BridgeTimeout(Exception):
    """No reply within the configured timeout."""


@dataclass
class BridgeConfig:
    """Where the environment server lives and how to reach it.

    For the "stdio-subprocess" transport, `endpoint` is the server argv
    (e.g. ["qcloudsim", "serve-env", "--stdio", "--dataset", ...]); for
    "tcp" it is a "host:port" string.
    """

    endpoint: Sequence[str] | str
    transport: str = "stdio-subprocess"
    connect_timeout_s: float = 10.0
    protocol_version: int = 1


class _StdioTransport:
    def __init__(self, argv: Sequence[str], timeout_s: float) -> None:
        self.timeout_s = timeout_s
        self._proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=sys.stderr.fileno() if hasattr(sys.stderr, "fileno") else None,
            text=True,
            bufsize=1,
        )

    @property
    def pid(self) -> int:
        return self._proc.pid

    def request(self, message: dict) -> dict:
        if self._proc.poll() is not None:
            raise ProtocolError(f"server exited with code {self._proc.returncode}")
        self._proc.stdin.write(json.dumps(message) + "\n")
        self._proc.stdin.flush()
        ready, _, _ = select.select([self._proc.stdout], [], [], self.timeout_s)
        if not ready:
            raise BridgeTimeout(f"no reply within {self.timeout_s} s")
        line = self._proc.stdout.readline()
        if not line:
            raise ProtocolError("server closed its output stream")
        return json.loads(line)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.write(json.dumps({"cmd": "close"}) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError, ValueError):
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
        for stream in (self._proc.stdin, self._proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass


class _TcpTransport:
    def __init__(self, endpoint: str, timeout_s: float) -> None:
        host, _, port_text = endpoint.rpartition(":")
        if not host or not port_text.isdigit():
            raise ValueError(f"tcp endpoint must be HOST:PORT, got {endpoint!r}")
        self._sock = socket.create_connection((host, int(port_text)), timeout=timeout_s)
        self._sock.settimeout(timeout_s)
        self._fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self._open = True

    def request(self, message: dict) -> dict:
        self._fh.write(json.dumps(message) + "\n")
        self._fh.flush()
        try:
            line = self._fh.readline()
        except socket.timeout as exc:
            raise BridgeTimeout(str(exc)) from exc
        if not line:
            raise ProtocolError("server closed the connection")
        return json.loads(line)

    def close(self) -> None:
        if self._open:
            self._open = False
            try:
                self._fh.write(json.dumps({"cmd": "close"}) + "\n")
                self._fh.flush()
            except OSError:
                pass
            self._fh.close()
            self._sock.close()


class RemoteSchedulingEnv(_gym.Env if _gym else object):
    """Drives a remote task-placement environment through the wire protocol.

    Matches the Gymnasium Env API: reset(seed=..., options={"round": r}) ->
    (obs, info) and step(action) -> (obs, reward, terminated, truncated,
    info). When gymnasium is installed this is a real gym.Env subclass;
    otherwise the same interface is provided with lightweight spaces.
    """

    metadata = {"render_modes": []}

    def __init__(self, config: BridgeConfig) -> None:
        if config.protocol_version != SUPPORTED_PROTOCOL:
            raise ProtocolError(
                f"bridge supports protocol {SUPPORTED_PROTOCOL}, configured for {config.protocol_version}"
            )
        self.config = config
        if config.transport == "stdio-subprocess":
            self._transport = _StdioTransport(config.endpoint, config.connect_timeout_s)
        elif config.transport == "tcp":
            self._transport = _TcpTransport(config.endpoint, config.connect_timeout_s)
        else:
            raise ValueError(f"unknown transport {config.transport!r}")
        self._closed = False

        hello = self._call({"cmd": "handshake"})
        if hello.get("protocol") != config.protocol_version:
            self.close()
            raise ProtocolError(
                f"server speaks protocol {hello.get('protocol')!r}, expected {config.protocol_version}"
            )
        self.obs_dim = int(hello["obs_dim"])
        self.n_actions = int(hello["n_actions"])
        self.normalized = bool(hello.get("normalize", False))

        space_mod = _gym_spaces if _gym_spaces is not None else _local_spaces
        high = 1.0 if self.normalized else np.inf
        self.observation_space = space_mod.Box(
            low=0.0, high=high, shape=(self.obs_dim,), dtype=np.float64
        )
        self.action_space = space_mod.Discrete(self.n_actions)

    def _call(self, message: dict) -> dict:
        reply = self._transport.request(message)
        if not isinstance(reply, dict):
            raise ProtocolError(f"expected a JSON object, got {reply!r}")
        return reply

    def _obs(self, payload: dict) -> np.ndarray:
        obs = np.asarray(payload["obs"], dtype=np.float64)
        if obs.shape != (self.obs_dim,):
            raise ProtocolError(f"observation shape {obs.shape} does not match obs_dim {self.obs_dim}")
        return obs

    def reset(self, *, seed: int | None = None, options: dict | None = None):
        if _gym is not None:
            super().reset(seed=seed)
        message: dict[str, Any] = {"cmd": "reset"}
        if seed is not None:
            message["seed"] = seed
        if options and "round" in options:
            message["round"] = options["round"]
        reply = self._call(message)
        if "error" in reply:
            raise ProtocolError(f"{reply['error']}: {reply.get('detail', '')}")
        return self._obs(reply), {}

    def step(self, action):
        reply = self._call({"cmd": "step", "action": int(action)})
        if "error" in reply:
            raise ProtocolError(f"{reply['error']}: {reply.get('detail', '')}")
        return (
            self._obs(reply),
            float(reply["reward"]),
            bool(reply["terminated"]),
            bool(reply["truncated"]),
            dict(reply.get("info", {})),
        )

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._transport.close()

    def __del__(self) -> None:  # best-effort cleanup of the child process
        try:
            self.close()
        except Exception:
            pass
