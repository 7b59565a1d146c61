"""Gymnasium-compatible bridge to a task-placement environment server."""

from .bridge import BridgeConfig, BridgeTimeout, ProtocolError, RemoteSchedulingEnv
from .checker import api_check

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeTimeout",
    "ProtocolError",
    "RemoteSchedulingEnv",
    "api_check",
]
