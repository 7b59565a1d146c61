"""Scheduling policies: baselines, the per-step brute-force oracle, policy files.

All policies expose select(observation) -> action. Baselines that decode
physical quantities (greedy) expect raw, unnormalized observations.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..cloud import NodeCatalog, QNode, QTask, clone_node, submit


class PolicyFormatError(Exception):
    """Unreadable or wrong-version policy file."""


class RandomPolicy:
    kind = "random"

    def __init__(self, n_actions: int, seed: int = 0) -> None:
        self.n_actions = n_actions
        self._rng = np.random.default_rng(seed)

    def reseed(self, seed: int) -> None:
        self._rng = np.random.default_rng(seed)

    def select(self, obs: np.ndarray) -> int:
        return int(self._rng.integers(0, self.n_actions))


class RoundRobinPolicy:
    kind = "round_robin"

    def __init__(self, n_actions: int) -> None:
        self.n_actions = n_actions
        self._next = 0

    def reseed(self, seed: int) -> None:
        self._next = 0

    def select(self, obs: np.ndarray) -> int:
        action = self._next
        self._next = (self._next + 1) % self.n_actions
        return action


def select_greedy(obs: np.ndarray, catalog: NodeCatalog) -> int:
    """Least finishing time first: among capacity-feasible nodes pick the one
    minimizing backlog + estimated execution time (ties: lowest index).
    Falls back to node 0 when no node is feasible."""
    n = len(catalog)
    obs = np.asarray(obs, dtype=np.float64)
    node_qubits = obs[0 : 2 * n : 2]
    backlogs = obs[1 : 2 * n : 2]
    task_qubits, depth, shots = obs[2 * n], obs[2 * n + 1], obs[2 * n + 2]
    d1cps = np.array([e.d1cps for e in catalog.entries])
    completions = backlogs + (depth * shots) / d1cps
    feasible = task_qubits <= node_qubits
    if not feasible.any():
        return 0
    completions = np.where(feasible, completions, np.inf)
    return int(np.argmin(completions))


class GreedyPolicy:
    kind = "greedy"

    def __init__(self, catalog: NodeCatalog) -> None:
        self.catalog = catalog

    def select(self, obs: np.ndarray) -> int:
        return select_greedy(obs, self.catalog)


def oracle_step(nodes: list[QNode], task: QTask, at: float) -> int:
    """Exhaustive one-step lookahead: try every node on a cloned state and
    return the action with the smallest completion time (violations excluded,
    ties broken by lowest index; node 0 when everything violates)."""
    best_action = None
    best_completion = None
    for i, node in enumerate(nodes):
        record = submit(task, clone_node(node), at)
        if not record.success:
            continue
        if best_completion is None or record.completion_s < best_completion:
            best_completion = record.completion_s
            best_action = i
    return 0 if best_action is None else best_action


def save_policy(policy, path: str | Path) -> None:
    """Write a policy file; format depends on the policy kind."""
    from .dqn import DqnPolicy, save_dqn
    from .tabular import QTablePolicy

    if isinstance(policy, QTablePolicy):
        policy.save(path)
    elif isinstance(policy, DqnPolicy):
        save_dqn(policy, path)
    else:
        raise PolicyFormatError(f"policy kind {getattr(policy, 'kind', '?')!r} has no file format")


def load_policy(path: str | Path):
    """Read a policy file written by save_policy; dispatches on the header."""
    from .dqn import load_dqn
    from .tabular import QTablePolicy

    with open(path, "rb") as fh:
        first = fh.readline()
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise PolicyFormatError(f"{path}: unreadable policy header") from exc
    fmt = header.get("format")
    if header.get("version") != 1:
        raise PolicyFormatError(f"{path}: unsupported policy version {header.get('version')!r}")
    if fmt == "qtable":
        return QTablePolicy.load(path)
    if fmt == "dqn":
        return load_dqn(path)
    raise PolicyFormatError(f"{path}: unknown policy format {fmt!r}")
