"""Tabular Q-learning over a discretized view of the placement observation.

The discretization keeps exactly what the placement decision needs: which
nodes can host the current task (feasibility pattern) and how the nodes
rank by queued backlog. That collapses the continuous observation into a
few hundred states on desk-scale clusters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .curves import TrainingCurve, build_curve


class InvalidHyperparameters(ValueError):
    """Out-of-range training hyperparameters."""


def discretize(obs: np.ndarray, n_nodes: int) -> tuple[int, ...]:
    """(feasibility bit per node) + (backlog rank per node), as one flat key."""
    obs = np.asarray(obs, dtype=np.float64)
    node_qubits = obs[0 : 2 * n_nodes : 2]
    backlogs = obs[1 : 2 * n_nodes : 2]
    task_qubits = obs[2 * n_nodes]
    feasible = tuple(int(task_qubits <= q) for q in node_qubits)
    order = np.argsort(backlogs, kind="stable")
    ranks = [0] * n_nodes
    for rank, node in enumerate(order):
        ranks[int(node)] = rank
    return feasible + tuple(ranks)


class QTablePolicy:
    kind = "qtable"

    def __init__(self, n_nodes: int, table: dict[tuple[int, ...], np.ndarray] | None = None) -> None:
        self.n_nodes = n_nodes
        self.table = table if table is not None else {}

    def q_values(self, state: tuple[int, ...]) -> np.ndarray:
        values = self.table.get(state)
        if values is None:
            values = np.zeros(self.n_nodes, dtype=np.float64)
            self.table[state] = values
        return values

    def select(self, obs: np.ndarray) -> int:
        state = discretize(obs, self.n_nodes)
        values = self.table.get(state)
        if values is None:
            return 0
        return int(np.argmax(values))

    def save(self, path: str | Path) -> None:
        doc = {
            "format": "qtable",
            "version": 1,
            "n_nodes": self.n_nodes,
            "entries": [
                {"state": list(state), "q": values.tolist()}
                for state, values in sorted(self.table.items())
            ],
        }
        Path(path).write_text(json.dumps(doc) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "QTablePolicy":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        table = {
            tuple(entry["state"]): np.asarray(entry["q"], dtype=np.float64)
            for entry in doc["entries"]
        }
        return cls(doc["n_nodes"], table)


@dataclass
class QLearningConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_schedule: tuple[float, float, int] = (1.0, 0.01, 15000)
    steps_per_iteration: int = 1000

    def validate(self) -> None:
        if not 0 < self.alpha <= 1:
            raise InvalidHyperparameters(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise InvalidHyperparameters(f"gamma must be in (0, 1], got {self.gamma}")
        start, end, decay = self.epsilon_schedule
        if not (0 <= end <= start <= 1) or decay < 1:
            raise InvalidHyperparameters(f"bad epsilon schedule {self.epsilon_schedule}")
        if self.steps_per_iteration < 1:
            raise InvalidHyperparameters("steps_per_iteration must be >= 1")


def epsilon_at(step: int, schedule: tuple[float, float, int]) -> float:
    start, end, decay = schedule
    if step >= decay:
        return end
    return start + (end - start) * (step / decay)


def train_qlearning(
    env,
    episodes: int,
    hp: QLearningConfig | None = None,
    seed: int = 0,
) -> tuple[QTablePolicy, TrainingCurve]:
    """Train a tabular policy with epsilon-greedy exploration.

    Deterministic given (env dataset, episodes, hp, seed): all randomness
    comes from one seeded generator.
    """
    if episodes < 1:
        raise InvalidHyperparameters(f"episodes must be >= 1, got {episodes}")
    hp = hp or QLearningConfig()
    hp.validate()
    rng = np.random.default_rng(seed)
    policy = QTablePolicy(env.n_actions)
    episode_ends: list[tuple[int, float, int, int]] = []
    global_step = 0

    for _ in range(episodes):
        obs = env.reset()
        state = discretize(obs, env.n_actions)
        done = False
        while not done:
            if rng.random() < epsilon_at(global_step, hp.epsilon_schedule):
                action = int(rng.integers(0, env.n_actions))
            else:
                action = int(np.argmax(policy.q_values(state)))
            result = env.step(action)
            global_step += 1
            next_state = discretize(result.observation, env.n_actions)
            done = result.terminated or result.truncated
            q = policy.q_values(state)
            if result.terminated:
                target = result.reward
            else:
                target = result.reward + hp.gamma * float(np.max(policy.q_values(next_state)))
            q[action] += hp.alpha * (target - q[action])
            state = next_state
        stats = env.episode_stats()
        episode_ends.append((global_step, stats.reward_sum, stats.steps, stats.violations))

    curve = build_curve(episode_ends, hp.steps_per_iteration, global_step)
    return policy, curve
