"""Task-placement learning environment over the deterministic cloud simulation.

One episode = one dataset subset. Each step places the current task on a
node chosen by the action. Successful placements advance the simulated
clock to the next arrival (firing intervening execution events along the
way); capacity violations are penalized and re-present the same task with
the simulation state untouched, so episode length = successes + violations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .cloud import Broker, ExecutionRecord, NodeCatalog, QTask, backlog
from .engine import Engine
from .workload import Dataset, RoundOutOfRange, get_subset


class InvalidAction(Exception):
    """Action index outside [0, n_nodes)."""


class EpisodeOver(Exception):
    """step() called after the episode terminated or was truncated."""


class RewardUndefined(Exception):
    """Inverse-completion reward hit a zero completion time (depth-0 task)."""


class DegenerateBounds(Exception):
    """Normalization bounds with hi == lo."""


class EpisodeRunning(Exception):
    """episode_stats() requested before the episode ended."""


REWARD_MODES = ("inverse_completion", "constant")


@dataclass
class EnvConfig:
    """Environment wiring: cluster, workload, reward shape, episode bounds.

    With reward mode "inverse_completion" a successful placement earns
    1 / completion seconds; "constant" earns delta_plus. Failures always
    earn `penalty` (negative). max_steps_per_episode defaults to 10x the
    subset size. normalize=True min-max scales observations into [0, 1].
    """

    catalog: NodeCatalog
    dataset: Dataset
    reward_success_mode: str = "inverse_completion"
    delta_plus: float = 1.0
    penalty: float = -10.0
    max_steps_per_episode: int | None = None
    normalize: bool = False
    observation_bounds: np.ndarray | None = None

    def validate(self) -> None:
        if self.reward_success_mode not in REWARD_MODES:
            raise ValueError(f"reward_success_mode must be one of {REWARD_MODES}")
        if not self.penalty < 0:
            raise ValueError("penalty must be negative")
        if not self.dataset.subsets:
            raise ValueError("dataset has no subsets")
        if self.max_steps_per_episode is not None:
            largest = max(len(s) for s in self.dataset.subsets)
            if self.max_steps_per_episode < largest:
                raise ValueError(
                    f"max_steps_per_episode={self.max_steps_per_episode} is below the "
                    f"largest subset size {largest}"
                )


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    terminated: bool
    truncated: bool
    info: dict[str, Any]


@dataclass(frozen=True)
class EpisodeStats:
    reward_sum: float
    steps: int
    violations: int
    mean_completion_s: float


def normalize(obs: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Component-wise (x - lo) / (hi - lo), clamped into [0, 1]."""
    bounds = np.asarray(bounds, dtype=np.float64)
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)):
        raise DegenerateBounds("bounds must be finite")
    if np.any(hi == lo):
        raise DegenerateBounds(f"degenerate bounds at components {np.nonzero(hi == lo)[0].tolist()}")
    return np.clip((obs - lo) / (hi - lo), 0.0, 1.0)


class QCloudEnv:
    """step/reset environment for the task-placement problem.

    Observation layout (length 2n + 3 for n nodes):
        [qubits_0, backlog_0, ..., qubits_{n-1}, backlog_{n-1},
         task_qubits, task_depth1_layers, task_shots]
    Actions are node indices; the action space size equals the node count.
    """

    def __init__(self, config: EnvConfig) -> None:
        config.validate()
        self.config = config
        self.n_actions = len(config.catalog)
        if self.n_actions < 1:
            raise ValueError("catalog has no nodes")
        self.obs_dim = 2 * self.n_actions + 3
        self._bounds = (
            np.asarray(config.observation_bounds, dtype=np.float64)
            if config.observation_bounds is not None
            else self._default_bounds()
        )
        if self._bounds.shape != (self.obs_dim, 2):
            raise ValueError(f"observation_bounds must have shape ({self.obs_dim}, 2)")
        self._next_round = 0
        self._engine: Engine | None = None
        self._broker: Broker | None = None
        self._tasks: list[QTask] = []
        self._idx = 0
        self._seed: int | None = None
        self._reset_counters()
        self._terminated = True  # unusable until reset()
        self._truncated = False

    # -- lifecycle ------------------------------------------------------------

    def reset(self, seed: int | None = None, round: int | None = None) -> np.ndarray:
        """Start an episode; returns the observation for the first task.

        Without an explicit round, unseeded resets advance cyclically
        through the dataset, while a seeded reset picks its round from the
        seed (seed mod n_subsets) so that reset(seed=s) is reproducible,
        as step/reset APIs require. The simulation itself is deterministic.
        """
        if round is None:
            if seed is not None:
                round = seed % self.config.dataset.n_subsets
            else:
                round = self._next_round
        elif not 0 <= round < self.config.dataset.n_subsets:
            raise RoundOutOfRange(
                f"round {round} out of range [0, {self.config.dataset.n_subsets})"
            )
        self._round = round
        self._next_round = (round + 1) % self.config.dataset.n_subsets
        if seed is not None:
            self._seed = seed

        self._tasks = get_subset(self.config.dataset, round)
        if not self._tasks:
            raise ValueError(f"subset {round} is empty")
        self._engine = Engine()
        self._broker = Broker(self._engine, self.config.catalog.build_nodes())
        for task in self._tasks:
            self._engine.schedule(task.arrival_at, ("task-arrival", task.id))
        self._idx = 0
        self._reset_counters()
        self._terminated = False
        self._truncated = False
        self._engine.run_until(self._tasks[0].arrival_at)
        return self.observe()

    def _reset_counters(self) -> None:
        self._steps = 0
        self._violations = 0
        self._successes = 0
        self._reward_sum = 0.0
        self._completions: list[float] = []

    @property
    def max_steps(self) -> int:
        if self.config.max_steps_per_episode is not None:
            return self.config.max_steps_per_episode
        return 10 * len(self._tasks)

    @property
    def done(self) -> bool:
        return self._terminated or self._truncated

    @property
    def broker(self) -> Broker:
        if self._broker is None:
            raise EpisodeOver("reset() has not been called")
        return self._broker

    @property
    def engine(self) -> Engine:
        if self._engine is None:
            raise EpisodeOver("reset() has not been called")
        return self._engine

    @property
    def current_task(self) -> QTask:
        return self._tasks[self._idx]

    # -- dynamics ---------------------------------------------------------------

    def step(self, action: int) -> StepResult:
        """Place the current task on node `action` and advance the simulation."""
        if self._engine is None or self.done:
            raise EpisodeOver("episode is over; call reset()")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise InvalidAction(f"action {action} out of range [0, {self.n_actions})")

        task = self.current_task
        record = self.broker.submit(task, action, at=self._engine.now())
        step_reward = self.reward(record)
        self._reward_sum += step_reward
        self._steps += 1

        if record.success:
            self._successes += 1
            self._completions.append(record.completion_s)
            self._idx += 1
            if self._idx == len(self._tasks):
                self._terminated = True
                self._engine.run_all()  # flush remaining execution events into the trace
                observation = self._terminal_observation()
            else:
                self._engine.run_until(self.current_task.arrival_at)
                observation = self.observe()
        else:
            self._violations += 1
            observation = self.observe()

        if not self._terminated and self._steps >= self.max_steps:
            self._truncated = True

        info = {
            "success": record.success,
            "wait_s": record.wait_s,
            "exec_s": record.exec_s,
            "completion_s": record.completion_s,
            "node_id": record.node_id,
            "violations_so_far": self._violations,
        }
        return StepResult(observation, step_reward, self._terminated, self._truncated, info)

    def reward(self, record: ExecutionRecord) -> float:
        """Reward for one placement: positive on success, `penalty` on violation."""
        if not record.success:
            return self.config.penalty
        if self.config.reward_success_mode == "constant":
            return self.config.delta_plus
        if record.completion_s == 0.0:
            raise RewardUndefined(
                f"task {record.task_id} completed in 0 s; inverse-completion reward is "
                "undefined (use depth >= 1 datasets or the constant reward mode)"
            )
        return 1.0 / record.completion_s

    # -- observations -----------------------------------------------------------

    def observe(self) -> np.ndarray:
        """Observation for the current task, node features evaluated at now()."""
        return self._build_observation(self.current_task)

    def _build_observation(self, task: QTask | None) -> np.ndarray:
        now = self.engine.now()
        parts = np.empty(self.obs_dim, dtype=np.float64)
        for i, node in enumerate(self.broker.nodes):
            parts[2 * i] = node.qubit_count
            parts[2 * i + 1] = backlog(node, now)
        if task is None:
            parts[-3:] = 0.0
        else:
            parts[-3] = task.qubit_count
            parts[-2] = task.depth1_layers
            parts[-1] = task.shots
        if self.config.normalize:
            return normalize(parts, self._bounds)
        return parts

    def _terminal_observation(self) -> np.ndarray:
        return self._build_observation(None)

    def _default_bounds(self) -> np.ndarray:
        """Min-max bounds from the catalog and dataset (backlog bounded by the
        worst-case serial load of any subset on the slowest node)."""
        entries = self.config.catalog.entries
        tasks = self.config.dataset.all_tasks()
        max_node_qubits = max(e.qubits for e in entries)
        slowest = min(e.d1cps for e in entries)
        backlog_hi = max(
            (
                sum(t.depth1_layers * t.shots for t in subset) / slowest
                for subset in self.config.dataset.subsets
            ),
            default=1.0,
        )
        qubits_hi = max(max_node_qubits, max((t.qubit_count for t in tasks), default=1))
        depth_hi = max((t.depth1_layers for t in tasks), default=1)
        shots_hi = max((t.shots for t in tasks), default=1)
        bounds = np.zeros((self.obs_dim, 2), dtype=np.float64)
        for i in range(self.n_actions):
            bounds[2 * i] = (0.0, max_node_qubits)
            bounds[2 * i + 1] = (0.0, max(backlog_hi, 1e-9))
        bounds[-3] = (0.0, qubits_hi)
        bounds[-2] = (0.0, max(depth_hi, 1))
        bounds[-1] = (0.0, max(shots_hi, 1))
        return bounds

    @property
    def observation_bounds(self) -> np.ndarray:
        return self._bounds.copy()

    # -- reporting ----------------------------------------------------------------

    def episode_stats(self) -> EpisodeStats:
        """Aggregates for the finished episode."""
        if self._engine is None or not self.done:
            raise EpisodeRunning("episode still running")
        mean_completion = float(np.mean(self._completions)) if self._completions else 0.0
        return EpisodeStats(
            reward_sum=self._reward_sum,
            steps=self._steps,
            violations=self._violations,
            mean_completion_s=mean_completion,
        )

    def records(self) -> list[ExecutionRecord]:
        """All placement attempts of the current episode, in step order."""
        return list(self.broker.records)
