"""Compact deep Q-network trainer: MLP head, n-step returns, optional
proportional prioritized replay, and a periodically synced target network.

Distributional heads (return atoms) are not implemented; configs carrying
`num_atoms` are accepted with a warning and the field is ignored.
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .curves import TrainingCurve, build_curve
from .tabular import InvalidHyperparameters, epsilon_at


@dataclass
class DqnConfig:
    learning_rate: float = 0.01
    replay_capacity: int = 60000
    n_step: int = 5
    prioritized: bool = True
    pr_alpha: float = 0.5
    pr_beta: float = 0.5
    pr_epsilon: float = 3e-6
    hidden_layers: tuple[int, ...] = (64, 64)
    gamma: float = 0.99
    epsilon_schedule: tuple[float, float, int] = (1.0, 0.02, 20000)
    target_sync_every: int = 500
    batch_size: int = 32
    steps_per_iteration: int = 1000
    learning_starts: int = 500
    num_atoms: int | None = None  # accepted for config compatibility, not supported

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise InvalidHyperparameters("learning_rate must be > 0")
        if self.replay_capacity < self.batch_size:
            raise InvalidHyperparameters("replay_capacity must be >= batch_size")
        if not 0 < self.gamma <= 1:
            raise InvalidHyperparameters("gamma must be in (0, 1]")
        if self.n_step < 1:
            raise InvalidHyperparameters("n_step must be >= 1")
        if self.batch_size < 1 or self.target_sync_every < 1 or self.steps_per_iteration < 1:
            raise InvalidHyperparameters("batch_size, target_sync_every, steps_per_iteration must be >= 1")
        start, end, decay = self.epsilon_schedule
        if not (0 <= end <= start <= 1) or decay < 1:
            raise InvalidHyperparameters(f"bad epsilon schedule {self.epsilon_schedule}")
        if not self.hidden_layers:
            raise InvalidHyperparameters("hidden_layers must name at least one width")
        if self.num_atoms is not None:
            warnings.warn(
                "distributional return atoms are not supported natively; ignoring num_atoms",
                stacklevel=2,
            )


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    horizon: int  # steps spanned, for gamma**horizon bootstrapping


class NStepAccumulator:
    """Folds 1-step transitions into n-step ones with the proper discounting.

    At episode end, flush() emits the shorter-horizon leftovers. With n=1
    the output equals the input stream.
    """

    def __init__(self, n: int, gamma: float) -> None:
        self.n = n
        self.gamma = gamma
        self._window: deque[tuple[np.ndarray, int, float]] = deque()

    def _emit(self, next_obs: np.ndarray, done: bool) -> Transition:
        obs, action, _ = self._window[0]
        reward = 0.0
        for k, (_, _, r) in enumerate(self._window):
            reward += (self.gamma**k) * r
        return Transition(obs, action, reward, next_obs, done, len(self._window))

    def push(self, obs: np.ndarray, action: int, reward: float, next_obs: np.ndarray, done: bool):
        self._window.append((obs, action, reward))
        out = []
        if len(self._window) == self.n:
            out.append(self._emit(next_obs, done))
            self._window.popleft()
        if done:
            while self._window:
                out.append(self._emit(next_obs, True))
                self._window.popleft()
        return out


class UniformReplay:
    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._data: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, transition: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
        else:
            self._data[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, len(self._data), size=batch_size)
        weights = np.ones(batch_size, dtype=np.float64)
        return [self._data[i] for i in idx], idx, weights

    def update_priorities(self, idx, td_errors) -> None:
        pass


class SumTree:
    """Binary indexed sum over leaf priorities for O(log n) sampling."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._tree = np.zeros(2 * capacity, dtype=np.float64)

    def total(self) -> float:
        return float(self._tree[1])

    def set(self, leaf: int, value: float) -> None:
        i = leaf + self.capacity
        self._tree[i] = value
        i //= 2
        while i >= 1:
            self._tree[i] = self._tree[2 * i] + self._tree[2 * i + 1]
            i //= 2

    def get(self, leaf: int) -> float:
        return float(self._tree[leaf + self.capacity])

    def find(self, prefix: float) -> int:
        """Leaf index whose cumulative range contains `prefix`."""
        i = 1
        while i < self.capacity:
            left = self._tree[2 * i]
            if prefix <= left:
                i = 2 * i
            else:
                prefix -= left
                i = 2 * i + 1
        return i - self.capacity


class PrioritizedReplay:
    """Proportional prioritization: p_i = (|td_i| + pr_epsilon) ** pr_alpha."""

    def __init__(self, capacity: int, alpha: float, beta: float, eps: float) -> None:
        self.capacity = capacity
        self.alpha = alpha
        self.beta = beta
        self.eps = eps
        self._data: list[Transition] = []
        self._next = 0
        self._tree = SumTree(capacity)
        self._max_priority = 1.0

    def __len__(self) -> int:
        return len(self._data)

    def push(self, transition: Transition) -> None:
        if len(self._data) < self.capacity:
            self._data.append(transition)
            leaf = len(self._data) - 1
        else:
            leaf = self._next
            self._data[leaf] = transition
        self._next = (self._next + 1) % self.capacity
        self._tree.set(leaf, self._max_priority)

    def sample(self, batch_size: int, rng: np.random.Generator):
        total = self._tree.total()
        prefixes = rng.uniform(0.0, total, size=batch_size)
        idx = np.array([self._tree.find(p) for p in prefixes], dtype=np.int64)
        idx = np.minimum(idx, len(self._data) - 1)
        priorities = np.array([self._tree.get(int(i)) for i in idx])
        probs = priorities / total
        weights = (len(self._data) * probs) ** (-self.beta)
        weights /= weights.max()
        return [self._data[int(i)] for i in idx], idx, weights

    def update_priorities(self, idx, td_errors) -> None:
        for i, td in zip(idx, np.asarray(td_errors, dtype=np.float64)):
            priority = (abs(float(td)) + self.eps) ** self.alpha
            self._tree.set(int(i), priority)
            self._max_priority = max(self._max_priority, priority)


class QNet(nn.Module):
    def __init__(self, obs_dim: int, n_actions: int, hidden: tuple[int, ...]) -> None:
        super().__init__()
        layers: list[nn.Module] = []
        width = obs_dim
        for h in hidden:
            layers += [nn.Linear(width, h), nn.ReLU()]
            width = h
        layers.append(nn.Linear(width, n_actions))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class DqnPolicy:
    kind = "dqn"

    def __init__(self, net: QNet, obs_dim: int, n_actions: int, hidden: tuple[int, ...]) -> None:
        self.net = net.eval()
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.hidden = hidden

    def select(self, obs: np.ndarray) -> int:
        with torch.no_grad():
            q = self.net(torch.as_tensor(np.asarray(obs), dtype=torch.float32).unsqueeze(0))
        return int(q.argmax(dim=1).item())


def save_dqn(policy: DqnPolicy, path: str | Path) -> None:
    """One JSON header line, then the float32 weight blob."""
    params = [p.detach().cpu().numpy().astype("<f4") for p in policy.net.parameters()]
    header = {
        "format": "dqn",
        "version": 1,
        "obs_dim": policy.obs_dim,
        "n_actions": policy.n_actions,
        "hidden_layers": list(policy.hidden),
        "param_shapes": [list(p.shape) for p in params],
        "dtype": "<f4",
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        for p in params:
            fh.write(p.tobytes())


def load_dqn(path: str | Path) -> DqnPolicy:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        blob = fh.read()
    if header.get("format") != "dqn" or header.get("version") != 1:
        from .policies import PolicyFormatError

        raise PolicyFormatError(f"{path}: not a readable dqn policy file")
    hidden = tuple(header["hidden_layers"])
    net = QNet(header["obs_dim"], header["n_actions"], hidden)
    offset = 0
    with torch.no_grad():
        for p, shape in zip(net.parameters(), header["param_shapes"]):
            count = int(np.prod(shape))
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
            p.copy_(torch.from_numpy(arr.copy()))
            offset += count * 4
    return DqnPolicy(net, header["obs_dim"], header["n_actions"], hidden)


def train_dqn(
    env,
    iterations: int,
    cfg: DqnConfig | None = None,
    seed: int = 0,
) -> tuple[DqnPolicy, TrainingCurve]:
    """Run `iterations` x steps_per_iteration environment steps of DQN training."""
    if iterations < 1:
        raise InvalidHyperparameters(f"iterations must be >= 1, got {iterations}")
    cfg = cfg or DqnConfig()
    cfg.validate()

    torch.manual_seed(seed)
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)  # keeps reductions reproducible run to run
    rng = np.random.default_rng(seed)
    try:
        net = QNet(env.obs_dim, env.n_actions, cfg.hidden_layers)
        target = QNet(env.obs_dim, env.n_actions, cfg.hidden_layers)
        target.load_state_dict(net.state_dict())
        optimizer = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate)

        if cfg.prioritized:
            buffer = PrioritizedReplay(cfg.replay_capacity, cfg.pr_alpha, cfg.pr_beta, cfg.pr_epsilon)
        else:
            buffer = UniformReplay(cfg.replay_capacity)
        accumulator = NStepAccumulator(cfg.n_step, cfg.gamma)

        total_steps = iterations * cfg.steps_per_iteration
        episode_ends: list[tuple[int, float, int, int]] = []
        obs = env.reset()

        for step in range(1, total_steps + 1):
            if rng.random() < epsilon_at(step - 1, cfg.epsilon_schedule):
                action = int(rng.integers(0, env.n_actions))
            else:
                with torch.no_grad():
                    q = net(torch.as_tensor(obs, dtype=torch.float32).unsqueeze(0))
                action = int(q.argmax(dim=1).item())
            result = env.step(action)
            done = result.terminated or result.truncated
            for tr in accumulator.push(obs, action, result.reward, result.observation, done):
                buffer.push(tr)

            if len(buffer) >= max(cfg.batch_size, cfg.learning_starts):
                _learn_step(net, target, optimizer, buffer, cfg, rng)
            if step % cfg.target_sync_every == 0:
                target.load_state_dict(net.state_dict())

            if done:
                stats = env.episode_stats()
                episode_ends.append((step, stats.reward_sum, stats.steps, stats.violations))
                obs = env.reset()
            else:
                obs = result.observation

        curve = build_curve(episode_ends, cfg.steps_per_iteration, total_steps)
        return DqnPolicy(net, env.obs_dim, env.n_actions, cfg.hidden_layers), curve
    finally:
        torch.set_num_threads(n_threads)


def _learn_step(net, target, optimizer, buffer, cfg: DqnConfig, rng: np.random.Generator) -> None:
    batch, idx, weights = buffer.sample(cfg.batch_size, rng)
    obs = torch.as_tensor(np.stack([t.obs for t in batch]), dtype=torch.float32)
    actions = torch.as_tensor([t.action for t in batch], dtype=torch.int64)
    rewards = torch.as_tensor([t.reward for t in batch], dtype=torch.float32)
    next_obs = torch.as_tensor(np.stack([t.next_obs for t in batch]), dtype=torch.float32)
    done = torch.as_tensor([t.done for t in batch], dtype=torch.float32)
    discount = torch.as_tensor([cfg.gamma**t.horizon for t in batch], dtype=torch.float32)
    weight = torch.as_tensor(weights, dtype=torch.float32)

    q = net(obs).gather(1, actions.unsqueeze(1)).squeeze(1)
    with torch.no_grad():
        next_q = target(next_obs).max(dim=1).values
        y = rewards + discount * next_q * (1.0 - done)
    td = q - y
    loss = (weight * td.pow(2)).mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    buffer.update_priorities(idx, td.detach().numpy())
