"""Greedy rollout evaluation of a policy over consecutive dataset rounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EvaluationReport:
    episodes: int
    reward_sum_mean: float
    reward_sum_std: float
    steps_mean: float
    steps_std: float
    violations_mean: float
    violations_std: float
    mean_completion_s_mean: float
    mean_completion_s_std: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def evaluate(policy, env, episodes: int, seed: int = 0, start_round: int = 0) -> EvaluationReport:
    """Run `episodes` rollouts (rounds advance cyclically from start_round).

    Policies with internal randomness are reseeded with `seed`, so repeated
    calls reproduce the same trajectories.
    """
    if episodes < 1:
        raise ValueError(f"episodes must be >= 1, got {episodes}")
    if hasattr(policy, "reseed"):
        policy.reseed(seed)
    rewards, steps, violations, completions = [], [], [], []
    n_rounds = env.config.dataset.n_subsets
    for k in range(episodes):
        obs = env.reset(round=(start_round + k) % n_rounds)
        done = False
        while not done:
            result = env.step(policy.select(obs))
            obs = result.observation
            done = result.terminated or result.truncated
        stats = env.episode_stats()
        rewards.append(stats.reward_sum)
        steps.append(stats.steps)
        violations.append(stats.violations)
        completions.append(stats.mean_completion_s)
    return EvaluationReport(
        episodes=episodes,
        reward_sum_mean=float(np.mean(rewards)),
        reward_sum_std=float(np.std(rewards)),
        steps_mean=float(np.mean(steps)),
        steps_std=float(np.std(steps)),
        violations_mean=float(np.mean(violations)),
        violations_std=float(np.std(violations)),
        mean_completion_s_mean=float(np.mean(completions)),
        mean_completion_s_std=float(np.std(completions)),
    )
