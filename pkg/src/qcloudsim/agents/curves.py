"""Training curves: per-iteration episode aggregates, CSV in and out."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

CURVE_HEADER = ["iteration", "episodes", "ep_reward_mean", "ep_len_mean", "violations_mean"]


@dataclass(frozen=True)
class CurveRow:
    iteration: int
    episodes: int
    ep_reward_mean: float
    ep_len_mean: float
    violations_mean: float


@dataclass
class TrainingCurve:
    rows: list[CurveRow]

    def __post_init__(self) -> None:
        iters = [r.iteration for r in self.rows]
        if any(b <= a for a, b in zip(iters, iters[1:])):
            raise ValueError("curve iterations must be strictly increasing")

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_HEADER)
            for r in self.rows:
                writer.writerow(
                    [r.iteration, r.episodes, repr(r.ep_reward_mean), repr(r.ep_len_mean), repr(r.violations_mean)]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainingCurve":
        rows = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != CURVE_HEADER:
                raise ValueError(f"bad curve header {header!r}")
            for row in reader:
                rows.append(CurveRow(int(row[0]), int(row[1]), float(row[2]), float(row[3]), float(row[4])))
        return cls(rows)


def build_curve(
    episode_ends: list[tuple[int, float, int, int]],
    steps_per_iteration: int,
    total_steps: int,
) -> TrainingCurve:
    """Bucket per-episode summaries into fixed step windows.

    `episode_ends` holds (global_step_at_end, reward_sum, length, violations)
    per finished episode. Windows with no finished episode repeat the
    previous row's means so every iteration has a row.
    """
    n_iterations = max(1, math.ceil(total_steps / steps_per_iteration))
    rows: list[CurveRow] = []
    cursor = 0
    episodes_total = 0
    last = (0.0, 0.0, 0.0)
    for k in range(1, n_iterations + 1):
        hi = k * steps_per_iteration
        batch = []
        while cursor < len(episode_ends) and episode_ends[cursor][0] <= hi:
            batch.append(episode_ends[cursor])
            cursor += 1
        if batch:
            episodes_total += len(batch)
            last = (
                sum(e[1] for e in batch) / len(batch),
                sum(e[2] for e in batch) / len(batch),
                sum(e[3] for e in batch) / len(batch),
            )
        rows.append(CurveRow(k, episodes_total, last[0], last[1], last[2]))
    return TrainingCurve(rows)
