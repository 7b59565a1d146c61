"""Task dataset tooling: synthetic generation, QASM-derived pools, CSV interchange.

A dataset is an ordered list of subsets; each subset is one episode's task
batch with its own clock origin at zero. Generation is fully determined by
(params, seed): one PCG64 stream drives all draws in a fixed order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import QTask
from .qasm import CircuitFeatures


class InvalidParams(ValueError):
    """Generation parameters violate their invariants."""


class FormatError(Exception):
    """Malformed dataset/features CSV; carries the 1-based line number."""

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class RoundOutOfRange(IndexError):
    """Requested subset index is outside the dataset."""


# The 12 MQTBench-style application tags used for synthetic workloads.
DEFAULT_APP_TAGS = (
    "ae",
    "dj",
    "ghz",
    "qft",
    "qftentangled",
    "qnn",
    "qpeexact",
    "qpeinexact",
    "random",
    "realamprandom",
    "su2random",
    "twolocalrandom",
)

DATASET_HEADER = ["subset_id", "task_id", "arrival_s", "qubits", "depth1_layers", "shots", "app_tag"]
FEATURES_HEADER = ["name", "qubits", "depth1_layers", "gate_count", "gate_histogram"]


@dataclass
class GenerationParams:
    """Knobs of the synthetic workload.

    Arrival times are i.i.d. uniform over [0, window_s) by default; the
    "poisson" switch draws exponential inter-arrival gaps with the same
    mean rate instead. Attribute ranges are inclusive on both ends.
    """

    n_subsets: int = 1900
    tasks_per_subset: int = 25
    window_s: float = 60.0
    qubit_range: tuple[int, int] = (2, 27)
    depth_range: tuple[int, int] = (10, 500)
    shots_range: tuple[int, int] = (100, 1000)
    app_tags: tuple[str, ...] = DEFAULT_APP_TAGS
    arrival_process: str = "uniform"

    def validate(self) -> None:
        if self.n_subsets < 1 or self.tasks_per_subset < 1:
            raise InvalidParams("n_subsets and tasks_per_subset must be >= 1")
        if not self.window_s > 0:
            raise InvalidParams("window_s must be > 0")
        for label, (lo, hi), floor in (
            ("qubit_range", self.qubit_range, 1),
            ("depth_range", self.depth_range, 0),
            ("shots_range", self.shots_range, 1),
        ):
            if lo > hi or lo < floor:
                raise InvalidParams(f"{label} must satisfy {floor} <= lo <= hi, got ({lo}, {hi})")
        if not self.app_tags:
            raise InvalidParams("app_tags must be non-empty")
        if self.arrival_process not in ("uniform", "poisson"):
            raise InvalidParams(f"unknown arrival_process {self.arrival_process!r}")


@dataclass
class Dataset:
    """Ordered subsets of tasks; task ids are unique dataset-wide."""

    subsets: list[list[QTask]]
    seed: int | None = None
    params: GenerationParams | None = None

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)

    def all_tasks(self) -> list[QTask]:
        return [t for subset in self.subsets for t in subset]


def get_subset(dataset: Dataset, round: int) -> list[QTask]:
    """The task batch for episode `round`, sorted by arrival."""
    if not 0 <= round < dataset.n_subsets:
        raise RoundOutOfRange(f"round {round} out of range [0, {dataset.n_subsets})")
    return dataset.subsets[round]


def _arrivals(params: GenerationParams, rng: np.random.Generator) -> np.ndarray:
    k = params.tasks_per_subset
    if params.arrival_process == "uniform":
        times = rng.uniform(0.0, params.window_s, size=k)
    else:
        gaps = rng.exponential(scale=params.window_s / k, size=k)
        times = np.cumsum(gaps)
    times.sort()
    return times


def generate_dataset(params: GenerationParams, seed: int) -> Dataset:
    """Synthesize a dataset from scratch; fully determined by (params, seed)."""
    params.validate()
    rng = np.random.default_rng(seed)
    qlo, qhi = params.qubit_range
    dlo, dhi = params.depth_range
    slo, shi = params.shots_range
    subsets: list[list[QTask]] = []
    task_id = 0
    for _ in range(params.n_subsets):
        k = params.tasks_per_subset
        arrivals = _arrivals(params, rng)
        qubits = rng.integers(qlo, qhi + 1, size=k)
        depths = rng.integers(dlo, dhi + 1, size=k)
        shots = rng.integers(slo, shi + 1, size=k)
        tags = rng.integers(0, len(params.app_tags), size=k)
        subsets.append(
            [
                QTask(
                    id=task_id + i,
                    arrival_at=float(arrivals[i]),
                    qubit_count=int(qubits[i]),
                    depth1_layers=int(depths[i]),
                    shots=int(shots[i]),
                    app_tag=params.app_tags[tags[i]],
                )
                for i in range(k)
            ]
        )
        task_id += k
    return Dataset(subsets, seed=seed, params=params)


def dataset_from_features(
    features: list[CircuitFeatures], params: GenerationParams, seed: int
) -> Dataset:
    """Build a dataset by sampling circuits (with replacement) from a feature pool.

    Qubits and depth come from the sampled circuit; arrival and shots are
    assigned exactly as in generate_dataset. The task's app_tag is the
    feature's name when it has one.
    """
    params.validate()
    if not features:
        raise InvalidParams("feature pool must be non-empty")
    rng = np.random.default_rng(seed)
    slo, shi = params.shots_range
    subsets: list[list[QTask]] = []
    task_id = 0
    for _ in range(params.n_subsets):
        k = params.tasks_per_subset
        arrivals = _arrivals(params, rng)
        picks = rng.integers(0, len(features), size=k)
        shots = rng.integers(slo, shi + 1, size=k)
        batch = []
        for i in range(k):
            feat = features[picks[i]]
            batch.append(
                QTask(
                    id=task_id + i,
                    arrival_at=float(arrivals[i]),
                    qubit_count=feat.qubit_count,
                    depth1_layers=feat.depth1_layers,
                    shots=int(shots[i]),
                    app_tag=feat.name or "circuit",
                )
            )
        subsets.append(batch)
        task_id += k
    return Dataset(subsets, seed=seed, params=params)


def format_seconds(x: float) -> str:
    """Shortest decimal that round-trips to the same float, with >= 6 decimals."""
    s = np.format_float_positional(x, unique=True, trim="0")
    whole, _, frac = s.partition(".")
    return f"{whole}.{frac.ljust(6, '0')}"


def save_csv(dataset: Dataset, path: str | Path) -> None:
    """Write the dataset interchange CSV (UTF-8, LF line endings)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for subset_id, subset in enumerate(dataset.subsets):
            for task in subset:
                writer.writerow(
                    [
                        subset_id,
                        task.id,
                        format_seconds(task.arrival_at),
                        task.qubit_count,
                        task.depth1_layers,
                        task.shots,
                        task.app_tag,
                    ]
                )


def load_csv(path: str | Path) -> Dataset:
    """Read a dataset CSV back; inverse of save_csv for the task content."""
    by_subset: dict[int, list[QTask]] = {}
    seen_ids: set[int] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(1, "empty file") from None
        if header != DATASET_HEADER:
            raise FormatError(1, f"bad header {header!r}; expected {DATASET_HEADER!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DATASET_HEADER):
                raise FormatError(line_no, f"expected {len(DATASET_HEADER)} columns, got {len(row)}")
            try:
                subset_id = int(row[0])
                task = QTask(
                    id=int(row[1]),
                    arrival_at=float(row[2]),
                    qubit_count=int(row[3]),
                    depth1_layers=int(row[4]),
                    shots=int(row[5]),
                    app_tag=row[6],
                )
            except ValueError as exc:
                raise FormatError(line_no, str(exc)) from exc
            if subset_id < 0:
                raise FormatError(line_no, f"negative subset_id {subset_id}")
            if task.id in seen_ids:
                raise FormatError(line_no, f"duplicate task id {task.id}")
            seen_ids.add(task.id)
            by_subset.setdefault(subset_id, []).append(task)
    if not by_subset:
        raise FormatError(2, "dataset has no rows")
    expected = set(range(len(by_subset)))
    if set(by_subset) != expected:
        raise FormatError(2, f"subset ids must be exactly 0..{len(by_subset) - 1}")
    subsets = [sorted(by_subset[i], key=lambda t: t.arrival_at) for i in range(len(by_subset))]
    return Dataset(subsets)


def save_features_csv(features: list[CircuitFeatures], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURES_HEADER)
        for feat in features:
            hist = ";".join(f"{k}={v}" for k, v in sorted(feat.gate_histogram.items()))
            writer.writerow([feat.name, feat.qubit_count, feat.depth1_layers, feat.gate_count, hist])


def load_features_csv(path: str | Path) -> list[CircuitFeatures]:
    features = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(1, "empty file") from None
        if header != FEATURES_HEADER:
            raise FormatError(1, f"bad header {header!r}; expected {FEATURES_HEADER!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(FEATURES_HEADER):
                raise FormatError(line_no, f"expected {len(FEATURES_HEADER)} columns, got {len(row)}")
            try:
                hist = {}
                if row[4]:
                    for item in row[4].split(";"):
                        k, _, v = item.partition("=")
                        hist[k] = int(v)
                features.append(
                    CircuitFeatures(
                        qubit_count=int(row[1]),
                        depth1_layers=int(row[2]),
                        gate_count=int(row[3]),
                        gate_histogram=hist,
                        name=row[0],
                    )
                )
            except ValueError as exc:
                raise FormatError(line_no, str(exc)) from exc
    return features
