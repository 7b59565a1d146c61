"""Quantum cloud resources: nodes, tasks, execution records, and the broker.

The execution model is deterministic FIFO: each node runs one task at a
time, and queueing is summarized analytically by ``next_free_at``, so wait
and completion times are known in closed form at dispatch. Matching
execution-start / execution-complete events are still placed on the engine
to keep the event trace faithful; both views agree by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .engine import Engine


class UnknownNodeModel(Exception):
    """Raised when a node name is not present in the catalog."""


class CatalogError(ValueError):
    """Raised for malformed node-catalog files."""


@dataclass
class QTask:
    """A quantum task: one circuit execution request.

    ``depth1_layers`` counts the circuit's depth-1 layers (sets of gates
    executable simultaneously); ``shots`` is the number of repetitions.
    """

    id: int
    arrival_at: float
    qubit_count: int
    depth1_layers: int
    shots: int = 1
    app_tag: str = ""

    def __post_init__(self) -> None:
        if self.arrival_at < 0:
            raise ValueError(f"task {self.id}: arrival_at must be >= 0")
        if self.qubit_count < 1:
            raise ValueError(f"task {self.id}: qubit_count must be >= 1")
        if self.depth1_layers < 0:
            raise ValueError(f"task {self.id}: depth1_layers must be >= 0")
        if self.shots < 1:
            raise ValueError(f"task {self.id}: shots must be >= 1")


@dataclass
class QNode:
    """A quantum computation resource with a FIFO execution queue.

    ``next_free_at`` is the analytic summary of the queue: the earliest
    simulated time at which a newly submitted task could start.
    ``fifo_queue`` records submitted task ids in submission order.
    """

    id: int
    name: str
    qubit_count: int
    quantum_volume: int
    clops: float
    d1cps: float
    next_free_at: float = 0.0
    fifo_queue: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.qubit_count < 1:
            raise ValueError(f"node {self.name!r}: qubit_count must be >= 1")
        if self.d1cps <= 0:
            raise ValueError(f"node {self.name!r}: d1cps must be > 0")
        if self.next_free_at < 0:
            raise ValueError(f"node {self.name!r}: next_free_at must be >= 0")


@dataclass(frozen=True)
class ExecutionRecord:
    """Outcome of one placement attempt.

    On failure (capacity violation) the timing fields are None and the node
    is left untouched; failure is an in-band outcome, not an exception.
    """

    task_id: int
    node_id: int
    dispatch_at: float
    start_at: float | None
    wait_s: float | None
    exec_s: float | None
    completion_s: float | None
    success: bool


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    qubits: int
    qv: int
    clops: float
    d1cps: float


# Built-in node models (IBM Quantum system benchmarks: qubits, QV, CLOPS, D1CPS).
_BUILTIN_SPECS = (
    CatalogEntry("washington", 127, 64, 850, 16967.5),
    CatalogEntry("kolkata", 27, 128, 2000, 39900),
    CatalogEntry("hanoi", 27, 64, 2300, 45935),
    CatalogEntry("perth", 7, 32, 2900, 57905),
    CatalogEntry("lagos", 7, 32, 2700, 53865),
)

_CATALOG_KEYS = {"name", "qubits", "qv", "clops", "d1cps"}


@dataclass
class NodeCatalog:
    """An ordered list of node models; names are unique."""

    entries: list[CatalogEntry]

    def __post_init__(self) -> None:
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise CatalogError("catalog names must be unique")

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, name: str) -> CatalogEntry:
        for entry in self.entries:
            if entry.name == name:
                return entry
        raise UnknownNodeModel(f"unknown node model {name!r}; known: {[e.name for e in self.entries]}")

    def build_nodes(self) -> list[QNode]:
        """Fresh idle nodes for every entry, ids assigned in catalog order."""
        return [
            QNode(i, e.name, e.qubits, e.qv, e.clops, e.d1cps)
            for i, e in enumerate(self.entries)
        ]

    @classmethod
    def default(cls) -> "NodeCatalog":
        return cls(list(_BUILTIN_SPECS))

    @classmethod
    def from_json(cls, path: str | Path) -> "NodeCatalog":
        """Load a catalog from a JSON array of {"name","qubits","qv","clops","d1cps"}.

        Unknown keys are rejected so typos do not silently drop capacity data.
        """
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, list):
            raise CatalogError("catalog file must contain a JSON array")
        entries = []
        for i, obj in enumerate(raw):
            if not isinstance(obj, dict):
                raise CatalogError(f"catalog entry {i} is not an object")
            extra = set(obj) - _CATALOG_KEYS
            if extra:
                raise CatalogError(f"catalog entry {i}: unknown keys {sorted(extra)}")
            missing = _CATALOG_KEYS - set(obj)
            if missing:
                raise CatalogError(f"catalog entry {i}: missing keys {sorted(missing)}")
            try:
                entries.append(
                    CatalogEntry(
                        str(obj["name"]),
                        int(obj["qubits"]),
                        int(obj["qv"]),
                        float(obj["clops"]),
                        float(obj["d1cps"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise CatalogError(f"catalog entry {i}: {exc}") from exc
        return cls(entries)

    def to_json(self, path: str | Path) -> None:
        rows = [
            {"name": e.name, "qubits": e.qubits, "qv": e.qv, "clops": e.clops, "d1cps": e.d1cps}
            for e in self.entries
        ]
        Path(path).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def create_ibmq_node(name: str, node_id: int = 0, catalog: NodeCatalog | None = None) -> QNode:
    """Build an idle node from the built-in catalog (or a user-supplied one)."""
    entry = (catalog or NodeCatalog.default()).get(name)
    return QNode(node_id, entry.name, entry.qubits, entry.qv, entry.clops, entry.d1cps)


def estimate_execution_time(task: QTask, node: QNode) -> float:
    """Execution time in seconds: (depth-1 layers x shots) / node D1CPS."""
    return (task.depth1_layers * task.shots) / node.d1cps


def backlog(node: QNode, at: float) -> float:
    """Seconds of queued work remaining on `node` at time `at` (clamped at 0)."""
    return max(0.0, node.next_free_at - at)


def submit(task: QTask, node: QNode, at: float, engine: Engine | None = None) -> ExecutionRecord:
    """Dispatch `task` to `node` at time `at` and return the execution record.

    A task needing more qubits than the node has yields a failed record and
    leaves the node untouched. Otherwise the task is queued FIFO: it starts
    at max(at, node.next_free_at), and start/complete events are scheduled
    on the engine when one is given.
    """
    if at < task.arrival_at:
        raise ValueError(
            f"task {task.id} dispatched at t={at} before its arrival at t={task.arrival_at}"
        )
    if task.qubit_count > node.qubit_count:
        return ExecutionRecord(task.id, node.id, at, None, None, None, None, False)

    start_at = max(at, node.next_free_at)
    exec_s = estimate_execution_time(task, node)
    wait_s = start_at - at
    completion_s = wait_s + exec_s
    node.next_free_at = start_at + exec_s
    node.fifo_queue.append(task.id)
    if engine is not None:
        engine.schedule(start_at, ("execution-start", task.id, node.id))
        engine.schedule(start_at + exec_s, ("execution-complete", task.id, node.id))
    return ExecutionRecord(task.id, node.id, at, start_at, wait_s, exec_s, completion_s, True)


def clone_node(node: QNode) -> QNode:
    """Independent copy of a node (used for lookahead without side effects)."""
    return replace(node, fifo_queue=list(node.fifo_queue))


class Broker:
    """Dispatches tasks to nodes and keeps the record trace of all attempts."""

    def __init__(self, engine: Engine, nodes: list[QNode]) -> None:
        self.engine = engine
        self.nodes = nodes
        self.records: list[ExecutionRecord] = []

    def submit(self, task: QTask, node_index: int, at: float | None = None) -> ExecutionRecord:
        if not 0 <= node_index < len(self.nodes):
            raise IndexError(f"node index {node_index} out of range [0, {len(self.nodes)})")
        record = submit(task, self.nodes[node_index], self.engine.now() if at is None else at, self.engine)
        self.records.append(record)
        return record

    def backlogs(self, at: float) -> list[float]:
        return [backlog(n, at) for n in self.nodes]
