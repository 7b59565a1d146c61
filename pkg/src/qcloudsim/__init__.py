"""Deterministic discrete-event simulation of a quantum cloud data center,
exposed as a step/reset learning environment for task placement, with
workload tooling, baseline schedulers, and native trainers."""

from .cloud import (
    Broker,
    CatalogEntry,
    ExecutionRecord,
    NodeCatalog,
    QNode,
    QTask,
    UnknownNodeModel,
    backlog,
    create_ibmq_node,
    estimate_execution_time,
    submit,
)
from .engine import Engine, SchedulingInPast
from .env import EnvConfig, EpisodeStats, QCloudEnv, StepResult, normalize
from .qasm import CircuitFeatures, ParseError, UnsupportedVersion, extract_features_qasm
from .workload import (
    Dataset,
    FormatError,
    GenerationParams,
    InvalidParams,
    RoundOutOfRange,
    dataset_from_features,
    generate_dataset,
    get_subset,
    load_csv,
    save_csv,
)

__version__ = "0.1.0"

__all__ = [
    "Broker",
    "CatalogEntry",
    "CircuitFeatures",
    "Dataset",
    "Engine",
    "EnvConfig",
    "EpisodeStats",
    "ExecutionRecord",
    "FormatError",
    "GenerationParams",
    "InvalidParams",
    "NodeCatalog",
    "ParseError",
    "QCloudEnv",
    "QNode",
    "QTask",
    "RoundOutOfRange",
    "SchedulingInPast",
    "StepResult",
    "UnknownNodeModel",
    "UnsupportedVersion",
    "backlog",
    "create_ibmq_node",
    "dataset_from_features",
    "estimate_execution_time",
    "extract_features_qasm",
    "generate_dataset",
    "get_subset",
    "load_csv",
    "normalize",
    "save_csv",
    "submit",
]
