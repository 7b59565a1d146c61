from .curves import CurveRow, TrainingCurve
from .dqn import DqnConfig, DqnPolicy, train_dqn
from .evaluate import EvaluationReport, evaluate
from .policies import (
    GreedyPolicy,
    PolicyFormatError,
    RandomPolicy,
    RoundRobinPolicy,
    load_policy,
    oracle_step,
    save_policy,
    select_greedy,
)
from .tabular import InvalidHyperparameters, QLearningConfig, QTablePolicy, train_qlearning

__all__ = [
    "CurveRow",
    "TrainingCurve",
    "DqnConfig",
    "DqnPolicy",
    "train_dqn",
    "EvaluationReport",
    "evaluate",
    "GreedyPolicy",
    "PolicyFormatError",
    "RandomPolicy",
    "RoundRobinPolicy",
    "load_policy",
    "oracle_step",
    "save_policy",
    "select_greedy",
    "InvalidHyperparameters",
    "QLearningConfig",
    "QTablePolicy",
    "train_qlearning",
]
