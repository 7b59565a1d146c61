"""Environment API compliance check.

With gymnasium installed this defers to the standard env checker;
otherwise it runs an equivalent set of structural checks against the same
contract (reset/step signatures, return shapes and types, space
containment, seeded-reset determinism).
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised only where gymnasium is installed
    from gymnasium.utils.env_checker import check_env as _gym_check_env
except ImportError:
    _gym_check_env = None


def api_check(env) -> None:
    """Raise AssertionError (or the checker's error) if `env` breaks the API."""
    if _gym_check_env is not None:
        _gym_check_env(env, skip_render_check=True)
        return

    assert hasattr(env, "observation_space"), "missing observation_space"
    assert hasattr(env, "action_space"), "missing action_space"
    assert callable(getattr(env, "reset", None)), "missing reset()"
    assert callable(getattr(env, "step", None)), "missing step()"
    assert callable(getattr(env, "close", None)), "missing close()"

    out = env.reset(seed=0)
    assert isinstance(out, tuple) and len(out) == 2, "reset() must return (obs, info)"
    obs, info = out
    assert isinstance(info, dict), "reset info must be a dict"
    assert env.observation_space.contains(obs), f"reset obs {obs!r} not in observation_space"

    again, _ = env.reset(seed=0)
    assert np.array_equal(np.asarray(obs), np.asarray(again)), "same-seed resets must agree"

    env.action_space.seed(0)
    for _ in range(5):
        action = env.action_space.sample()
        assert env.action_space.contains(action), f"sampled action {action!r} not in action_space"
        out = env.step(action)
        assert isinstance(out, tuple) and len(out) == 5, "step() must return a 5-tuple"
        obs, reward, terminated, truncated, info = out
        assert env.observation_space.contains(obs), f"step obs {obs!r} not in observation_space"
        assert isinstance(float(reward), float)
        assert isinstance(terminated, bool), "terminated must be a bool"
        assert isinstance(truncated, bool), "truncated must be a bool"
        assert isinstance(info, dict), "step info must be a dict"
        if terminated or truncated:
            obs, _ = env.reset()
            assert env.observation_space.contains(obs)
