"""Command-line entry point: dataset generation, feature extraction,
simulation, training, evaluation, and the environment protocol server.

Configuration comes from an optional JSON file plus flags; flags win over
file values, file values win over defaults. Every command writes its
primary outputs as files and is deterministic under a fixed seed.
Exit codes: 0 success, 1 partial success with warnings, 2 invalid
configuration.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .cloud import NodeCatalog
from .env import EnvConfig, QCloudEnv
from .qasm import ParseError, UnsupportedVersion, extract_features_qasm
from .serve import PROTOCOL_VERSION, serve_stdio, serve_tcp
from .workload import (
    Dataset,
    GenerationParams,
    InvalidParams,
    dataset_from_features,
    format_seconds,
    generate_dataset,
    load_csv,
    load_features_csv,
    save_csv,
    save_features_csv,
)

TRACE_HEADER = ["task_id", "node", "dispatch_s", "start_s", "wait_s", "exec_s", "completion_s", "success"]


class ConfigError(Exception):
    """Invalid run configuration (maps to exit code 2)."""


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return config


def merged(config: dict, **flags) -> dict:
    out = dict(config)
    for key, value in flags.items():
        if value is not None and value != ():
            out[key] = value
    return out


def resolve_out_dir(cfg: dict) -> Path:
    out = Path(cfg.get("out", "."))
    if not out.is_dir():
        raise ConfigError(f"output directory does not exist: {out}")
    return out


def resolve_catalog(cfg: dict) -> NodeCatalog:
    path = cfg.get("catalog")
    if path is None:
        return NodeCatalog.default()
    if not Path(path).is_file():
        raise ConfigError(f"catalog file not found: {path}")
    try:
        return NodeCatalog.from_json(path)
    except ValueError as exc:
        raise ConfigError(f"bad catalog file {path}: {exc}") from exc


def resolve_dataset(cfg: dict) -> Dataset:
    path = cfg.get("dataset")
    if path is None:
        raise ConfigError("a dataset is required (--dataset or config 'dataset')")
    if not Path(path).is_file():
        raise ConfigError(f"dataset file not found: {path}")
    try:
        return load_csv(path)
    except Exception as exc:
        raise ConfigError(f"bad dataset file {path}: {exc}") from exc


def resolve_seed(cfg: dict) -> int:
    seed = cfg.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or config 'seed'); wall-clock seeding is not supported")
    return int(seed)


def parse_range(text: str | list | tuple, label: str) -> tuple[int, int]:
    if isinstance(text, (list, tuple)):
        lo, hi = text
        return int(lo), int(hi)
    try:
        lo, _, hi = str(text).partition(",")
        return int(lo), int(hi)
    except ValueError as exc:
        raise ConfigError(f"{label} must look like 'LO,HI', got {text!r}") from exc


def generation_params(cfg: dict) -> GenerationParams:
    g = cfg.get("generate", {})
    defaults = GenerationParams()
    try:
        params = GenerationParams(
            n_subsets=int(g.get("subsets", defaults.n_subsets)),
            tasks_per_subset=int(g.get("tasks_per_subset", defaults.tasks_per_subset)),
            window_s=float(g.get("window_s", defaults.window_s)),
            qubit_range=parse_range(g.get("qubit_range", defaults.qubit_range), "qubit_range"),
            depth_range=parse_range(g.get("depth_range", defaults.depth_range), "depth_range"),
            shots_range=parse_range(g.get("shots_range", defaults.shots_range), "shots_range"),
            app_tags=tuple(g.get("app_tags", defaults.app_tags)),
            arrival_process=str(g.get("arrival_process", defaults.arrival_process)),
        )
        params.validate()
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from exc
    return params


def build_env(cfg: dict, catalog: NodeCatalog, dataset: Dataset) -> QCloudEnv:
    e = cfg.get("env", {})
    try:
        env_config = EnvConfig(
            catalog=catalog,
            dataset=dataset,
            reward_success_mode=e.get("reward_mode", "inverse_completion"),
            delta_plus=float(e.get("delta_plus", 1.0)),
            penalty=float(e.get("penalty", -10.0)),
            max_steps_per_episode=e.get("max_steps_per_episode"),
            normalize=bool(e.get("normalize", False)),
        )
        return QCloudEnv(env_config)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_policy(spec: str, env: QCloudEnv, catalog: NodeCatalog, seed: int):
    from .agents import GreedyPolicy, PolicyFormatError, RandomPolicy, RoundRobinPolicy, load_policy

    if spec == "random":
        return RandomPolicy(env.n_actions, seed=seed)
    if spec == "round_robin":
        return RoundRobinPolicy(env.n_actions)
    if spec == "greedy":
        return GreedyPolicy(catalog)
    if Path(spec).is_file():
        try:
            return load_policy(spec)
        except PolicyFormatError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown policy {spec!r} (not a name or a readable file)")


def write_trace_csv(records, path: Path) -> None:
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in records:
            if r.success:
                writer.writerow(
                    [
                        r.task_id,
                        r.node_id,
                        format_seconds(r.dispatch_at),
                        format_seconds(r.start_at),
                        format_seconds(r.wait_s),
                        format_seconds(r.exec_s),
                        format_seconds(r.completion_s),
                        1,
                    ]
                )
            else:
                writer.writerow([r.task_id, r.node_id, format_seconds(r.dispatch_at), "", "", "", "", 0])


def write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- command bodies (importable; the click layer only parses flags) ------------


def cmd_generate(cfg: dict) -> Path:
    out_dir = resolve_out_dir(cfg)
    seed = resolve_seed(cfg)
    params = generation_params(cfg)
    features_csv = cfg.get("generate", {}).get("features_csv")
    if features_csv:
        if not Path(features_csv).is_file():
            raise ConfigError(f"features file not found: {features_csv}")
        pool = load_features_csv(features_csv)
        try:
            dataset = dataset_from_features(pool, params, seed)
        except InvalidParams as exc:
            raise ConfigError(str(exc)) from exc
    else:
        dataset = generate_dataset(params, seed)
    path = out_dir / "dataset.csv"
    save_csv(dataset, path)
    n_tasks = sum(len(s) for s in dataset.subsets)
    click.echo(f"wrote {path} ({n_tasks} tasks in {dataset.n_subsets} subsets)")
    return path


def cmd_extract(paths: list[str], out_dir: Path) -> tuple[Path, int, int]:
    features = []
    failed = 0
    for p in paths:
        try:
            if p == "-":
                features.append(extract_features_qasm(sys.stdin.read(), name="stdin"))
            else:
                source = Path(p).read_text(encoding="utf-8")
                features.append(extract_features_qasm(source, name=Path(p).stem))
        except (OSError, ParseError, UnsupportedVersion) as exc:
            click.echo(f"warning: skipping {p}: {exc}", err=True)
            failed += 1
    out_path = out_dir / "features.csv"
    save_features_csv(features, out_path)
    click.echo(f"wrote {out_path} ({len(features)} circuits, {failed} skipped)")
    return out_path, len(features), failed


def cmd_simulate(cfg: dict) -> tuple[Path, Path]:
    out_dir = resolve_out_dir(cfg)
    seed = resolve_seed(cfg)
    catalog = resolve_catalog(cfg)
    dataset = resolve_dataset(cfg)
    env = build_env(cfg, catalog, dataset)
    policy_specs = cfg.get("policy", ["greedy"])
    if isinstance(policy_specs, str):
        policy_specs = [policy_specs]
    policy = build_policy(policy_specs[0], env, catalog, seed)

    start_round = int(cfg.get("round", 0))
    rounds = int(cfg.get("rounds", 1))
    if not 0 <= start_round < dataset.n_subsets:
        raise ConfigError(f"round {start_round} out of range [0, {dataset.n_subsets})")

    all_records = []
    per_round = []
    for k in range(rounds):
        obs = env.reset(round=(start_round + k) % dataset.n_subsets)
        done = False
        while not done:
            result = env.step(policy.select(obs))
            obs = result.observation
            done = result.terminated or result.truncated
        stats = env.episode_stats()
        per_round.append(
            {
                "round": (start_round + k) % dataset.n_subsets,
                "reward_sum": stats.reward_sum,
                "steps": stats.steps,
                "violations": stats.violations,
                "mean_completion_s": stats.mean_completion_s,
            }
        )
        all_records.extend(env.records())

    successes = [r for r in all_records if r.success]
    trace_path = out_dir / "trace.csv"
    stats_path = out_dir / "stats.json"
    write_trace_csv(all_records, trace_path)
    write_json(
        {
            "policy": policy_specs[0],
            "seed": seed,
            "rounds": rounds,
            "tasks": len(successes),
            "attempts": len(all_records),
            "violations": len(all_records) - len(successes),
            "reward_sum": sum(p["reward_sum"] for p in per_round),
            "total_completion_s": sum(r.completion_s for r in successes),
            "mean_completion_s": (
                sum(r.completion_s for r in successes) / len(successes) if successes else 0.0
            ),
            "per_round": per_round,
        },
        stats_path,
    )
    click.echo(f"wrote {trace_path} and {stats_path}")
    return trace_path, stats_path


def cmd_train(cfg: dict) -> tuple[Path, Path]:
    from .agents import DqnConfig, InvalidHyperparameters, QLearningConfig, save_policy, train_dqn, train_qlearning

    out_dir = resolve_out_dir(cfg)
    seed = resolve_seed(cfg)
    catalog = resolve_catalog(cfg)
    dataset = resolve_dataset(cfg)
    env = build_env(cfg, catalog, dataset)
    t = cfg.get("train", {})
    trainer = t.get("trainer", "qtable")
    try:
        if trainer == "qtable":
            hp = QLearningConfig(
                alpha=float(t.get("alpha", 0.1)),
                gamma=float(t.get("gamma", 0.95)),
                epsilon_schedule=tuple(t.get("epsilon", (1.0, 0.01, 15000))),
                steps_per_iteration=int(t.get("steps_per_iteration", 1000)),
            )
            policy, curve = train_qlearning(env, int(t.get("episodes", 500)), hp, seed)
            policy_path = out_dir / "policy.qtable.json"
        elif trainer == "dqn":
            d = t.get("dqn", {})
            dqn_cfg = DqnConfig(
                learning_rate=float(d.get("learning_rate", 0.01)),
                replay_capacity=int(d.get("replay_capacity", 60000)),
                n_step=int(d.get("n_step", 5)),
                prioritized=bool(d.get("prioritized", True)),
                pr_alpha=float(d.get("pr_alpha", 0.5)),
                pr_beta=float(d.get("pr_beta", 0.5)),
                pr_epsilon=float(d.get("pr_epsilon", 3e-6)),
                hidden_layers=tuple(d.get("hidden_layers", (64, 64))),
                gamma=float(d.get("gamma", 0.99)),
                epsilon_schedule=tuple(d.get("epsilon", (1.0, 0.02, 20000))),
                target_sync_every=int(d.get("target_sync_every", 500)),
                batch_size=int(d.get("batch_size", 32)),
                steps_per_iteration=int(d.get("steps_per_iteration", 1000)),
                learning_starts=int(d.get("learning_starts", 500)),
                num_atoms=d.get("num_atoms"),
            )
            policy, curve = train_dqn(env, int(t.get("iterations", 50)), dqn_cfg, seed)
            policy_path = out_dir / "policy.dqn.bin"
        else:
            raise ConfigError(f"unknown trainer {trainer!r} (expected 'qtable' or 'dqn')")
    except InvalidHyperparameters as exc:
        raise ConfigError(str(exc)) from exc
    save_policy(policy, policy_path)
    curve_path = out_dir / "curve.csv"
    curve.to_csv(curve_path)
    click.echo(f"wrote {policy_path} and {curve_path} ({len(curve)} iterations)")
    return policy_path, curve_path


def cmd_evaluate(cfg: dict) -> Path:
    from .agents import evaluate

    out_dir = resolve_out_dir(cfg)
    seed = resolve_seed(cfg)
    catalog = resolve_catalog(cfg)
    dataset = resolve_dataset(cfg)
    env = build_env(cfg, catalog, dataset)
    policy_specs = cfg.get("policy", ["greedy"])
    if isinstance(policy_specs, str):
        policy_specs = [policy_specs]
    episodes = int(cfg.get("episodes", 100))
    start_round = int(cfg.get("round", 0))
    report = {}
    for spec in policy_specs:
        policy = build_policy(spec, env, catalog, seed)
        report[spec] = evaluate(policy, env, episodes, seed=seed, start_round=start_round).as_dict()
    path = out_dir / "eval.json"
    write_json({"seed": seed, "episodes": episodes, "policies": report}, path)
    click.echo(f"wrote {path}")
    return path


def cmd_serve_env(cfg: dict, listen: str | None, stdio: bool) -> None:
    catalog = resolve_catalog(cfg)
    dataset = resolve_dataset(cfg)

    def factory() -> QCloudEnv:
        return build_env(cfg, catalog, dataset)

    if listen:
        host, _, port_text = listen.rpartition(":")
        if not host or not port_text.isdigit():
            raise ConfigError(f"--listen must be HOST:PORT, got {listen!r}")
        click.echo(f"serving protocol v{PROTOCOL_VERSION} on {host}:{port_text}", err=True)
        serve_tcp(factory, host, int(port_text))
    else:
        serve_stdio(factory)


# -- click wiring ---------------------------------------------------------------


def _run(body, *args) -> None:
    try:
        body(*args)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@click.group()
@click.version_option()
def main() -> None:
    """Quantum cloud task-placement simulator and learning environment."""


@main.command("generate")
@click.option("--config", "config_path", type=str, default=None, help="JSON config file.")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None, help="Existing output directory.")
@click.option("--subsets", type=int, default=None)
@click.option("--tasks", "tasks_per_subset", type=int, default=None)
@click.option("--window", "window_s", type=float, default=None)
@click.option("--qubit-range", type=str, default=None, help="LO,HI inclusive.")
@click.option("--depth-range", type=str, default=None, help="LO,HI inclusive.")
@click.option("--shots-range", type=str, default=None, help="LO,HI inclusive.")
@click.option("--arrival", type=click.Choice(["uniform", "poisson"]), default=None)
@click.option("--from-features", "features_csv", type=str, default=None, help="Sample circuits from a features CSV.")
def generate_cmd(config_path, seed, out, subsets, tasks_per_subset, window_s, qubit_range, depth_range, shots_range, arrival, features_csv):
    """Write a synthetic task dataset CSV."""

    def body():
        cfg = merged(load_config(config_path), seed=seed, out=out)
        g = dict(cfg.get("generate", {}))
        for key, value in (
            ("subsets", subsets),
            ("tasks_per_subset", tasks_per_subset),
            ("window_s", window_s),
            ("qubit_range", qubit_range),
            ("depth_range", depth_range),
            ("shots_range", shots_range),
            ("arrival_process", arrival),
            ("features_csv", features_csv),
        ):
            if value is not None:
                g[key] = value
        cfg["generate"] = g
        cmd_generate(cfg)

    _run(body)


@main.command("extract")
@click.argument("qasm_paths", nargs=-1, type=str)
@click.option("--out", type=str, default=None, help="Existing output directory.")
def extract_cmd(qasm_paths, out):
    """Extract circuit features from OpenQASM 2.0 files into a CSV."""

    def body():
        out_dir = resolve_out_dir({"out": out} if out else {})
        _, _, failed = cmd_extract(list(qasm_paths), out_dir)
        if failed:
            sys.exit(1)

    _run(body)


@main.command("simulate")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--catalog", type=str, default=None)
@click.option("--policy", type=str, default=None, help="greedy | random | round_robin | policy file.")
@click.option("--round", "round_", type=int, default=None, help="First round to simulate.")
@click.option("--rounds", type=int, default=None, help="Number of rounds.")
def simulate_cmd(config_path, seed, out, dataset, catalog, policy, round_, rounds):
    """Run episodes under a policy; write trace.csv and stats.json."""

    def body():
        cfg = merged(
            load_config(config_path),
            seed=seed,
            out=out,
            dataset=dataset,
            catalog=catalog,
            policy=[policy] if policy else None,
            round=round_,
            rounds=rounds,
        )
        cmd_simulate(cfg)

    _run(body)


@main.command("train")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--catalog", type=str, default=None)
@click.option("--trainer", type=click.Choice(["qtable", "dqn"]), default=None)
@click.option("--episodes", type=int, default=None, help="Q-learning episodes.")
@click.option("--iterations", type=int, default=None, help="DQN iterations.")
def train_cmd(config_path, seed, out, dataset, catalog, trainer, episodes, iterations):
    """Train a policy; write the policy file and curve.csv."""

    def body():
        cfg = merged(load_config(config_path), seed=seed, out=out, dataset=dataset, catalog=catalog)
        t = dict(cfg.get("train", {}))
        for key, value in (("trainer", trainer), ("episodes", episodes), ("iterations", iterations)):
            if value is not None:
                t[key] = value
        cfg["train"] = t
        cmd_train(cfg)

    _run(body)


@main.command("evaluate")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=str, default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--catalog", type=str, default=None)
@click.option("--policy", "policies", type=str, multiple=True, help="Repeatable; names or policy files.")
@click.option("--episodes", type=int, default=None)
@click.option("--round", "round_", type=int, default=None)
def evaluate_cmd(config_path, seed, out, dataset, catalog, policies, episodes, round_):
    """Evaluate one or more policies side by side; write eval.json."""

    def body():
        cfg = merged(
            load_config(config_path),
            seed=seed,
            out=out,
            dataset=dataset,
            catalog=catalog,
            policy=list(policies) if policies else None,
            episodes=episodes,
            round=round_,
        )
        cmd_evaluate(cfg)

    _run(body)


@main.command("serve-env")
@click.option("--config", "config_path", type=str, default=None)
@click.option("--dataset", type=str, default=None)
@click.option("--catalog", type=str, default=None)
@click.option("--listen", type=str, default=None, help="HOST:PORT for TCP mode.")
@click.option("--stdio", is_flag=True, default=False, help="Serve one session over stdin/stdout (default).")
@click.option("--normalize", is_flag=True, default=None)
def serve_env_cmd(config_path, dataset, catalog, listen, stdio, normalize):
    """Serve the environment over the newline-delimited JSON protocol."""

    def body():
        cfg = merged(load_config(config_path), dataset=dataset, catalog=catalog)
        if normalize is not None:
            env_cfg = dict(cfg.get("env", {}))
            env_cfg["normalize"] = normalize
            cfg["env"] = env_cfg
        cmd_serve_env(cfg, listen, stdio)

    _run(body)


if __name__ == "__main__":
    main()
