"""Scenario-based experiment runner: seeded training runs, aggregation, output.

A scenario configuration names the layout, agent count, algorithms, reward
schemes, and episode/seed budget. Each (algorithm, scheme, seed) run trains
one learner, logging one record per episode. Aggregation produces per-episode
means with 95% confidence intervals over seeds, emitted as CSV and SVG line
plots. Runs checkpoint periodically and resume after interruption.
"""

from __future__ import annotations

import csv
import json
import os
import pickle
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .env import Action, CounterSnapshot, FactoryEnv
from .layout import FactoryLayout, default_layout, load_layout
from .learners import ALGORITHMS, Learner, LearnerConfig, global_state, global_state_dim
from .rewards import (
    RewardScheme,
    ShapingConfig,
    active_weights,
    scheme_from_dict,
    scheme_table,
    shaped_reward,
)

METRICS = {
    "steps": "steps_until_solved",
    "soft": "soft_violations",
    "hard": "hard_violations",
}

_RECORD_COLUMNS = (
    "episode",
    "steps_until_solved",
    "soft_violations",
    "hard_violations",
    "items_completed",
    "tasks_finished",
    "step_count",
    "machines_used",
    "path_violations",
    "agent_collisions",
    "emergency_violations",
)


@dataclass
class EpisodeRecord:
    """Per-episode outcome of one training run."""

    episode: int
    steps_until_solved: int
    soft_violations: int
    hard_violations: int
    items_completed: int
    tasks_finished: int
    step_count: int
    machines_used: int
    path_violations: int
    agent_collisions: int
    emergency_violations: int
    wall_time: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one experiment needs; presets 1-4 mirror the evaluation setups."""

    scenario: int | None = None
    n_agents: int = 4
    algorithms: tuple[str, ...] = ("dqn",)
    schemes: tuple[str, ...] = ("r1",)
    episodes: int = 5000
    step_limit: int = 50
    gamma: float = 0.95
    seeds: int = 10
    rx_boundaries: tuple[int, ...] = (2000, 3000)
    emergency: bool = False
    absorbing: bool = False
    layout: FactoryLayout | None = None  # None selects the built-in floor
    tasks_per_bucket: int = 2
    n_buckets: int = 2
    lr: float = 1e-3
    hidden: tuple[int, ...] = (64, 32)
    target_sync: int = 4000
    checkpoint_every: int = 500
    custom_schemes: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.scenario is not None and self.scenario not in (1, 2, 3, 4):
            raise ValueError("scenario must be 1..4")
        if self.scenario == 4 and not (
            self.gamma == 1.0 and self.absorbing and self.emergency
        ):
            raise ValueError(
                "scenario 4 requires gamma=1.0, absorbing mode, and the emergency signal"
            )
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}")
        table = scheme_table(self.rx_boundaries)
        for name in self.schemes:
            if name not in table and name not in self.custom_schemes:
                raise ValueError(f"unknown reward scheme {name!r}")
        if min(self.episodes, self.step_limit, self.seeds, self.n_agents) < 1:
            raise ValueError("episodes, step_limit, seeds, and n_agents must be >= 1")

    def resolve_layout(self) -> FactoryLayout:
        return self.layout if self.layout is not None else default_layout()

    def resolve_scheme(self, name: str) -> RewardScheme:
        if name in self.custom_schemes:
            return self.custom_schemes[name]
        return scheme_table(self.rx_boundaries)[name]

    def record_cap(self) -> int:
        """Largest recordable steps_until_solved (absorbing adds one step)."""
        return self.step_limit + (1 if self.absorbing else 0)


def scenario_preset(scenario: int) -> ScenarioConfig:
    """The four evaluation setups.

    1: isolated reward components on 4 DQN agents (r0..r5).
    2: combined components at scale, 8 agents, DQN/VDN/QMIX on r1 vs r5.
    3: scheduled scheme rx against r1/r5, 8 agents, all algorithms.
    4: emergency signal with 6 DQN agents, rx against r5, undiscounted
       with absorbing episode ends.
    """
    if scenario == 1:
        return ScenarioConfig(
            scenario=1,
            n_agents=4,
            algorithms=("dqn",),
            schemes=("r0", "r1", "r2", "r3", "r4", "r5"),
        )
    if scenario == 2:
        return ScenarioConfig(
            scenario=2,
            n_agents=8,
            algorithms=("dqn", "vdn", "qmix"),
            schemes=("r1", "r5"),
        )
    if scenario == 3:
        return ScenarioConfig(
            scenario=3,
            n_agents=8,
            algorithms=("dqn", "vdn", "qmix"),
            schemes=("r1", "r5", "rx"),
            rx_boundaries=(2000, 3000),
        )
    if scenario == 4:
        return ScenarioConfig(
            scenario=4,
            n_agents=6,
            algorithms=("dqn",),
            schemes=("r5", "rx"),
            rx_boundaries=(2500,),
            gamma=1.0,
            absorbing=True,
            emergency=True,
        )
    raise ValueError("scenario must be 1..4")


def load_config(source) -> ScenarioConfig:
    """Read a scenario config document (JSON path, text, or dict)."""
    if isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        else:
            doc = json.loads(source)
    if not isinstance(doc, dict):
        raise ValueError("config document must be a JSON object")
    cfg = scenario_preset(doc["scenario"]) if doc.get("scenario") else ScenarioConfig()
    simple = {
        "n_agents": int,
        "episodes": int,
        "step_limit": int,
        "gamma": float,
        "seeds": int,
        "emergency": bool,
        "absorbing": bool,
        "tasks_per_bucket": int,
        "n_buckets": int,
        "lr": float,
        "checkpoint_every": int,
    }
    changes = {}
    for key, cast in simple.items():
        if key in doc:
            changes[key] = cast(doc[key])
    for key in ("algorithms", "schemes"):
        if key in doc:
            changes[key] = tuple(doc[key])
    if "rx_boundaries" in doc:
        changes["rx_boundaries"] = tuple(int(b) for b in doc["rx_boundaries"])
    if "hidden" in doc:
        changes["hidden"] = tuple(int(h) for h in doc["hidden"])
    if "layout" in doc and doc["layout"]:
        changes["layout"] = load_layout(doc["layout"])
    if "custom_schemes" in doc:
        changes["custom_schemes"] = {
            name: scheme_from_dict(name, body)
            for name, body in doc["custom_schemes"].items()
        }
    cfg = replace(cfg, **changes)
    cfg.validate()
    return cfg


def episode_seed(run_seed: int, episode: int) -> int:
    """Deterministic per-episode environment seed, independent of run state."""
    return int(np.random.SeedSequence([run_seed, episode]).generate_state(1)[0])


def _run_paths(out_dir: str, algo: str, scheme: str, seed: int) -> dict[str, str]:
    stem = f"{algo}_{scheme}_seed{seed}"
    return {
        "records": os.path.join(out_dir, f"records_{stem}.csv"),
        "trainlog": os.path.join(out_dir, f"trainlog_{stem}.csv"),
        "checkpoint": os.path.join(out_dir, f"checkpoint_{stem}.pkl"),
    }


def run_single(
    cfg: ScenarioConfig,
    algo: str,
    scheme_name: str,
    seed: int,
    out_dir: str | None = None,
    episode_callback=None,
) -> list[EpisodeRecord]:
    """Train one learner for the configured episode budget.

    With ``out_dir`` set, per-episode records and a training log are written
    as CSV, a checkpoint is dropped every ``cfg.checkpoint_every`` episodes,
    and an interrupted run resumes from its checkpoint (or returns the stored
    records if it already finished).
    """
    cfg.validate()
    scheme = cfg.resolve_scheme(scheme_name)
    layout = cfg.resolve_layout()
    paths = _run_paths(out_dir, algo, scheme_name, seed) if out_dir else None

    if paths and os.path.exists(paths["records"]) and not os.path.exists(paths["checkpoint"]):
        return _read_records_csv(paths["records"])

    env = FactoryEnv(
        layout,
        n_agents=cfg.n_agents,
        tasks_per_bucket=cfg.tasks_per_bucket,
        n_buckets=cfg.n_buckets,
        step_limit=cfg.step_limit,
        emergency=cfg.emergency,
    )
    obs_dim = env.observation_size()
    learner = Learner(
        LearnerConfig(
            n_agents=cfg.n_agents,
            obs_dim=obs_dim,
            algo=algo,
            hidden=cfg.hidden,
            lr=cfg.lr,
            gamma=cfg.gamma,
            target_sync_every=cfg.target_sync,
            per_beta_steps=cfg.episodes * cfg.step_limit,
            state_dim=global_state_dim(cfg.n_agents, obs_dim) if algo == "qmix" else 0,
            seed=seed,
        )
    )
    records: list[EpisodeRecord] = []
    trainlog: list[tuple[int, int, float, float]] = []
    start_episode = 0

    if paths and os.path.exists(paths["checkpoint"]):
        with open(paths["checkpoint"], "rb") as fh:
            saved = pickle.load(fh)
        learner = saved["learner"]
        records = saved["records"]
        trainlog = saved["trainlog"]
        start_episode = saved["next_episode"]

    shaping = ShapingConfig(
        gamma_shape=1.0,
        scope="per_agent" if algo == "dqn" else "global",
        episodic_absorbing=cfg.absorbing,
    )
    use_state = algo == "qmix"

    for episode in range(start_episode, cfg.episodes):
        weights, reset_required = active_weights(scheme, episode)
        if reset_required:
            learner.apply_reset()
        if episode_callback is not None:
            episode_callback(episode, learner)
        t0 = time.monotonic()
        eps_start = learner.epsilon()
        losses: list[float] = []

        obs = env.reset(episode_seed(seed, episode))
        obs_mat = np.stack([obs[i] for i in range(cfg.n_agents)])
        counters = env.counters()
        solved_at = None

        for t in range(1, cfg.step_limit + 1):
            epsilon = learner.epsilon()
            active = env.active_agents()
            actions = learner.act({a: obs_mat[a] for a in active}, epsilon)
            state = global_state(obs_mat, t - 1, cfg.step_limit) if use_state else None
            _, done = env.step(actions)
            next_counters = env.counters()
            next_obs = env.observe_all()
            next_obs_mat = np.stack([next_obs[i] for i in range(cfg.n_agents)])
            rewards = np.array(
                [
                    shaped_reward(counters[i], next_counters[i], weights, shaping)
                    for i in range(cfg.n_agents)
                ]
            )
            action_row = np.full(cfg.n_agents, int(Action.NOOP), dtype=np.int64)
            for aid, act in actions.items():
                action_row[aid] = act
            next_state = global_state(next_obs_mat, env.t, cfg.step_limit) if use_state else None
            # bootstrap through step-limit timeouts; only true completion
            # (or the absorbing step below) ends the value recursion
            terminal = all(a.done for a in env.agents) and not cfg.absorbing
            next_active = set(env.active_agents())
            next_avail = np.array(
                [1.0 if i in next_active else 0.0 for i in range(cfg.n_agents)]
            )
            learner.store(
                obs_mat, action_row, rewards, next_obs_mat, terminal,
                state, next_state, next_avail,
            )
            loss = learner.learn()
            if loss is not None:
                losses.append(loss)
            obs_mat = next_obs_mat
            counters = next_counters
            if solved_at is None and all(a.done for a in env.agents):
                solved_at = t
            if done:
                break

        if cfg.absorbing:
            # one extra step into the zero-potential absorbing state
            rewards = np.array(
                [
                    shaped_reward(counters[i], counters[i], weights, shaping, terminal=True)
                    for i in range(cfg.n_agents)
                ]
            )
            state = global_state(obs_mat, env.t, cfg.step_limit) if use_state else None
            noops = np.full(cfg.n_agents, int(Action.NOOP), dtype=np.int64)
            learner.store(
                obs_mat, noops, rewards, obs_mat, True, state, state,
                np.zeros(cfg.n_agents),
            )
            loss = learner.learn()
            if loss is not None:
                losses.append(loss)

        totals = env.total_counters()
        records.append(
            EpisodeRecord(
                episode=episode,
                steps_until_solved=solved_at if solved_at is not None else cfg.record_cap(),
                soft_violations=totals.path_violations
                + totals.agent_collisions
                + (totals.machines_used - totals.tasks_finished),
                hard_violations=totals.emergency_violations,
                items_completed=totals.items_completed,
                tasks_finished=totals.tasks_finished,
                step_count=totals.step_count,
                machines_used=totals.machines_used,
                path_violations=totals.path_violations,
                agent_collisions=totals.agent_collisions,
                emergency_violations=totals.emergency_violations,
                wall_time=time.monotonic() - t0,
            )
        )
        trainlog.append(
            (
                episode,
                learner.env_steps,
                eps_start,
                float(np.mean(losses)) if losses else float("nan"),
            )
        )
        if paths and (episode + 1) % cfg.checkpoint_every == 0 and episode + 1 < cfg.episodes:
            with open(paths["checkpoint"], "wb") as fh:
                pickle.dump(
                    {
                        "learner": learner,
                        "records": records,
                        "trainlog": trainlog,
                        "next_episode": episode + 1,
                    },
                    fh,
                )

    if paths:
        _write_records_csv(paths["records"], records)
        _write_trainlog_csv(paths["trainlog"], trainlog)
        if os.path.exists(paths["checkpoint"]):
            os.remove(paths["checkpoint"])
    return records


def _write_records_csv(path: str, records: list[EpisodeRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_RECORD_COLUMNS)
        for r in records:
            writer.writerow([getattr(r, col) for col in _RECORD_COLUMNS])


def _read_records_csv(path: str) -> list[EpisodeRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(EpisodeRecord(**{col: int(row[col]) for col in _RECORD_COLUMNS}))
    return records


def _write_trainlog_csv(path: str, trainlog) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "env_steps", "epsilon", "loss"])
        for episode, steps, epsilon, loss in trainlog:
            writer.writerow([episode, steps, repr(float(epsilon)), repr(float(loss))])


def run_scenario(
    cfg: ScenarioConfig,
    out_dir: str | None = None,
    workers: int = 1,
) -> dict[tuple[str, str, int], list[EpisodeRecord]]:
    """Run every (algorithm, scheme, seed) combination of the scenario.

    Returns records keyed by (algorithm, scheme, seed). With ``out_dir`` set,
    raw records, training logs, and an aggregated ``summary.csv`` are written
    there; finished runs found on disk are not recomputed.
    """
    cfg.validate()
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    jobs = [
        (algo, scheme, seed)
        for algo in cfg.algorithms
        for scheme in cfg.schemes
        for seed in range(cfg.seeds)
    ]
    results: dict[tuple[str, str, int], list[EpisodeRecord]] = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                job: pool.submit(run_single, cfg, job[0], job[1], job[2], out_dir)
                for job in jobs
            }
            for job, future in futures.items():
                results[job] = future.result()
    else:
        for job in jobs:
            results[job] = run_single(cfg, job[0], job[1], job[2], out_dir)

    if out_dir and cfg.seeds >= 2:
        curves = {}
        for algo in cfg.algorithms:
            for scheme in cfg.schemes:
                per_seed = [results[(algo, scheme, s)] for s in range(cfg.seeds)]
                for metric in METRICS:
                    curves[(metric, scheme, algo)] = aggregate(per_seed, metric)
        emit_csv(curves, os.path.join(out_dir, "summary.csv"))
    return results


@dataclass
class AggregateCurve:
    """Per-episode mean and normal-approximation 95% confidence band."""

    episodes: np.ndarray
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray

    def smoothed(self, window: int) -> "AggregateCurve":
        """Moving-average view (same length; leading partial windows)."""
        if window <= 1:
            return self

        def roll(x):
            out = np.empty_like(x, dtype=np.float64)
            csum = np.cumsum(x, dtype=np.float64)
            for i in range(len(x)):
                lo = max(0, i - window + 1)
                out[i] = (csum[i] - (csum[lo - 1] if lo else 0.0)) / (i - lo + 1)
            return out

        return AggregateCurve(
            self.episodes, roll(self.mean), roll(self.ci_low), roll(self.ci_high)
        )


def aggregate(per_seed_records: list[list[EpisodeRecord]], metric: str) -> AggregateCurve:
    """Mean and 95% CI (1.96 * stderr) across seeds, per episode."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}")
    if len(per_seed_records) < 2:
        raise ValueError("confidence intervals need at least 2 seeds")
    lengths = {len(records) for records in per_seed_records}
    if len(lengths) != 1:
        raise ValueError(f"episode counts differ across seeds: {sorted(lengths)}")
    attr = METRICS[metric]
    values = np.array(
        [[getattr(r, attr) for r in records] for records in per_seed_records],
        dtype=np.float64,
    )
    n = values.shape[0]
    mean = values.mean(axis=0)
    half = 1.96 * values.std(axis=0, ddof=1) / np.sqrt(n)
    episodes = np.array([r.episode for r in per_seed_records[0]])
    return AggregateCurve(episodes, mean, mean - half, mean + half)


def emit_csv(curves: dict[tuple[str, str, str], AggregateCurve], path) -> None:
    """Write aggregated curves; one row per (series, episode), full precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["episode", "metric", "scheme", "algorithm", "mean", "ci_low", "ci_high"])
        for metric, scheme, algo in sorted(curves):
            curve = curves[(metric, scheme, algo)]
            for i, episode in enumerate(curve.episodes):
                writer.writerow(
                    [
                        int(episode),
                        metric,
                        scheme,
                        algo,
                        repr(float(curve.mean[i])),
                        repr(float(curve.ci_low[i])),
                        repr(float(curve.ci_high[i])),
                    ]
                )


def read_curves_csv(path) -> dict[tuple[str, str, str], AggregateCurve]:
    """Inverse of emit_csv."""
    rows: dict[tuple[str, str, str], list[tuple[int, float, float, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["metric"], row["scheme"], row["algorithm"])
            rows.setdefault(key, []).append(
                (
                    int(row["episode"]),
                    float(row["mean"]),
                    float(row["ci_low"]),
                    float(row["ci_high"]),
                )
            )
    curves = {}
    for key, entries in rows.items():
        entries.sort()
        arr = np.array(entries, dtype=np.float64)
        curves[key] = AggregateCurve(
            arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], arr[:, 3]
        )
    return curves


def emit_plot(
    curves: dict[tuple[str, str, str], AggregateCurve],
    path,
    metric: str | None = None,
    smooth: int = 1,
) -> None:
    """SVG line plot with confidence bands, one series per (scheme, algorithm)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if metric is None:
        metrics = {key[0] for key in curves}
        if len(metrics) != 1:
            raise ValueError("curves mix metrics; pass the metric to plot")
        metric = metrics.pop()

    labels = {
        "steps": "steps until solved",
        "soft": "soft constraint violations",
        "hard": "hard constraint violations",
    }
    with matplotlib.rc_context({"svg.hashsalt": "factoryrl"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for key in sorted(curves):
            if key[0] != metric:
                continue
            _, scheme, algo = key
            curve = curves[key].smoothed(smooth)
            (line,) = ax.plot(curve.episodes, curve.mean, label=f"{scheme}/{algo}")
            ax.fill_between(
                curve.episodes,
                curve.ci_low,
                curve.ci_high,
                alpha=0.2,
                color=line.get_color(),
            )
        ax.set_xlabel("episode")
        ax.set_ylabel(labels.get(metric, metric))
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
