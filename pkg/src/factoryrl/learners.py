"""Value-based multi-agent learners: independent DQN, VDN, and QMIX.

Every agent owns a dense Q-network (obs -> 64 ELU -> 32 ELU -> actions)
plus a hard-copied target. VDN sums per-agent values into the joint value;
QMIX mixes them through a state-conditioned monotonic network whose
weights come from hypernetworks with absolute-value non-negativity.
Training samples prioritized batches and applies one ADAM update per call.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, field

import numpy as np

from .exploration import EpsilonSchedule
from .neural import (
    AdamState,
    DenseNet,
    adam_init,
    adam_step,
    backward,
    elu,
    elu_grad,
    forward,
    init_dense,
    reset_moments,
)
from .replay import Batch, ReplayBuffer

ALGORITHMS = ("dqn", "vdn", "qmix")
NOOP_ACTION = 5


@dataclass
class LearnerConfig:
    n_agents: int
    obs_dim: int
    algo: str = "dqn"
    n_actions: int = 6
    hidden: tuple[int, ...] = (64, 32)
    lr: float = 1e-3
    gamma: float = 0.95
    buffer_capacity: int = 20000
    batch_size: int = 64
    per_alpha: float = 0.6
    per_beta_start: float = 0.4
    per_beta_end: float = 1.0
    per_beta_steps: int = 250_000
    target_sync_every: int = 4000
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int = 1000
    eps_reset: float = 0.25
    mixer_hidden: int = 64
    state_dim: int = 0  # required for qmix
    seed: int = 0

    def __post_init__(self) -> None:
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.algo == "qmix" and self.state_dim < 1:
            raise ValueError("qmix requires state_dim")


def global_state(obs: np.ndarray, t: int, step_limit: int) -> np.ndarray:
    """Mixer input: all observations concatenated plus the episode clock."""
    flat = np.asarray(obs, dtype=np.float32).reshape(-1)
    return np.concatenate([flat, np.float32([t / step_limit])])


def global_state_dim(n_agents: int, obs_dim: int) -> int:
    return n_agents * obs_dim + 1


class QmixMixer:
    """Monotonic mixing of per-agent values, conditioned on the global state.

    The mixing net is agent-values -> hidden ELU -> scalar; its weights are
    emitted per-state by linear hypernetworks and made non-negative with an
    absolute value, which keeps d(joint)/d(agent value) >= 0 everywhere.
    """

    def __init__(self, n_agents: int, state_dim: int, hidden: int = 64,
                 seed: int | np.random.Generator = 0) -> None:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        self.n_agents = n_agents
        self.state_dim = state_dim
        self.hidden = hidden
        linear = ("linear",)
        self.hyper_w1 = init_dense((state_dim, n_agents * hidden), rng, linear)
        self.hyper_b1 = init_dense((state_dim, hidden), rng, linear)
        self.hyper_w2 = init_dense((state_dim, hidden), rng, linear)
        self.hyper_b2 = init_dense((state_dim, 1), rng, linear)

    def nets(self) -> list[DenseNet]:
        return [self.hyper_w1, self.hyper_b1, self.hyper_w2, self.hyper_b2]

    def copy(self) -> "QmixMixer":
        other = QmixMixer(self.n_agents, self.state_dim, self.hidden)
        other.copy_from(self)
        return other

    def copy_from(self, other: "QmixMixer") -> None:
        for mine, theirs in zip(self.nets(), other.nets()):
            mine.copy_from(theirs)

    def _forward_cache(self, qs: np.ndarray, states: np.ndarray):
        qs = np.asarray(qs, dtype=np.float64)
        states = np.asarray(states, dtype=np.float64)
        raw_w1 = forward(self.hyper_w1, states).reshape(-1, self.n_agents, self.hidden)
        w1 = np.abs(raw_w1)
        b1 = forward(self.hyper_b1, states)
        pre1 = np.einsum("bn,bnh->bh", qs, w1) + b1
        h = elu(pre1)
        raw_w2 = forward(self.hyper_w2, states)
        w2 = np.abs(raw_w2)
        b2 = forward(self.hyper_b2, states)
        qtot = (h * w2).sum(axis=1) + b2[:, 0]
        return qtot, (qs, states, raw_w1, w1, pre1, h, raw_w2, w2)

    def forward(self, qs: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Joint value per sample; ``qs`` is (batch, n_agents)."""
        return self._forward_cache(qs, states)[0]

    def backward(self, qs: np.ndarray, states: np.ndarray, grad_qtot: np.ndarray):
        """Gradients of ``sum(grad_qtot * qtot)``.

        Returns (per-hypernet Gradient list, gradient w.r.t. the agent values).
        """
        qtot, cache = self._forward_cache(qs, states)
        qs64, states64, raw_w1, w1, pre1, h, raw_w2, w2 = cache
        g = np.asarray(grad_qtot, dtype=np.float64)[:, None]  # (B,1)
        dh = g * w2
        draw_w2 = g * h * np.sign(raw_w2)
        db2 = g
        dpre1 = dh * elu_grad(pre1)
        dqs = np.einsum("bh,bnh->bn", dpre1, w1)
        dw1 = qs64[:, :, None] * dpre1[:, None, :]
        draw_w1 = (dw1 * np.sign(raw_w1)).reshape(len(qs64), -1)
        grads = [
            backward(self.hyper_w1, states64, draw_w1),
            backward(self.hyper_b1, states64, dpre1),
            backward(self.hyper_w2, states64, draw_w2),
            backward(self.hyper_b2, states64, db2),
        ]
        return grads, dqs

    def dqtot_dq(self, qs: np.ndarray, states: np.ndarray) -> np.ndarray:
        """Analytic sensitivity of the joint value to each agent value."""
        _, dqs = self.backward(qs, states, np.ones(np.atleast_2d(qs).shape[0]))
        return dqs


def vdn_mix(agent_values: np.ndarray) -> np.ndarray:
    """Additive joint value: plain sum over agents."""
    return np.asarray(agent_values, dtype=np.float64).sum(axis=-1)


class Learner:
    """One trainable multi-agent controller (nets, targets, buffer, schedule)."""

    def __init__(self, config: LearnerConfig) -> None:
        self.config = config
        seeds = np.random.SeedSequence(config.seed).spawn(config.n_agents + 2)
        self.rng = np.random.default_rng(seeds[0])
        sizes = (config.obs_dim, *config.hidden, config.n_actions)
        self.nets = [
            init_dense(sizes, np.random.default_rng(seeds[1 + i]))
            for i in range(config.n_agents)
        ]
        self.targets = [net.copy() for net in self.nets]
        self.opts = [adam_init(net, lr=config.lr) for net in self.nets]
        self.mixer: QmixMixer | None = None
        self.target_mixer: QmixMixer | None = None
        self.mixer_opts: list[AdamState] = []
        if config.algo == "qmix":
            self.mixer = QmixMixer(
                config.n_agents,
                config.state_dim,
                config.mixer_hidden,
                np.random.default_rng(seeds[-1]),
            )
            self.target_mixer = self.mixer.copy()
            self.mixer_opts = [adam_init(net, lr=config.lr) for net in self.mixer.nets()]
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.exploration = EpsilonSchedule(
            start=config.eps_start,
            end=config.eps_end,
            decay_steps=config.eps_decay_steps,
            reset_value=config.eps_reset,
        )
        self.env_steps = 0
        self.learn_calls = 0
        self._since_sync = 0

    # -- acting ---------------------------------------------------------------

    def epsilon(self) -> float:
        return self.exploration.value(self.env_steps)

    def act(self, observations: dict[int, np.ndarray], epsilon: float) -> dict[int, int]:
        """Epsilon-greedy joint action; ties go to the lowest action index."""
        actions = {}
        for aid in sorted(observations):
            if self.rng.random() < epsilon:
                actions[aid] = int(self.rng.integers(self.config.n_actions))
            else:
                q = forward(self.nets[aid], observations[aid])
                actions[aid] = int(np.argmax(q))
        return actions

    # -- experience -----------------------------------------------------------

    def store(
        self,
        obs: np.ndarray,
        actions: np.ndarray,
        rewards: np.ndarray,
        next_obs: np.ndarray,
        terminal: bool,
        state: np.ndarray | None = None,
        next_state: np.ndarray | None = None,
        next_avail: np.ndarray | None = None,
    ) -> None:
        """Record one environment step (arrays indexed by agent)."""
        self.buffer.push(
            obs, actions, rewards, next_obs, terminal, state, next_state, next_avail
        )
        self.env_steps += 1

    def _per_beta(self) -> float:
        c = self.config
        frac = min(1.0, self.env_steps / max(1, c.per_beta_steps))
        return c.per_beta_start + (c.per_beta_end - c.per_beta_start) * frac

    # -- training -------------------------------------------------------------

    def learn(self) -> float | None:
        """One prioritized batch update; returns the loss, or None if the
        buffer is still smaller than one batch."""
        c = self.config
        if len(self.buffer) < c.batch_size:
            return None
        batch = self.buffer.sample(c.batch_size, c.per_alpha, self._per_beta(), self.rng)
        if c.algo == "dqn":
            loss, td_mag = self._learn_dqn(batch)
        elif c.algo == "vdn":
            loss, td_mag = self._learn_vdn(batch)
        else:
            loss, td_mag = self._learn_qmix(batch)
        self.buffer.update_priorities(batch.indices, td_mag + 1e-6)
        self.learn_calls += 1
        self._since_sync += 1
        if self._since_sync >= c.target_sync_every:
            self.sync_targets()
        return loss

    def _taken_q(self, batch: Batch, agent: int) -> tuple[np.ndarray, np.ndarray]:
        obs = batch.obs[:, agent].astype(np.float64)
        q = forward(self.nets[agent], obs)
        taken = q[np.arange(len(q)), batch.actions[:, agent]]
        return obs, taken

    def _target_max(self, batch: Batch, agent: int) -> np.ndarray:
        # the max runs over the actions actually available in the successor
        # state: an enqueued or retired agent is pinned to noop
        nxt = batch.next_obs[:, agent].astype(np.float64)
        q = forward(self.targets[agent], nxt)
        avail = batch.next_avail[:, agent]
        return avail * q.max(axis=1) + (1.0 - avail) * q[:, NOOP_ACTION]

    def _apply_output_grad(self, batch: Batch, agent: int, obs: np.ndarray,
                           grad_taken: np.ndarray) -> None:
        gout = np.zeros((len(obs), self.config.n_actions))
        gout[np.arange(len(obs)), batch.actions[:, agent]] = grad_taken
        grad = backward(self.nets[agent], obs, gout)
        adam_step(self.nets[agent], grad, self.opts[agent])

    def _learn_dqn(self, batch: Batch) -> tuple[float, np.ndarray]:
        c = self.config
        b = len(batch.weights)
        bootstrap = 1.0 - batch.terminal
        loss = 0.0
        td_mag = np.zeros(b)
        for i in range(c.n_agents):
            obs, taken = self._taken_q(batch, i)
            y = batch.rewards[:, i] + c.gamma * bootstrap * self._target_max(batch, i)
            td = taken - y
            loss += float(np.mean(batch.weights * td * td))
            self._apply_output_grad(batch, i, obs, 2.0 * batch.weights * td / b)
            td_mag += np.abs(td)
        return loss / c.n_agents, td_mag / c.n_agents

    def _learn_vdn(self, batch: Batch) -> tuple[float, np.ndarray]:
        c = self.config
        b = len(batch.weights)
        bootstrap = 1.0 - batch.terminal
        obs_list, taken_list = zip(
            *(self._taken_q(batch, i) for i in range(c.n_agents))
        )
        qtot = vdn_mix(np.stack(taken_list, axis=1))
        target_tot = np.stack(
            [self._target_max(batch, i) for i in range(c.n_agents)], axis=1
        ).sum(axis=1)
        y = batch.rewards.sum(axis=1) + c.gamma * bootstrap * target_tot
        td = qtot - y
        loss = float(np.mean(batch.weights * td * td))
        grad_taken = 2.0 * batch.weights * td / b
        for i in range(c.n_agents):
            self._apply_output_grad(batch, i, obs_list[i], grad_taken)
        return loss, np.abs(td)

    def _learn_qmix(self, batch: Batch) -> tuple[float, np.ndarray]:
        c = self.config
        b = len(batch.weights)
        bootstrap = 1.0 - batch.terminal
        obs_list, taken_list = zip(
            *(self._taken_q(batch, i) for i in range(c.n_agents))
        )
        q_taken = np.stack(taken_list, axis=1)
        qtot = self.mixer.forward(q_taken, batch.state)
        target_max = np.stack(
            [self._target_max(batch, i) for i in range(c.n_agents)], axis=1
        )
        y_tot = self.target_mixer.forward(target_max, batch.next_state)
        y = batch.rewards.sum(axis=1) + c.gamma * bootstrap * y_tot
        td = qtot - y
        loss = float(np.mean(batch.weights * td * td))
        grad_qtot = 2.0 * batch.weights * td / b
        hyper_grads, dqs = self.mixer.backward(q_taken, batch.state, grad_qtot)
        for i in range(c.n_agents):
            self._apply_output_grad(batch, i, obs_list[i], dqs[:, i])
        for net, grad, opt in zip(self.mixer.nets(), hyper_grads, self.mixer_opts):
            adam_step(net, grad, opt)
        return loss, np.abs(td)

    # -- maintenance ------------------------------------------------------------

    def sync_targets(self) -> None:
        """Hard-copy online parameters into the targets and restart the cadence."""
        for target, net in zip(self.targets, self.nets):
            target.copy_from(net)
        if self.target_mixer is not None:
            self.target_mixer.copy_from(self.mixer)
        self._since_sync = 0

    def apply_reset(self) -> None:
        """Reset exploration to the scheme-change level and zero ADAM moments.

        Network parameters and the replay buffer are preserved.
        """
        self.exploration.reset(self.env_steps)
        for opt in self.opts + self.mixer_opts:
            reset_moments(opt)

    def optimizer_states(self) -> list[AdamState]:
        return list(self.opts) + list(self.mixer_opts)

    # -- persistence --------------------------------------------------------------

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            pickle.dump(self, fh)

    @staticmethod
    def load(path) -> "Learner":
        with open(path, "rb") as fh:
            learner = pickle.load(fh)
        if not isinstance(learner, Learner):
            raise ValueError(f"{path} does not hold a learner checkpoint")
        return learner
