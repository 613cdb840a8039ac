"""Prioritized experience replay over fixed-size ring buffers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    """One sampled minibatch; arrays are indexed [sample, agent, ...]."""

    obs: np.ndarray          # (B, N, D) float32
    actions: np.ndarray      # (B, N) int64
    rewards: np.ndarray      # (B, N) float64
    next_obs: np.ndarray     # (B, N, D) float32
    terminal: np.ndarray     # (B,) float64
    next_avail: np.ndarray   # (B, N) float64; 1 if the agent can act in next_obs
    weights: np.ndarray      # (B,) float64, importance weights
    indices: np.ndarray      # (B,) int64, for priority updates
    state: np.ndarray | None = None       # (B, S) float32
    next_state: np.ndarray | None = None  # (B, S) float32


class ReplayBuffer:
    """FIFO transition store with proportional prioritized sampling.

    Fresh entries receive the current maximum priority so they are sampled
    at least once; priorities are later overwritten with TD-error magnitudes.
    """

    def __init__(self, capacity: int = 20000) -> None:
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._size = 0
        self._pos = 0
        self._priorities = np.zeros(capacity, dtype=np.float64)
        self._max_priority = 1.0
        self._arrays: dict[str, np.ndarray] | None = None
        self._has_state = False

    def __len__(self) -> int:
        return self._size

    def _allocate(self, obs, actions, rewards, state) -> None:
        n_agents, obs_dim = obs.shape
        cap = self.capacity
        self._arrays = {
            "obs": np.zeros((cap, n_agents, obs_dim), dtype=np.float32),
            "actions": np.zeros((cap, n_agents), dtype=np.int64),
            "rewards": np.zeros((cap, n_agents), dtype=np.float64),
            "next_obs": np.zeros((cap, n_agents, obs_dim), dtype=np.float32),
            "terminal": np.zeros(cap, dtype=np.float64),
            "next_avail": np.ones((cap, n_agents), dtype=np.float64),
        }
        if state is not None:
            self._arrays["state"] = np.zeros((cap, len(state)), dtype=np.float32)
            self._arrays["next_state"] = np.zeros((cap, len(state)), dtype=np.float32)
            self._has_state = True

    def push(
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
        """Append one transition, evicting the oldest at capacity.

        ``next_avail`` flags, per agent, whether it can choose an action in
        the successor state (enqueued and retired agents cannot); omitted
        flags default to available.
        """
        obs = np.asarray(obs, dtype=np.float32)
        if self._arrays is None:
            self._allocate(obs, actions, rewards, state)
        arr = self._arrays
        i = self._pos
        arr["obs"][i] = obs
        arr["actions"][i] = actions
        arr["rewards"][i] = rewards
        arr["next_obs"][i] = next_obs
        arr["terminal"][i] = 1.0 if terminal else 0.0
        arr["next_avail"][i] = 1.0 if next_avail is None else next_avail
        if self._has_state:
            if state is None or next_state is None:
                raise ValueError("buffer was allocated with global state; pass both states")
            arr["state"][i] = state
            arr["next_state"][i] = next_state
        self._priorities[i] = self._max_priority
        self._pos = (self._pos + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(
        self,
        batch_size: int,
        alpha: float,
        beta: float,
        rng: np.random.Generator,
    ) -> Batch:
        """Draw ``batch_size`` transitions with probability ~ priority**alpha.

        Importance weights are (size * P(i))**-beta, normalized by their max.
        Raises ValueError if the buffer holds fewer than ``batch_size`` entries.
        """
        if self._size < batch_size:
            raise ValueError(
                f"buffer holds {self._size} transitions, need {batch_size}"
            )
        scaled = self._priorities[: self._size] ** alpha
        total = scaled.sum()
        if total <= 0:
            probs = np.full(self._size, 1.0 / self._size)
        else:
            probs = scaled / total
        indices = rng.choice(self._size, size=batch_size, p=probs)
        weights = (self._size * probs[indices]) ** -beta
        weights /= weights.max()
        arr = self._arrays
        return Batch(
            obs=arr["obs"][indices],
            actions=arr["actions"][indices],
            rewards=arr["rewards"][indices],
            next_obs=arr["next_obs"][indices],
            terminal=arr["terminal"][indices],
            next_avail=arr["next_avail"][indices],
            weights=weights,
            indices=indices,
            state=arr["state"][indices] if self._has_state else None,
            next_state=arr["next_state"][indices] if self._has_state else None,
        )

    def update_priorities(self, indices: np.ndarray, priorities: np.ndarray) -> None:
        priorities = np.asarray(priorities, dtype=np.float64)
        if np.any(priorities < 0):
            raise ValueError("priorities must be non-negative")
        self._priorities[indices] = priorities
        if len(priorities):
            self._max_priority = max(self._max_priority, float(priorities.max()))

    def priority(self, index: int) -> float:
        return float(self._priorities[index])
