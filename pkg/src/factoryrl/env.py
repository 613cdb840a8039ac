"""Multi-agent factory simulation.

Each agent carries one item through the factory: it must visit machines
matching the tasks in its bucket list (buckets are worked strictly in
order, tasks within a bucket in any order) and then park on the exit.
Movement is grid-discrete along path edges, cells enforce occupancy
limits, machines process one enqueued agent per step, and an optional
emergency signal marks steps in which agents are expected to freeze.

All randomness (task assignment, movement-conflict resolution, the
emergency process) flows from the seed passed to :meth:`FactoryEnv.reset`,
so identical seeds and action sequences replay identical episodes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .layout import FactoryLayout


class Action(IntEnum):
    LEFT = 0
    RIGHT = 1
    UP = 2
    DOWN = 3
    ENQUEUE = 4
    NOOP = 5


N_ACTIONS = 6

_MOVE_DELTAS = {
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
}

COUNTER_FIELDS = (
    "items_completed",
    "tasks_finished",
    "step_count",
    "machines_used",
    "path_violations",
    "agent_collisions",
    "emergency_violations",
)


@dataclass
class CounterSnapshot:
    """Cumulative per-agent event counters; all non-decreasing in an episode."""

    items_completed: int = 0
    tasks_finished: int = 0
    step_count: int = 0
    machines_used: int = 0
    path_violations: int = 0
    agent_collisions: int = 0
    emergency_violations: int = 0

    def copy(self) -> "CounterSnapshot":
        return replace(self)

    def __sub__(self, other: "CounterSnapshot") -> "CounterSnapshot":
        return CounterSnapshot(
            **{f: getattr(self, f) - getattr(other, f) for f in COUNTER_FIELDS}
        )

    def __add__(self, other: "CounterSnapshot") -> "CounterSnapshot":
        return CounterSnapshot(
            **{f: getattr(self, f) + getattr(other, f) for f in COUNTER_FIELDS}
        )

    @classmethod
    def total(cls, snapshots) -> "CounterSnapshot":
        out = cls()
        for snap in snapshots:
            out = out + snap
        return out

    def as_dict(self) -> dict[str, int]:
        return {f: getattr(self, f) for f in COUNTER_FIELDS}


class TaskBuckets:
    """Ordered bucket list; the first bucket must empty before the next opens."""

    def __init__(self, buckets) -> None:
        self._buckets = [list(b) for b in buckets if len(b) > 0]

    @property
    def buckets(self) -> list[list[int]]:
        return [list(b) for b in self._buckets]

    def current(self) -> list[int]:
        return list(self._buckets[0]) if self._buckets else []

    def upcoming(self) -> list[int]:
        return list(self._buckets[1]) if len(self._buckets) > 1 else []

    def remove_task(self, machine_type: int) -> bool:
        """Drop one instance of ``machine_type`` from the current bucket.

        Returns True when a task was removed; empty buckets vanish at once.
        """
        if not self._buckets or machine_type not in self._buckets[0]:
            return False
        self._buckets[0].remove(machine_type)
        if not self._buckets[0]:
            self._buckets.pop(0)
        return True

    def remaining(self) -> int:
        return sum(len(b) for b in self._buckets)

    def empty(self) -> bool:
        return not self._buckets

    def copy(self) -> "TaskBuckets":
        return TaskBuckets(self._buckets)

    def __repr__(self) -> str:
        return f"TaskBuckets({self._buckets})"


@dataclass
class AgentState:
    id: int
    cell: int
    buckets: TaskBuckets
    enqueued: bool = False
    done: bool = False
    counters: CounterSnapshot = field(default_factory=CounterSnapshot)


@dataclass
class EmergencyProcess:
    """Randomly recurring freeze signal with a sampled active duration."""

    enabled: bool = False
    activation_prob: float = 0.05
    duration_range: tuple[int, int] = (3, 6)
    active: bool = False
    remaining: int = 0

    def advance(self, rng: np.random.Generator) -> None:
        if not self.enabled:
            return
        if self.active:
            self.remaining -= 1
            if self.remaining <= 0:
                self.active = False
        elif rng.random() < self.activation_prob:
            lo, hi = self.duration_range
            self.active = True
            self.remaining = int(rng.integers(lo, hi + 1))


class EnvError(RuntimeError):
    """The environment was driven incorrectly (a harness bug)."""


class FactoryEnv:
    """Seeded factory episode: joint-action steps over a fixed layout."""

    def __init__(
        self,
        layout: FactoryLayout,
        n_agents: int = 4,
        tasks_per_bucket: int = 2,
        n_buckets: int = 2,
        step_limit: int = 50,
        emergency: bool = False,
        emergency_prob: float = 0.05,
        emergency_duration: tuple[int, int] = (3, 6),
    ) -> None:
        if n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if tasks_per_bucket < 1 or n_buckets < 1:
            raise ValueError("tasks_per_bucket and n_buckets must be at least 1")
        entry_capacity = layout.cells[layout.entry].capacity(layout.max_agents)
        if n_agents > entry_capacity:
            raise ValueError(
                f"n_agents {n_agents} exceeds entry capacity {entry_capacity}"
            )
        self.layout = layout
        self.n_agents = n_agents
        self.tasks_per_bucket = tasks_per_bucket
        self.n_buckets = n_buckets
        self.step_limit = step_limit
        self._emergency_cfg = (emergency, emergency_prob, emergency_duration)
        self.agents: list[AgentState] = []
        self.t = 0
        self._rng: np.random.Generator | None = None

    # -- episode control ---------------------------------------------------

    def reset(self, seed: int) -> dict[int, np.ndarray]:
        """Start a new episode; returns observations for all agents."""
        self._rng = np.random.default_rng(seed)
        self.t = 0
        layout = self.layout
        self._capacity = [c.capacity(self.n_agents) for c in layout.cells]
        tasks = self._rng.integers(
            0,
            layout.num_machine_types,
            size=(self.n_agents, self.n_buckets, self.tasks_per_bucket),
        )
        self.agents = [
            AgentState(
                id=i,
                cell=layout.entry,
                buckets=TaskBuckets(tasks[i].tolist()),
            )
            for i in range(self.n_agents)
        ]
        self._occupancy = np.zeros(layout.n_cells, dtype=np.int64)
        self._occupancy[layout.entry] = self.n_agents
        self._queues: dict[int, deque[int]] = {
            c.index: deque() for c in layout.cells if c.machine_type is not None
        }
        enabled, prob, duration = self._emergency_cfg
        self.emergency = EmergencyProcess(
            enabled=enabled, activation_prob=prob, duration_range=duration
        )
        return self.observe_all()

    def done(self) -> bool:
        return all(a.done for a in self.agents) or self.t >= self.step_limit

    def active_agents(self) -> list[int]:
        """Agents expected to submit an action this step."""
        return [a.id for a in self.agents if not a.done and not a.enqueued]

    # -- step dynamics -------------------------------------------------------

    def step(self, actions: dict[int, int]) -> tuple[dict[int, CounterSnapshot], bool]:
        """Advance one step; returns per-agent counter deltas and the done flag.

        ``actions`` must hold exactly one action for every active agent.
        Order of effects: machines process their queue heads, then moves and
        enqueues resolve in a random agent permutation, then agents standing
        on the exit with an empty task list retire.
        """
        if self._rng is None:
            raise EnvError("reset() must be called before step()")
        if self.done():
            raise EnvError("episode already finished")
        active = set(self.active_agents())
        if set(actions) != active:
            unexpected = sorted(set(actions) - active)
            missing = sorted(active - set(actions))
            raise EnvError(
                f"bad action set: unexpected agents {unexpected}, missing {missing}"
            )
        for aid, act in actions.items():
            if not 0 <= int(act) < N_ACTIONS:
                raise EnvError(f"agent {aid}: action {act} out of range")

        prev = [a.counters.copy() for a in self.agents]
        stepping = [a.id for a in self.agents if not a.done]

        self._process_machines()
        self._resolve_actions(actions)
        self._retire_finished()
        for aid in stepping:
            self.agents[aid].counters.step_count += 1
        self.emergency.advance(self._rng)
        self.t += 1

        deltas = {a.id: a.counters - prev[a.id] for a in self.agents}
        return deltas, self.done()

    def _process_machines(self) -> None:
        # one item per machine per step; the head joined in an earlier step
        # because this step's enqueues resolve afterwards
        for ci in sorted(self._queues):
            queue = self._queues[ci]
            if not queue:
                continue
            agent = self.agents[queue.popleft()]
            agent.enqueued = False
            agent.counters.machines_used += 1
            if agent.buckets.remove_task(self.layout.cells[ci].machine_type):
                agent.counters.tasks_finished += 1
                if agent.buckets.empty() and agent.counters.items_completed == 0:
                    agent.counters.items_completed = 1

    def _resolve_actions(self, actions: dict[int, int]) -> None:
        emergency_active = self.emergency.active
        order = self._rng.permutation(np.array(sorted(actions), dtype=np.int64))
        for aid in order:
            agent = self.agents[int(aid)]
            act = Action(int(actions[int(aid)]))
            if emergency_active and act is not Action.NOOP:
                agent.counters.emergency_violations += 1
            if act in _MOVE_DELTAS:
                self._move(agent, act)
            elif act is Action.ENQUEUE:
                cell = self.layout.cells[agent.cell]
                if cell.machine_type is not None:
                    self._queues[cell.index].append(agent.id)
                    agent.enqueued = True
                # enqueueing where no machine exists has no effect

    def _move(self, agent: AgentState, act: Action) -> None:
        row, col = self.layout.position_of(agent.cell)
        dr, dc = _MOVE_DELTAS[act]
        target = self.layout.cell_at((row + dr, col + dc))
        if target is None or target not in self.layout.cells[agent.cell].neighbors:
            agent.counters.path_violations += 1
        elif self._occupancy[target] >= self._capacity[target]:
            agent.counters.agent_collisions += 1
        else:
            self._occupancy[agent.cell] -= 1
            self._occupancy[target] += 1
            agent.cell = target

    def _retire_finished(self) -> None:
        for agent in self.agents:
            if not agent.done and agent.buckets.empty() and agent.cell == self.layout.exit:
                agent.done = True
                self._occupancy[agent.cell] -= 1

    # -- views ---------------------------------------------------------------

    def counters(self) -> dict[int, CounterSnapshot]:
        return {a.id: a.counters.copy() for a in self.agents}

    def total_counters(self) -> CounterSnapshot:
        return CounterSnapshot.total(a.counters for a in self.agents)

    def occupancy(self, cell: int) -> int:
        return int(self._occupancy[cell])

    def capacity(self, cell: int) -> int:
        return self._capacity[cell]

    def observation_size(self) -> int:
        return self.layout.n_cells + 2 + 2 * self.layout.num_machine_types + 5

    def observe(self, agent_id: int) -> np.ndarray:
        """Local view: position one-hot, flags, bucket content, occupancy.

        Layout: one-hot of the agent's cell over all cells; enqueued flag;
        emergency flag; multi-hot of the current bucket's task types; multi-hot
        of the next bucket; occupancy fraction of the agent's cell and its
        left/right/up/down grid neighbours (0 where no cell exists).
        """
        agent = self.agents[agent_id]
        layout = self.layout
        n_cells = layout.n_cells
        k = layout.num_machine_types
        vec = np.zeros(n_cells + 2 + 2 * k + 5, dtype=np.float32)
        vec[agent.cell] = 1.0
        vec[n_cells] = 1.0 if agent.enqueued else 0.0
        vec[n_cells + 1] = 1.0 if self.emergency.active else 0.0
        for t in agent.buckets.current():
            vec[n_cells + 2 + t] = 1.0
        for t in agent.buckets.upcoming():
            vec[n_cells + 2 + k + t] = 1.0
        base = n_cells + 2 + 2 * k
        row, col = layout.position_of(agent.cell)
        spots = [(row, col)] + [
            (row + dr, col + dc)
            for dr, dc in (_MOVE_DELTAS[Action.LEFT], _MOVE_DELTAS[Action.RIGHT],
                           _MOVE_DELTAS[Action.UP], _MOVE_DELTAS[Action.DOWN])
        ]
        for j, pos in enumerate(spots):
            cell = layout.cell_at(pos)
            if cell is not None:
                vec[base + j] = self._occupancy[cell] / self._capacity[cell]
        return vec

    def observe_all(self) -> dict[int, np.ndarray]:
        return {a.id: self.observe(a.id) for a in self.agents}
