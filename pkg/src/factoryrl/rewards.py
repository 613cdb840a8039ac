"""Counter-based potentials and difference-of-potential rewards.

The potential of a state is a weighted sum of an agent's cumulative event
counters: completing the item and finishing tasks raise it, while steps,
machine operations, path violations, collisions, and emergency violations
lower it. Rewards are potential differences between consecutive states,
optionally with the terminal potential forced to zero so episode returns
telescope exactly.

Weight sets come in named schemes: static ones (r0..r5) and the scheduled
scheme rx, which starts from the functional weights and switches the
compliance penalties on at configured boundary episodes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .env import CounterSnapshot


@dataclass(frozen=True)
class PotentialWeights:
    """Non-negative component weights; penalty signs are applied internally."""

    alpha: float = 0.0  # item completion reward
    beta: float = 0.0   # single task reward
    delta: float = 0.0  # step cost
    zeta: float = 0.0   # machine operation cost
    eta: float = 0.0    # path violation penalty
    theta: float = 0.0  # agent collision penalty
    iota: float = 0.0   # emergency violation penalty

    def __post_init__(self) -> None:
        for name in WEIGHT_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"weight {name} must be non-negative")

    def replace(self, **changes) -> "PotentialWeights":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in WEIGHT_FIELDS}


WEIGHT_FIELDS = ("alpha", "beta", "delta", "zeta", "eta", "theta", "iota")


@dataclass(frozen=True)
class ShapingConfig:
    """How potentials turn into rewards.

    ``gamma_shape`` weights the successor potential (1.0 keeps episode sums
    telescoping); ``scope`` selects per-agent or globally summed counters;
    ``episodic_absorbing`` forces terminal potentials to zero.
    """

    gamma_shape: float = 1.0
    scope: str = "per_agent"  # or "global"
    episodic_absorbing: bool = False


def potential(counters: CounterSnapshot, w: PotentialWeights) -> float:
    """Weighted counter potential of one state."""
    return (
        w.alpha * counters.items_completed
        + w.beta * counters.tasks_finished
        - w.delta * counters.step_count
        - w.zeta * counters.machines_used
        - w.eta * counters.path_violations
        - w.theta * counters.agent_collisions
        - w.iota * counters.emergency_violations
    )


def shaped_reward(
    prev: CounterSnapshot,
    nxt: CounterSnapshot,
    w: PotentialWeights,
    cfg: ShapingConfig = ShapingConfig(),
    terminal: bool = False,
) -> float:
    """Difference-of-potential reward for the transition ``prev -> nxt``.

    With ``episodic_absorbing`` set and ``terminal`` true, the successor
    potential is taken as zero. Raises ValueError if any counter decreased,
    which would indicate a simulation bug.
    """
    for name in (
        "items_completed",
        "tasks_finished",
        "step_count",
        "machines_used",
        "path_violations",
        "agent_collisions",
        "emergency_violations",
    ):
        if getattr(nxt, name) < getattr(prev, name):
            raise ValueError(f"counter {name} decreased between states")
    phi_next = 0.0 if (cfg.episodic_absorbing and terminal) else potential(nxt, w)
    return cfg.gamma_shape * phi_next - potential(prev, w)


@dataclass(frozen=True)
class RewardScheme:
    """A named weight set, optionally rescheduled at fixed episodes.

    ``schedule`` lists (episode, weights) replacements applied from that
    episode on; ``reset_on_change`` asks the trainer to reset exploration
    and optimizer momentum when a replacement first takes effect.
    """

    name: str
    initial: PotentialWeights
    schedule: tuple[tuple[int, PotentialWeights], ...] = ()
    reset_on_change: bool = True

    def __post_init__(self) -> None:
        episodes = [ep for ep, _ in self.schedule]
        if any(b >= a for a, b in zip(episodes[1:], episodes)):
            raise ValueError("schedule episodes must be strictly increasing")

    @property
    def final_weights(self) -> PotentialWeights:
        return self.schedule[-1][1] if self.schedule else self.initial


def active_weights(scheme: RewardScheme, episode: int) -> tuple[PotentialWeights, bool]:
    """Weights in force at ``episode`` plus whether a reset fires there."""
    if episode < 0:
        raise ValueError("episode must be non-negative")
    current = scheme.initial
    boundary = False
    for ep, weights in scheme.schedule:
        if episode >= ep:
            current = weights
        if episode == ep:
            boundary = True
    return current, boundary and scheme.reset_on_change


def scheduled_scheme(
    boundaries: tuple[int, ...] = (2000, 3000),
    name: str = "rx",
) -> RewardScheme:
    """The curriculum scheme: functional weights first, penalties added later.

    Starts from the dense functional weights plus the path penalty. The
    machine-operation and collision penalties switch on at the first
    boundary and the emergency penalty at the last; with a single boundary
    everything switches on at once. Each switch requests a trainer reset.
    """
    if not boundaries:
        raise ValueError("rx needs at least one boundary episode")
    start = PotentialWeights(beta=1.0, delta=0.1, eta=0.1)
    final = start.replace(zeta=0.2, theta=0.4, iota=1.0)
    if len(boundaries) == 1:
        schedule = ((boundaries[0], final),)
    else:
        mid = start.replace(zeta=0.2, theta=0.4)
        schedule = ((boundaries[0], mid),) + tuple(
            (ep, final) for ep in boundaries[1:2]
        )
        if len(boundaries) > 2:
            raise ValueError("at most two boundary episodes are supported")
    return RewardScheme(name=name, initial=start, schedule=schedule)


def scheme_table(rx_boundaries: tuple[int, ...] = (2000, 3000)) -> dict[str, RewardScheme]:
    """All built-in schemes keyed by name (r0..r5 static, rx scheduled)."""
    static = {
        "r0": PotentialWeights(alpha=5.0, delta=0.1),
        "r1": PotentialWeights(beta=1.0, delta=0.1),
        "r2": PotentialWeights(beta=1.0, delta=0.1, zeta=0.2),
        "r3": PotentialWeights(beta=1.0, delta=0.1, eta=0.1),
        "r4": PotentialWeights(beta=1.0, delta=0.1, theta=0.4),
        "r5": PotentialWeights(
            beta=1.0, delta=0.1, zeta=0.2, eta=0.1, theta=0.4, iota=1.0
        ),
    }
    table = {
        name: RewardScheme(name=name, initial=w, reset_on_change=False)
        for name, w in static.items()
    }
    table["rx"] = scheduled_scheme(rx_boundaries)
    return table


def scheme_from_dict(name: str, doc: dict) -> RewardScheme:
    """Parse a scheme from a config document.

    Expected shape: ``{"initial": {weight: value, ...},
    "schedule": [[episode, {weight: value, ...}], ...],
    "reset_on_change": bool}``; schedule and reset flag are optional.
    """
    try:
        initial = PotentialWeights(**doc["initial"])
        schedule = tuple(
            (int(ep), PotentialWeights(**weights))
            for ep, weights in doc.get("schedule", [])
        )
        reset = bool(doc.get("reset_on_change", True))
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"malformed scheme {name!r}: {err}") from err
    return RewardScheme(name=name, initial=initial, schedule=schedule, reset_on_change=reset)
