"""Linear epsilon-greedy schedule with mid-training resets."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class EpsilonSchedule:
    """Piecewise-linear decay over environment steps.

    Decays from ``start`` to ``end`` across ``decay_steps`` steps. A call to
    :meth:`reset` re-anchors the decay at ``reset_value`` from the given
    step, after which epsilon falls back to ``end`` at the same rate horizon.
    """

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 1000
    reset_value: float = 0.25
    _anchor_value: float = None  # type: ignore[assignment]
    _anchor_step: int = 0

    def __post_init__(self) -> None:
        if self._anchor_value is None:
            self._anchor_value = self.start

    def value(self, step: int) -> float:
        """Epsilon at the given environment step."""
        progress = (step - self._anchor_step) / self.decay_steps
        eps = self._anchor_value - (self._anchor_value - self.end) * progress
        return float(min(self._anchor_value, max(self.end, eps)))

    def reset(self, step: int) -> None:
        """Restart decay from ``reset_value`` at ``step``."""
        self._anchor_value = self.reset_value
        self._anchor_step = step
