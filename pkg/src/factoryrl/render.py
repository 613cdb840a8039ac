"""Plain-text and SVG views of a factory episode state."""

from __future__ import annotations

from .env import FactoryEnv


def render_text(env: FactoryEnv) -> str:
    """Human-readable sketch: grid cells, occupants, queues, agent roster."""
    layout = env.layout
    lines = []
    banner = f"step {env.t}"
    if env.emergency.enabled:
        banner += "  EMERGENCY ACTIVE" if env.emergency.active else "  emergency idle"
    lines.append(banner)

    by_cell: dict[int, list[int]] = {}
    for agent in env.agents:
        if not agent.done:
            by_cell.setdefault(agent.cell, []).append(agent.id)

    def cell_text(index: int) -> str:
        cell = layout.cells[index]
        label = f"m{cell.machine_type}" if cell.machine_type is not None else "  "
        occupants = "".join(str(a) for a in sorted(by_cell.get(index, [])))
        queued = len(env._queues.get(index, ()))
        mark = f"q{queued}" if queued else "  "
        return f"[{label} {occupants:<4.4}{mark}]"

    entry_ids = "".join(str(a.id) for a in env.agents if not a.done and a.cell == layout.entry)
    exit_ids = "".join(str(a.id) for a in env.agents if a.done or a.cell == layout.exit)
    lines.append(f"entry({entry_ids})  ->  grid  ->  exit({exit_ids})")
    for r in range(layout.height):
        lines.append(" ".join(cell_text(r * layout.width + c) for c in range(layout.width)))
    for agent in env.agents:
        status = "done" if agent.done else ("enqueued" if agent.enqueued else "moving")
        lines.append(
            f"agent {agent.id}: cell {agent.cell} {status} buckets {agent.buckets.buckets}"
        )
    return "\n".join(lines) + "\n"


def render_svg(env: FactoryEnv) -> str:
    """Standalone SVG of the grid with agents, queue sizes, and the banner."""
    layout = env.layout
    size = 48
    pad = size  # room for entry/exit columns
    width_px = layout.width * size + 2 * pad
    height_px = layout.height * size + size

    by_cell: dict[int, list[int]] = {}
    for agent in env.agents:
        if not agent.done:
            by_cell.setdefault(agent.cell, []).append(agent.id)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" '
        f'height="{height_px}" viewBox="0 0 {width_px} {height_px}">',
        f'<text x="4" y="14" font-size="12">step {env.t}'
        + (" EMERGENCY" if env.emergency.active else "")
        + "</text>",
    ]

    def box(x: int, y: int, fill: str, label: str, occupants: str) -> None:
        parts.append(
            f'<rect x="{x}" y="{y}" width="{size - 4}" height="{size - 4}" '
            f'fill="{fill}" stroke="black"/>'
        )
        parts.append(f'<text x="{x + 4}" y="{y + 16}" font-size="10">{label}</text>')
        if occupants:
            parts.append(
                f'<text x="{x + 4}" y="{y + size - 12}" font-size="10">{occupants}</text>'
            )

    for index, cell in enumerate(layout.cells):
        row, col = cell.position
        x = pad + col * size
        y = size + row * size
        if cell.machine_type is None:
            x = 0 if index == layout.entry else layout.width * size + pad
            y = size + row * size
            fill = "#9fc5e8"
            label = "entry" if index == layout.entry else "exit"
        else:
            fill = "#dddddd" if cell.capacity_class == "1" else "#f6e3a1"
            label = f"m{cell.machine_type}"
        queued = len(env._queues.get(index, ()))
        if queued:
            label += f" q{queued}"
        occupants = ",".join(str(a) for a in sorted(by_cell.get(index, [])))
        box(x, y, fill, label, occupants)

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
