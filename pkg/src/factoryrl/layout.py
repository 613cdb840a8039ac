"""Factory floor layouts: capacity-limited grid cells joined by path edges.

A layout is a ``width x height`` grid of machine cells plus two special
cells, entry and exit, docked to the grid border. Agents may only move
between cells joined by a path edge, and each cell limits how many agents
may occupy it at once (a fixed limit of one, half the agents, or all of
them). Layouts are loaded from JSON documents or built programmatically.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

CAP_ONE = "1"
CAP_HALF = "HALF"
CAP_ALL = "ALL"
CAPACITY_CLASSES = (CAP_ONE, CAP_HALF, CAP_ALL)


class LayoutError(ValueError):
    """A layout document is malformed or violates a structural invariant."""


@dataclass(frozen=True)
class Cell:
    """One floor cell: its machine (if any), capacity class, and connectivity."""

    index: int
    machine_type: int | None
    capacity_class: str
    position: tuple[int, int]  # (row, col); entry/exit sit just off the grid
    neighbors: frozenset[int]  # cells reachable via a path edge

    def capacity(self, n_agents: int) -> int:
        """Resolved occupancy limit for an episode with ``n_agents`` agents."""
        if self.capacity_class == CAP_ONE:
            return 1
        if self.capacity_class == CAP_HALF:
            return max(1, math.ceil(n_agents / 2))
        return max(1, n_agents)


@dataclass(frozen=True)
class FactoryLayout:
    """Immutable description of the factory floor.

    ``cells`` holds the machine grid in row-major order followed by the
    entry cell and, unless it coincides with the entry, the exit cell.
    ``max_agents`` is the largest agent count the layout supports; the
    entry and exit always hold that many agents simultaneously.
    """

    width: int
    height: int
    cells: tuple[Cell, ...]
    entry: int
    exit: int
    num_machine_types: int
    max_agents: int = 8

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def grid_size(self) -> int:
        return self.width * self.height

    def position_of(self, index: int) -> tuple[int, int]:
        return self.cells[index].position

    def cell_at(self, position: tuple[int, int]) -> int | None:
        """Cell index at ``(row, col)``, or None if no cell sits there."""
        return self._position_map().get(position)

    def _position_map(self) -> dict[tuple[int, int], int]:
        # cached on first use; the dataclass is frozen so this never changes
        cached = self.__dict__.get("_pos_map")
        if cached is None:
            cached = {c.position: c.index for c in self.cells}
            object.__setattr__(self, "_pos_map", cached)
        return cached


def _grid_position(index: int, width: int) -> tuple[int, int]:
    return (index // width, index % width)


def _adjacent(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def layout_from_dict(doc: dict) -> FactoryLayout:
    """Build and validate a layout from a parsed document.

    Required keys: ``width``, ``height``, ``machine_types`` (row-major),
    ``capacity_classes`` (row-major, entries from {1, "HALF", "ALL"}),
    ``entry``, ``exit``, ``edges`` (directed index pairs, must appear in
    symmetric pairs). Optional: ``num_machine_types``, ``max_agents``,
    ``entry_pos``, ``exit_pos``.

    Raises LayoutError on any structural problem.
    """
    try:
        width = int(doc["width"])
        height = int(doc["height"])
        machine_types = list(doc["machine_types"])
        capacity_classes = list(doc["capacity_classes"])
        entry = int(doc["entry"])
        exit_ = int(doc["exit"])
        edges = [(int(u), int(v)) for u, v in doc["edges"]]
    except (KeyError, TypeError, ValueError) as err:
        raise LayoutError(f"malformed layout document: {err}") from err

    if width < 1 or height < 1:
        raise LayoutError("width and height must be at least 1")
    grid_size = width * height
    if len(machine_types) != grid_size:
        raise LayoutError(
            f"machine_types must list {grid_size} entries, got {len(machine_types)}"
        )
    if len(capacity_classes) != grid_size:
        raise LayoutError(
            f"capacity_classes must list {grid_size} entries, got {len(capacity_classes)}"
        )

    num_types = int(doc.get("num_machine_types", max(machine_types) + 1))
    if num_types < 1:
        raise LayoutError("num_machine_types must be positive")
    for t in machine_types:
        if not 0 <= int(t) < num_types:
            raise LayoutError(f"machine type {t} outside [0, {num_types})")

    classes = []
    for c in capacity_classes:
        name = str(c).upper() if isinstance(c, str) else str(c)
        if name not in CAPACITY_CLASSES:
            raise LayoutError(
                f"capacity class {c!r} invalid; must be one of 1, HALF, ALL"
            )
        classes.append(name)

    max_agents = int(doc.get("max_agents", 8))
    if max_agents < 1:
        raise LayoutError("max_agents must be at least 1")

    # entry is the first index after the grid; exit follows it unless the
    # document merges the two (entry == exit is allowed for tiny layouts).
    if entry != grid_size:
        raise LayoutError(f"entry must be cell {grid_size}, got {entry}")
    if exit_ not in (entry, grid_size + 1):
        raise LayoutError(f"exit must be cell {grid_size + 1} (or equal entry), got {exit_}")
    n_cells = grid_size + (1 if exit_ == entry else 2)

    entry_pos = tuple(doc.get("entry_pos", (height // 2, -1)))
    exit_pos = tuple(doc.get("exit_pos", (height // 2, width)))
    if exit_ == entry:
        exit_pos = entry_pos
    positions = {i: _grid_position(i, width) for i in range(grid_size)}
    positions[entry] = (int(entry_pos[0]), int(entry_pos[1]))
    if exit_ != entry:
        positions[exit_] = (int(exit_pos[0]), int(exit_pos[1]))
    if len(set(positions.values())) != n_cells:
        raise LayoutError("entry/exit positions collide with the grid or each other")

    edge_set = set()
    for u, v in edges:
        if not (0 <= u < n_cells and 0 <= v < n_cells):
            raise LayoutError(f"edge ({u},{v}) references an unknown cell")
        if u == v:
            raise LayoutError(f"edge ({u},{u}) is a self-loop")
        if not _adjacent(positions[u], positions[v]):
            raise LayoutError(f"edge ({u},{v}) joins non-adjacent cells")
        edge_set.add((u, v))
    for u, v in edge_set:
        if (v, u) not in edge_set:
            raise LayoutError(f"edge ({u},{v}) lacks its mirror ({v},{u})")

    neighbor_map: dict[int, set[int]] = {i: set() for i in range(n_cells)}
    for u, v in edge_set:
        neighbor_map[u].add(v)

    cells = []
    for i in range(grid_size):
        cells.append(
            Cell(
                index=i,
                machine_type=int(machine_types[i]),
                capacity_class=classes[i],
                position=positions[i],
                neighbors=frozenset(neighbor_map[i]),
            )
        )
    cells.append(
        Cell(entry, None, CAP_ALL, positions[entry], frozenset(neighbor_map[entry]))
    )
    if exit_ != entry:
        cells.append(
            Cell(exit_, None, CAP_ALL, positions[exit_], frozenset(neighbor_map[exit_]))
        )

    layout = FactoryLayout(
        width=width,
        height=height,
        cells=tuple(cells),
        entry=entry,
        exit=exit_,
        num_machine_types=num_types,
        max_agents=max_agents,
    )
    _check_connected(layout)
    return layout


def _check_connected(layout: FactoryLayout) -> None:
    seen = {layout.entry}
    frontier = [layout.entry]
    while frontier:
        for n in layout.cells[frontier.pop()].neighbors:
            if n not in seen:
                seen.add(n)
                frontier.append(n)
    if layout.exit not in seen:
        raise LayoutError("no path connects entry to exit")


def layout_to_dict(layout: FactoryLayout) -> dict:
    """Serializable document that round-trips through ``layout_from_dict``."""
    edges = sorted(
        (c.index, n) for c in layout.cells for n in c.neighbors
    )
    return {
        "width": layout.width,
        "height": layout.height,
        "num_machine_types": layout.num_machine_types,
        "max_agents": layout.max_agents,
        "machine_types": [layout.cells[i].machine_type for i in range(layout.grid_size)],
        "capacity_classes": [
            layout.cells[i].capacity_class for i in range(layout.grid_size)
        ],
        "entry": layout.entry,
        "exit": layout.exit,
        "entry_pos": list(layout.cells[layout.entry].position),
        "exit_pos": list(layout.cells[layout.exit].position),
        "edges": [list(e) for e in edges],
    }


def load_layout(source) -> FactoryLayout:
    """Load a layout from a JSON path, JSON string, or already-parsed dict."""
    if isinstance(source, dict):
        return layout_from_dict(source)
    text = None
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, (str, os.PathLike)):
        if isinstance(source, os.PathLike) or os.path.exists(source):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        else:
            text = source
    if text is None:
        raise LayoutError(f"cannot read layout from {source!r}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise LayoutError(f"layout document is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise LayoutError("layout document must be a JSON object")
    return layout_from_dict(doc)


def _symmetric(edges: list[tuple[int, int]]) -> list[list[int]]:
    out = set()
    for u, v in edges:
        out.add((u, v))
        out.add((v, u))
    return [list(e) for e in sorted(out)]


def default_layout(max_agents: int = 8) -> FactoryLayout:
    """The built-in 5x5 floor.

    Five machine types, five machines each, laid out as ``(row + col) % 5``.
    A central west-east corridor joins entry and exit; two vertical shafts
    through the four high-capacity dodge cells (1,1), (1,3), (3,1), (3,3)
    connect the top and bottom corridors. All other cells hold one agent.
    """
    width = height = 5

    def idx(r, c):
        return r * width + c

    entry, exit_ = 25, 26
    dodge = [(1, 1), (1, 3), (3, 1), (3, 3)]
    edges = []
    # dodge cells connect to all four grid neighbours
    for r, c in dodge:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            edges.append((idx(r, c), idx(r + dr, c + dc)))
    # full middle corridor, partial top and bottom corridors
    for c in range(4):
        edges.append((idx(2, c), idx(2, c + 1)))
    for c in range(4):
        edges.append((idx(0, c), idx(0, c + 1)))
        edges.append((idx(4, c), idx(4, c + 1)))
    edges.append((entry, idx(2, 0)))
    edges.append((exit_, idx(2, 4)))

    doc = {
        "width": width,
        "height": height,
        "num_machine_types": 5,
        "max_agents": max_agents,
        "machine_types": [(r + c) % 5 for r in range(height) for c in range(width)],
        "capacity_classes": [
            CAP_HALF if (r, c) in dodge else CAP_ONE
            for r in range(height)
            for c in range(width)
        ],
        "entry": entry,
        "exit": exit_,
        "entry_pos": [2, -1],
        "exit_pos": [2, 5],
        "edges": _symmetric(edges),
    }
    return layout_from_dict(doc)


def open_layout(
    width: int,
    height: int,
    num_machine_types: int,
    max_agents: int = 8,
) -> FactoryLayout:
    """Fully-connected grid with entry/exit docked mid-row; handy for tests.

    Machine types cycle as ``(row + col) % num_machine_types`` and every
    machine cell holds a single agent.
    """
    def idx(r, c):
        return r * width + c

    entry, exit_ = width * height, width * height + 1
    mid = height // 2
    edges = []
    for r in range(height):
        for c in range(width):
            if c + 1 < width:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < height:
                edges.append((idx(r, c), idx(r + 1, c)))
    edges.append((entry, idx(mid, 0)))
    edges.append((exit_, idx(mid, width - 1)))

    doc = {
        "width": width,
        "height": height,
        "num_machine_types": num_machine_types,
        "max_agents": max_agents,
        "machine_types": [
            (r + c) % num_machine_types for r in range(height) for c in range(width)
        ],
        "capacity_classes": [CAP_ONE] * (width * height),
        "entry": entry,
        "exit": exit_,
        "edges": _symmetric(edges),
    }
    return layout_from_dict(doc)
