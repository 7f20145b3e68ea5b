"""Cellular systems: finite cell set, finite state alphabet, deterministic update.

A system is the triple of cells (indices 0..n-1, optionally laid out on a
grid), integer states 0..|S|-1, and a total transition map given by one of
three rule kinds: a Wolfram elementary rule, an outer-totalistic life-like
rule, or a fully general per-cell lookup table.  Histories are produced by
iterating the map from an initial state; everything here is a pure function
over immutable values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

from .errors import CapExceededError

WorldState = tuple[int, ...]

#: Largest number of neighborhood combinations checked when validating that a
#: lookup table is total.
TABLE_VALIDATION_CAP = 2**20

_STATE_CHARS = "0123456789abcdefghijklmnopqrstuvwxyz"


class Boundary(Enum):
    """How out-of-range neighbors are read for grid-based rules."""

    TOROIDAL = "toroidal"
    FIXED_ZERO = "fixed_zero"


@dataclass(frozen=True)
class ElementaryRule:
    """Wolfram rule byte for a 1-D binary neighborhood (left, self, right)."""

    number: int


@dataclass(frozen=True)
class LifeLikeRule:
    """Outer-totalistic 2-D binary rule over the Moore neighborhood."""

    birth: frozenset[int]
    survive: frozenset[int]


@dataclass(frozen=True)
class TableRule:
    """Per-cell dependency lists plus a lookup from state tuples to next state."""

    neighborhoods: tuple[tuple[int, ...], ...]
    table: Mapping[tuple[int, ...], int]


Rule = ElementaryRule | LifeLikeRule | TableRule


@dataclass(frozen=True)
class CellularSystem:
    """A finite world: cell count, alphabet size, rule, and boundary policy.

    ``shape`` carries the optional grid layout: ``(width,)`` for 1-D rules,
    ``(height, width)`` row-major for 2-D rules, ``None`` for table rules.
    """

    n_cells: int
    n_states: int
    rule: Rule
    boundary: Boundary = Boundary.TOROIDAL
    shape: tuple[int, ...] | None = None


@dataclass(frozen=True)
class History:
    """States h(0..T) obtained by iterating the system's transition map."""

    system: CellularSystem
    states: tuple[WorldState, ...]

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


def make_elementary(rule_number: int, width: int, boundary: Boundary = Boundary.TOROIDAL) -> CellularSystem:
    """Build a 1-D binary system from a Wolfram rule number.

    The next state of a cell is bit ``n`` of ``rule_number`` where ``n`` is
    the (left, self, right) neighborhood read as a 3-bit big-endian number.
    """
    if not 0 <= rule_number <= 255:
        raise ValueError(f"rule number must be in 0..255, got {rule_number}")
    if width < 1:
        raise ValueError(f"width must be positive, got {width}")
    return CellularSystem(
        n_cells=width,
        n_states=2,
        rule=ElementaryRule(rule_number),
        boundary=boundary,
        shape=(width,),
    )


def make_lifelike(
    birth: Iterable[int],
    survive: Iterable[int],
    width: int,
    height: int,
    boundary: Boundary = Boundary.TOROIDAL,
) -> CellularSystem:
    """Build a 2-D binary Moore-neighborhood system from birth/survive counts."""
    birth = frozenset(birth)
    survive = frozenset(survive)
    for count in birth | survive:
        if not 0 <= count <= 8:
            raise ValueError(f"neighbor count must be in 0..8, got {count}")
    if width < 1 or height < 1:
        raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
    return CellularSystem(
        n_cells=width * height,
        n_states=2,
        rule=LifeLikeRule(birth, survive),
        boundary=boundary,
        shape=(height, width),
    )


def make_table(
    cell_count: int,
    state_count: int,
    neighborhoods: Iterable[Iterable[int]],
    table: Mapping,
) -> CellularSystem:
    """Build a fully general system from per-cell dependency lists and a lookup.

    ``table`` maps neighborhood-state tuples to next states; scalar keys are
    accepted for single-cell neighborhoods.  The lookup must be total: every
    reachable state tuple of every cell's neighborhood needs an entry.
    """
    if cell_count < 1:
        raise ValueError(f"cell count must be positive, got {cell_count}")
    if state_count < 1:
        raise ValueError(f"state count must be positive, got {state_count}")
    nbhds = tuple(tuple(nb) for nb in neighborhoods)
    if len(nbhds) != cell_count:
        raise ValueError(f"expected {cell_count} neighborhoods, got {len(nbhds)}")
    for cell, nb in enumerate(nbhds):
        for idx in nb:
            if not 0 <= idx < cell_count:
                raise ValueError(f"cell {cell}: neighborhood index {idx} out of range")
    normalized: dict[tuple[int, ...], int] = {}
    for key, value in table.items():
        key = (key,) if isinstance(key, int) else tuple(key)
        if not 0 <= value < state_count:
            raise ValueError(f"table value {value} outside alphabet 0..{state_count - 1}")
        normalized[key] = value
    for cell, nb in enumerate(nbhds):
        combos = state_count ** len(nb)
        if combos > TABLE_VALIDATION_CAP:
            raise CapExceededError(
                f"cell {cell}: {combos} neighborhood combinations exceed cap {TABLE_VALIDATION_CAP}"
            )
        for states in itertools.product(range(state_count), repeat=len(nb)):
            if states not in normalized:
                raise ValueError(f"table is missing an entry for cell {cell} neighborhood state {states}")
    return CellularSystem(
        n_cells=cell_count,
        n_states=state_count,
        rule=TableRule(nbhds, normalized),
    )


def _check_state(system: CellularSystem, state: WorldState) -> None:
    if len(state) != system.n_cells:
        raise ValueError(f"state has {len(state)} cells, system has {system.n_cells}")
    for value in state:
        if not 0 <= value < system.n_states:
            raise ValueError(f"state value {value} outside alphabet 0..{system.n_states - 1}")


def _read_cell(state: WorldState, index: int, n: int, boundary: Boundary) -> int:
    if 0 <= index < n:
        return state[index]
    if boundary is Boundary.TOROIDAL:
        return state[index % n]
    return 0


def _step_elementary(system: CellularSystem, state: WorldState) -> WorldState:
    rule: ElementaryRule = system.rule  # type: ignore[assignment]
    n = system.n_cells
    out = []
    for i in range(n):
        left = _read_cell(state, i - 1, n, system.boundary)
        right = _read_cell(state, i + 1, n, system.boundary)
        pattern = (left << 2) | (state[i] << 1) | right
        out.append((rule.number >> pattern) & 1)
    return tuple(out)


def _step_lifelike(system: CellularSystem, state: WorldState) -> WorldState:
    rule: LifeLikeRule = system.rule  # type: ignore[assignment]
    height, width = system.shape  # type: ignore[misc]
    out = []
    for r in range(height):
        for c in range(width):
            live = 0
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < height and 0 <= cc < width:
                        live += state[rr * width + cc]
                    elif system.boundary is Boundary.TOROIDAL:
                        live += state[(rr % height) * width + (cc % width)]
            if state[r * width + c]:
                out.append(1 if live in rule.survive else 0)
            else:
                out.append(1 if live in rule.birth else 0)
    return tuple(out)


def _step_table(system: CellularSystem, state: WorldState) -> WorldState:
    rule: TableRule = system.rule  # type: ignore[assignment]
    out = []
    for nb in rule.neighborhoods:
        key = tuple(state[j] for j in nb)
        try:
            out.append(rule.table[key])
        except KeyError:
            raise ValueError(f"table is missing an entry for neighborhood state {key}") from None
    return tuple(out)


def step(system: CellularSystem, state: WorldState) -> WorldState:
    """Apply the transition map once; synchronous across all cells."""
    _check_state(system, state)
    if isinstance(system.rule, ElementaryRule):
        return _step_elementary(system, state)
    if isinstance(system.rule, LifeLikeRule):
        return _step_lifelike(system, state)
    return _step_table(system, state)


def history(system: CellularSystem, initial: WorldState, horizon: int) -> History:
    """Iterate the transition map, returning the states h(0..horizon)."""
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    initial = tuple(initial)
    _check_state(system, initial)
    states = [initial]
    for _ in range(horizon):
        states.append(step(system, states[-1]))
    return History(system=system, states=tuple(states))


def state_from_string(text: str, system: CellularSystem) -> WorldState:
    """Decode a state written as one character per cell (row-major for grids)."""
    if system.n_states > len(_STATE_CHARS):
        raise ValueError(f"string states support at most {len(_STATE_CHARS)} states")
    values = []
    for ch in text:
        idx = _STATE_CHARS.find(ch.lower())
        if idx < 0:
            raise ValueError(f"invalid state character {ch!r}")
        values.append(idx)
    state = tuple(values)
    _check_state(system, state)
    return state


def state_to_string(state: WorldState) -> str:
    """Encode a state as one character per cell."""
    return "".join(_STATE_CHARS[v] for v in state)
