"""Spaces and structures: cell subsets, state assignments, and their enumeration.

A space is a non-empty sorted subset of the world's cells; a structure assigns
one state to each cell of a space.  Enumeration orders are canonical and
frozen: structures on a space count upward as base-|S| numbers, space families
list spaces by size and then lexicographically.  Fixed orders keep every
downstream sum reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

from .cellsys import CellularSystem, WorldState
from .errors import CapExceededError

#: Largest number of structures a single enumeration may produce.
STRUCTURE_ENUMERATION_CAP = 2**20

#: Largest subset size accepted by size-bounded space families.
SPACE_SIZE_CAP = 4


@dataclass(frozen=True)
class Space:
    """A non-empty, strictly ascending tuple of cell indices."""

    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.cells:
            raise ValueError("space must be non-empty")
        for idx in self.cells:
            if not isinstance(idx, int) or idx < 0:
                raise ValueError(f"invalid cell index {idx!r}")
        if any(a >= b for a, b in zip(self.cells, self.cells[1:])):
            raise ValueError(f"space cells must be strictly ascending, got {self.cells}")

    @classmethod
    def from_cells(cls, cells: Iterable[int]) -> "Space":
        """Normalize an arbitrary iterable of indices into a Space."""
        return cls(tuple(sorted(set(cells))))

    def __str__(self) -> str:
        return "{" + ",".join(str(c) for c in self.cells) + "}"


@dataclass(frozen=True)
class Structure:
    """An assignment of states to a space, aligned with its sorted cells."""

    space: Space
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.space.cells):
            raise ValueError(
                f"structure has {len(self.values)} values for {len(self.space.cells)} cells"
            )
        for value in self.values:
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"invalid state value {value!r}")

    def __str__(self) -> str:
        pairs = ",".join(f"{c}:{v}" for c, v in zip(self.space.cells, self.values))
        return "{" + pairs + "}"


@dataclass(frozen=True)
class AllUpToSize:
    """Every non-empty cell subset of at most ``k`` cells."""

    k: int


@dataclass(frozen=True)
class ExplicitSpaces:
    """A hand-picked list of spaces (normalized and deduplicated)."""

    spaces: tuple[Space, ...]


@dataclass(frozen=True)
class ConnectedWindows:
    """Contiguous runs (1-D) or axis-aligned rectangles (2-D) up to ``k`` cells."""

    k: int


SpaceFamily = AllUpToSize | ExplicitSpaces | ConnectedWindows


def restrict(state: WorldState, space: Space) -> Structure:
    """Project a world state onto a space."""
    for idx in space.cells:
        if idx >= len(state):
            raise ValueError(f"cell index {idx} out of range for state of {len(state)} cells")
    return Structure(space=space, values=tuple(state[c] for c in space.cells))


def splice(state: WorldState, structure: Structure) -> WorldState:
    """Overwrite a state with a structure's values on its space."""
    out = list(state)
    for idx, value in zip(structure.space.cells, structure.values):
        if idx >= len(state):
            raise ValueError(f"cell index {idx} out of range for state of {len(state)} cells")
        out[idx] = value
    return tuple(out)


def enumerate_structures(
    space: Space, n_states: int, cap: int = STRUCTURE_ENUMERATION_CAP
) -> list[Structure]:
    """All structures on a space, ordered as ascending base-``n_states`` numbers."""
    if n_states < 1:
        raise ValueError(f"alphabet size must be positive, got {n_states}")
    count = n_states ** len(space.cells)
    if count > cap:
        raise CapExceededError(f"{count} structures on {space} exceed cap {cap}")
    return [
        Structure(space=space, values=values)
        for values in itertools.product(range(n_states), repeat=len(space.cells))
    ]


def _grid_windows(shape: tuple[int, ...], k: int) -> set[tuple[int, ...]]:
    if len(shape) == 2:
        height, width = shape
        found = set()
        for h in range(1, min(height, k) + 1):
            for w in range(1, min(width, k) + 1):
                if h * w > k:
                    continue
                for r in range(height - h + 1):
                    for c in range(width - w + 1):
                        cells = tuple(
                            sorted((r + dr) * width + (c + dc) for dr in range(h) for dc in range(w))
                        )
                        found.add(cells)
        return found
    (n,) = shape
    return {tuple(range(i, i + size)) for size in range(1, min(n, k) + 1) for i in range(n - size + 1)}


def enumerate_spaces(
    system: CellularSystem, family: SpaceFamily, size_cap: int = SPACE_SIZE_CAP
) -> list[Space]:
    """Resolve a space-family policy to spaces in canonical order (size, then lex)."""
    n = system.n_cells
    if isinstance(family, AllUpToSize):
        if family.k < 1:
            raise ValueError(f"subset size bound must be positive, got {family.k}")
        if family.k > size_cap:
            raise CapExceededError(f"subset size bound {family.k} exceeds cap {size_cap}")
        spaces = [
            Space(cells)
            for size in range(1, min(family.k, n) + 1)
            for cells in itertools.combinations(range(n), size)
        ]
    elif isinstance(family, ExplicitSpaces):
        normalized = set()
        for space in family.spaces:
            for idx in space.cells:
                if idx >= n:
                    raise ValueError(f"cell index {idx} out of range for {n}-cell system")
            normalized.add(Space.from_cells(space.cells))
        spaces = sorted(normalized, key=lambda s: (len(s.cells), s.cells))
    elif isinstance(family, ConnectedWindows):
        if family.k < 1:
            raise ValueError(f"window size bound must be positive, got {family.k}")
        if family.k > size_cap:
            raise CapExceededError(f"window size bound {family.k} exceeds cap {size_cap}")
        shape = system.shape if system.shape is not None else (n,)
        spaces = sorted(
            (Space(cells) for cells in _grid_windows(shape, family.k)),
            key=lambda s: (len(s.cells), s.cells),
        )
    else:
        raise TypeError(f"unknown space family {family!r}")
    if not spaces:
        raise ValueError("space family produced no spaces")
    return spaces
