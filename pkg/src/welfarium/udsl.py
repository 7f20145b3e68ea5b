"""A small total expression language for utility functions over histories.

Expressions evaluate every history to a value in [0, 1]; the arithmetic
operators clamp so the codomain is preserved by construction.  Time indices
are absolute step numbers, except inside ``timemean`` and ``discount`` whose
bodies may use the bound variable ``t`` for the step being aggregated.

Concrete syntax is s-expressions, e.g. ``(add (alive 0 1) (const 0.25))``;
``parse`` and ``unparse`` round-trip, and ``unparse`` emits the canonical
form (lowercase, single spaces, minimal decimals).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

from .cellsys import CellularSystem, History
from .errors import CapExceededError, DslSyntaxError, EvalError
from .structures import Space, Structure

#: Largest number of distinct expressions hypothesis enumeration may build.
HYPOTHESIS_ENUMERATION_CAP = 65536


@dataclass(frozen=True)
class TimeVar:
    """The bound step variable of ``timemean``/``discount``, printed ``t``."""


TVAR = TimeVar()

TimeRef = Union[int, TimeVar]


def _check_time_ref(ref: TimeRef) -> None:
    if isinstance(ref, TimeVar):
        return
    if not isinstance(ref, int) or ref < 0:
        raise ValueError(f"time index must be a non-negative integer, got {ref!r}")


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self) -> None:
        value = float(self.value)
        if math.isnan(value) or not 0.0 <= value <= 1.0:
            raise ValueError(f"constant {self.value!r} outside [0, 1]")
        object.__setattr__(self, "value", value)


@dataclass(frozen=True)
class Alive:
    """1 if the cell is in state 1 at the step, else 0."""

    cell: int
    time: TimeRef

    def __post_init__(self) -> None:
        if not isinstance(self.cell, int) or self.cell < 0:
            raise ValueError(f"cell index must be a non-negative integer, got {self.cell!r}")
        _check_time_ref(self.time)


@dataclass(frozen=True)
class FracLive:
    """Fraction of the space's cells in state 1 at the step."""

    space: Space
    time: TimeRef

    def __post_init__(self) -> None:
        _check_time_ref(self.time)


@dataclass(frozen=True)
class Match:
    """1 if the state restricted to the structure's space equals it, else 0."""

    structure: Structure
    time: TimeRef

    def __post_init__(self) -> None:
        _check_time_ref(self.time)


@dataclass(frozen=True)
class TimeMean:
    """Mean of the body over every step of the history."""

    body: "UtilityExpr"


@dataclass(frozen=True)
class Discount:
    """Geometric-weight mean of the body, normalized to stay within [0, 1]."""

    gamma: float
    body: "UtilityExpr"

    def __post_init__(self) -> None:
        gamma = float(self.gamma)
        if math.isnan(gamma) or not 0.0 < gamma < 1.0:
            raise ValueError(f"discount factor {self.gamma!r} outside (0, 1)")
        object.__setattr__(self, "gamma", gamma)


@dataclass(frozen=True)
class Add:
    left: "UtilityExpr"
    right: "UtilityExpr"


@dataclass(frozen=True)
class Sub:
    left: "UtilityExpr"
    right: "UtilityExpr"


@dataclass(frozen=True)
class Mul:
    left: "UtilityExpr"
    right: "UtilityExpr"


@dataclass(frozen=True)
class Min:
    left: "UtilityExpr"
    right: "UtilityExpr"


@dataclass(frozen=True)
class Max:
    left: "UtilityExpr"
    right: "UtilityExpr"


@dataclass(frozen=True)
class Clamp:
    body: "UtilityExpr"


UtilityExpr = Union[
    Const, Alive, FracLive, Match, TimeMean, Discount, Add, Sub, Mul, Min, Max, Clamp
]

_BINARY_OPS = {"add": Add, "sub": Sub, "mul": Mul, "min": Min, "max": Max}
_OPERATOR_NAMES = frozenset(_BINARY_OPS) | {
    "const",
    "alive",
    "fraclive",
    "match",
    "timemean",
    "discount",
    "clamp",
}


# ---------------------------------------------------------------------------
# parsing


@dataclass
class _Token:
    text: str
    line: int
    column: int


_PUNCTUATION = "(){},:"


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    line, column = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            column = 1
            i += 1
        elif ch.isspace():
            column += 1
            i += 1
        elif ch in _PUNCTUATION:
            tokens.append(_Token(ch, line, column))
            column += 1
            i += 1
        else:
            start, start_column = i, column
            while i < len(text) and not text[i].isspace() and text[i] not in _PUNCTUATION:
                i += 1
                column += 1
            tokens.append(_Token(text[start:i], line, start_column))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def _error(self, message: str, token: _Token | None = None) -> DslSyntaxError:
        if token is None:
            return DslSyntaxError(f"{message} at end of input")
        return DslSyntaxError(message, token.line, token.column)

    def _next(self, expected: str) -> _Token:
        if self.pos >= len(self.tokens):
            raise self._error(f"expected {expected}")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect(self, text: str) -> _Token:
        token = self._next(f"'{text}'")
        if token.text != text:
            raise self._error(f"expected '{text}', got {token.text!r}", token)
        return token

    def _int(self, what: str) -> int:
        token = self._next(what)
        if not (token.text.isascii() and token.text.isdigit()):
            raise self._error(f"expected {what}, got {token.text!r}", token)
        return int(token.text)

    def _float(self, what: str) -> tuple[float, _Token]:
        token = self._next(what)
        try:
            value = float(token.text)
        except ValueError:
            raise self._error(f"expected {what}, got {token.text!r}", token) from None
        if math.isnan(value) or math.isinf(value):
            raise self._error(f"expected a finite {what}, got {token.text!r}", token)
        return value, token

    def _time_ref(self, binder_depth: int) -> TimeRef:
        token = self._next("time index")
        if token.text == "t":
            if binder_depth == 0:
                raise self._error("time variable 't' used outside timemean/discount", token)
            return TVAR
        if not (token.text.isascii() and token.text.isdigit()):
            raise self._error(f"expected time index, got {token.text!r}", token)
        return int(token.text)

    def _space_literal(self) -> Space:
        self._expect("{")
        cells = [self._int("cell index")]
        while True:
            token = self._next("',' or '}'")
            if token.text == "}":
                break
            if token.text != ",":
                raise self._error(f"expected ',' or '}}', got {token.text!r}", token)
            cells.append(self._int("cell index"))
        return Space.from_cells(cells)

    def _structure_literal(self) -> Structure:
        self._expect("{")
        pairs: dict[int, int] = {}
        while True:
            cell_token = self._next("cell index")
            if not (cell_token.text.isascii() and cell_token.text.isdigit()):
                raise self._error(f"expected cell index, got {cell_token.text!r}", cell_token)
            cell = int(cell_token.text)
            if cell in pairs:
                raise self._error(f"duplicate cell {cell} in match literal", cell_token)
            self._expect(":")
            pairs[cell] = self._int("state value")
            token = self._next("',' or '}'")
            if token.text == "}":
                break
            if token.text != ",":
                raise self._error(f"expected ',' or '}}', got {token.text!r}", token)
        cells = tuple(sorted(pairs))
        return Structure(space=Space(cells), values=tuple(pairs[c] for c in cells))

    def _expr(self, binder_depth: int) -> UtilityExpr:
        self._expect("(")
        op_token = self._next("operator")
        op = op_token.text
        if op not in _OPERATOR_NAMES:
            raise self._error(f"unknown operator {op!r}", op_token)
        if op == "const":
            value, token = self._float("constant")
            if not 0.0 <= value <= 1.0:
                raise self._error(f"constant {token.text} outside [0, 1]", token)
            node: UtilityExpr = Const(value)
        elif op == "alive":
            cell = self._int("cell index")
            node = Alive(cell, self._time_ref(binder_depth))
        elif op == "fraclive":
            space = self._space_literal()
            node = FracLive(space, self._time_ref(binder_depth))
        elif op == "match":
            structure = self._structure_literal()
            node = Match(structure, self._time_ref(binder_depth))
        elif op == "timemean":
            node = TimeMean(self._expr(binder_depth + 1))
        elif op == "discount":
            gamma, token = self._float("discount factor")
            if not 0.0 < gamma < 1.0:
                raise self._error(f"discount factor {token.text} outside (0, 1)", token)
            node = Discount(gamma, self._expr(binder_depth + 1))
        elif op == "clamp":
            node = Clamp(self._expr(binder_depth))
        else:
            left = self._expr(binder_depth)
            right = self._expr(binder_depth)
            node = _BINARY_OPS[op](left, right)
        self._expect(")")
        return node

    def parse(self) -> UtilityExpr:
        expr = self._expr(0)
        if self.pos < len(self.tokens):
            token = self.tokens[self.pos]
            raise self._error(f"trailing input {token.text!r}", token)
        return expr


def parse(text: str) -> UtilityExpr:
    """Parse utility-expression text into its AST."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# printing


def _format_number(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _format_time(ref: TimeRef) -> str:
    return "t" if isinstance(ref, TimeVar) else str(ref)


def unparse(expr: UtilityExpr) -> str:
    """Render an AST in canonical text form; inverse of :func:`parse`."""
    if isinstance(expr, Const):
        return f"(const {_format_number(expr.value)})"
    if isinstance(expr, Alive):
        return f"(alive {expr.cell} {_format_time(expr.time)})"
    if isinstance(expr, FracLive):
        return f"(fraclive {expr.space} {_format_time(expr.time)})"
    if isinstance(expr, Match):
        return f"(match {expr.structure} {_format_time(expr.time)})"
    if isinstance(expr, TimeMean):
        return f"(timemean {unparse(expr.body)})"
    if isinstance(expr, Discount):
        return f"(discount {_format_number(expr.gamma)} {unparse(expr.body)})"
    if isinstance(expr, Clamp):
        return f"(clamp {unparse(expr.body)})"
    for name, cls in _BINARY_OPS.items():
        if isinstance(expr, cls):
            return f"({name} {unparse(expr.left)} {unparse(expr.right)})"
    raise TypeError(f"not a utility expression: {expr!r}")


# ---------------------------------------------------------------------------
# evaluation


def _resolve_time(ref: TimeRef, bound: int | None, horizon: int) -> int:
    if isinstance(ref, TimeVar):
        if bound is None:
            raise EvalError("time variable 't' is unbound")
        return bound
    if ref > horizon:
        raise EvalError(f"time {ref} beyond horizon {horizon}")
    return ref


def _state_at(history: History, expr: FracLive | Match | Alive, bound: int | None):
    t = _resolve_time(expr.time, bound, history.horizon)
    return history.states[t]


def _check_cell(cell: int, state) -> None:
    if cell >= len(state):
        raise EvalError(f"cell {cell} out of range for {len(state)}-cell world")


def _eval(expr: UtilityExpr, history: History, bound: int | None) -> float:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Alive):
        state = _state_at(history, expr, bound)
        _check_cell(expr.cell, state)
        return 1.0 if state[expr.cell] == 1 else 0.0
    if isinstance(expr, FracLive):
        state = _state_at(history, expr, bound)
        live = 0
        for cell in expr.space.cells:
            _check_cell(cell, state)
            live += state[cell] == 1
        return live / len(expr.space.cells)
    if isinstance(expr, Match):
        state = _state_at(history, expr, bound)
        for cell in expr.structure.space.cells:
            _check_cell(cell, state)
        observed = tuple(state[c] for c in expr.structure.space.cells)
        return 1.0 if observed == expr.structure.values else 0.0
    if isinstance(expr, TimeMean):
        total = 0.0
        for t in range(history.horizon + 1):
            total += _eval(expr.body, history, t)
        return total / (history.horizon + 1)
    if isinstance(expr, Discount):
        weight, numerator, denominator = 1.0, 0.0, 0.0
        for t in range(history.horizon + 1):
            numerator += weight * _eval(expr.body, history, t)
            denominator += weight
            weight *= expr.gamma
        return numerator / denominator
    if isinstance(expr, Add):
        return min(1.0, _eval(expr.left, history, bound) + _eval(expr.right, history, bound))
    if isinstance(expr, Sub):
        return max(0.0, _eval(expr.left, history, bound) - _eval(expr.right, history, bound))
    if isinstance(expr, Mul):
        return _eval(expr.left, history, bound) * _eval(expr.right, history, bound)
    if isinstance(expr, Min):
        return min(_eval(expr.left, history, bound), _eval(expr.right, history, bound))
    if isinstance(expr, Max):
        return max(_eval(expr.left, history, bound), _eval(expr.right, history, bound))
    if isinstance(expr, Clamp):
        return min(1.0, max(0.0, _eval(expr.body, history, bound)))
    raise TypeError(f"not a utility expression: {expr!r}")


def evaluate(expr: UtilityExpr, history: History) -> float:
    """Evaluate a utility expression on a history; the result is in [0, 1]."""
    return _eval(expr, history, None)


def check_references(expr: UtilityExpr, system: CellularSystem, horizon: int) -> None:
    """Verify every cell/state/time reference fits the given world and horizon."""

    def walk(node: UtilityExpr, bound: bool) -> None:
        if isinstance(node, Const):
            return
        if isinstance(node, (Alive, FracLive, Match)):
            if isinstance(node.time, TimeVar):
                if not bound:
                    raise EvalError("time variable 't' used outside timemean/discount")
            elif node.time > horizon:
                raise EvalError(f"time {node.time} beyond horizon {horizon}")
            if isinstance(node, Alive):
                cells: tuple[int, ...] = (node.cell,)
            elif isinstance(node, FracLive):
                cells = node.space.cells
            else:
                cells = node.structure.space.cells
                for value in node.structure.values:
                    if value >= system.n_states:
                        raise EvalError(
                            f"state value {value} outside alphabet 0..{system.n_states - 1}"
                        )
            for cell in cells:
                if cell >= system.n_cells:
                    raise EvalError(f"cell {cell} out of range for {system.n_cells}-cell world")
            return
        if isinstance(node, (TimeMean, Discount)):
            walk(node.body, True)
            return
        if isinstance(node, Clamp):
            walk(node.body, bound)
            return
        walk(node.left, bound)
        walk(node.right, bound)

    walk(expr, False)


# ---------------------------------------------------------------------------
# description length and priors


def description_length(expr: UtilityExpr) -> int:
    """AST node count; scalar attributes live inside their node."""
    if isinstance(expr, (Const, Alive, FracLive, Match)):
        return 1
    if isinstance(expr, (TimeMean, Discount, Clamp)):
        return 1 + description_length(expr.body)
    return 1 + description_length(expr.left) + description_length(expr.right)


@dataclass(frozen=True)
class HypothesisSet:
    """Utility-function hypotheses with a normalized prior over them."""

    exprs: tuple[UtilityExpr, ...]
    priors: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.exprs:
            raise ValueError("hypothesis set must be non-empty")
        if len(self.exprs) != len(self.priors):
            raise ValueError(f"{len(self.exprs)} hypotheses but {len(self.priors)} priors")
        texts = [unparse(e) for e in self.exprs]
        if len(set(texts)) != len(texts):
            raise ValueError("hypotheses must be syntactically distinct")
        for prior in self.priors:
            if not 0.0 < prior <= 1.0:
                raise ValueError(f"prior {prior} outside (0, 1]")
        total = 0.0
        for prior in self.priors:
            total += prior
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {total!r}, not 1")

    def __len__(self) -> int:
        return len(self.exprs)


def make_prior(
    exprs: Sequence[UtilityExpr],
    mode: str = "uniform",
    weights: Sequence[float] | None = None,
) -> HypothesisSet:
    """Attach a normalized prior to hypotheses.

    ``mdl`` weighs each hypothesis by ``2**-description_length``; ``uniform``
    splits mass equally; ``explicit`` normalizes caller-provided positive
    weights.
    """
    exprs = tuple(exprs)
    if not exprs:
        raise ValueError("hypothesis list must be non-empty")
    if mode == "mdl":
        lengths = [description_length(e) for e in exprs]
        shift = max(lengths)
        int_weights = [2 ** (shift - length) for length in lengths]
        total = sum(int_weights)
        priors = tuple(w / total for w in int_weights)
    elif mode == "uniform":
        priors = tuple(1.0 / len(exprs) for _ in exprs)
    elif mode == "explicit":
        if weights is None:
            raise ValueError("explicit mode requires weights")
        if len(weights) != len(exprs):
            raise ValueError(f"{len(exprs)} hypotheses but {len(weights)} weights")
        for weight in weights:
            if not weight > 0 or math.isinf(weight):
                raise ValueError(f"weights must be positive and finite, got {weight!r}")
        total_w = 0.0
        for weight in weights:
            total_w += weight
        priors = tuple(w / total_w for w in weights)
    else:
        raise ValueError(f"unknown prior mode {mode!r}")
    return HypothesisSet(exprs=exprs, priors=priors)


# ---------------------------------------------------------------------------
# hypothesis enumeration


@dataclass(frozen=True)
class OperatorWhitelist:
    """Which operators enumeration may use, plus pools for their attributes."""

    operators: frozenset[str]
    const_values: tuple[float, ...] = ()
    fraclive_spaces: tuple[Space, ...] = ()
    match_structures: tuple[Structure, ...] = ()
    discount_gammas: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "operators", frozenset(self.operators))
        object.__setattr__(self, "const_values", tuple(self.const_values))
        object.__setattr__(self, "fraclive_spaces", tuple(self.fraclive_spaces))
        object.__setattr__(self, "match_structures", tuple(self.match_structures))
        object.__setattr__(self, "discount_gammas", tuple(self.discount_gammas))
        unknown = self.operators - _OPERATOR_NAMES
        if unknown:
            raise ValueError(f"unknown operators {sorted(unknown)}")
        if not self.operators:
            raise ValueError("operator whitelist must be non-empty")
        for op, pool in [
            ("const", self.const_values),
            ("fraclive", self.fraclive_spaces),
            ("match", self.match_structures),
            ("discount", self.discount_gammas),
        ]:
            if op in self.operators and not pool:
                raise ValueError(f"operator '{op}' requires a non-empty attribute pool")


def enumerate_hypotheses(
    system: CellularSystem,
    horizon: int,
    max_nodes: int,
    whitelist: OperatorWhitelist,
    cap: int = HYPOTHESIS_ENUMERATION_CAP,
) -> list[UtilityExpr]:
    """All well-formed expressions up to ``max_nodes`` over the whitelist.

    Leaves referencing the bound variable ``t`` are generated only when a
    ``timemean``/``discount`` binder is whitelisted, and only ever appear
    under one; results are deduplicated by canonical text and returned in
    canonical order (node count ascending, then lexicographic text).
    """
    if max_nodes < 1:
        raise ValueError(f"max_nodes must be positive, got {max_nodes}")
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    ops = whitelist.operators
    binders = bool(ops & {"timemean", "discount"})
    times: list[TimeRef] = list(range(horizon + 1))
    open_times: list[TimeRef] = [TVAR] if binders else []

    leaves: list[tuple[UtilityExpr, bool]] = []
    if "const" in ops:
        leaves.extend((Const(v), False) for v in whitelist.const_values)
    if "alive" in ops:
        for cell in range(system.n_cells):
            leaves.extend((Alive(cell, t), isinstance(t, TimeVar)) for t in times + open_times)
    if "fraclive" in ops:
        for space in whitelist.fraclive_spaces:
            for idx in space.cells:
                if idx >= system.n_cells:
                    raise ValueError(f"cell {idx} out of range for {system.n_cells}-cell world")
            leaves.extend((FracLive(space, t), isinstance(t, TimeVar)) for t in times + open_times)
    if "match" in ops:
        for structure in whitelist.match_structures:
            for idx in structure.space.cells:
                if idx >= system.n_cells:
                    raise ValueError(f"cell {idx} out of range for {system.n_cells}-cell world")
            for value in structure.values:
                if value >= system.n_states:
                    raise ValueError(f"state value {value} outside alphabet 0..{system.n_states - 1}")
            leaves.extend((Match(structure, t), isinstance(t, TimeVar)) for t in times + open_times)

    seen: set[str] = set()
    levels: dict[int, list[tuple[UtilityExpr, bool]]] = {}

    def keep(size: int, expr: UtilityExpr, is_open: bool) -> None:
        text = unparse(expr)
        if text in seen:
            return
        if len(seen) >= cap:
            raise CapExceededError(f"hypothesis enumeration exceeds cap {cap}")
        seen.add(text)
        levels.setdefault(size, []).append((expr, is_open))

    for expr, is_open in leaves:
        keep(1, expr, is_open)
    for size in range(2, max_nodes + 1):
        for expr, is_open in levels.get(size - 1, []):
            if "clamp" in ops:
                keep(size, Clamp(expr), is_open)
            if "timemean" in ops:
                keep(size, TimeMean(expr), False)
            if "discount" in ops:
                for gamma in whitelist.discount_gammas:
                    keep(size, Discount(gamma, expr), False)
        for left_size in range(1, size - 1):
            right_size = size - 1 - left_size
            for name in ("add", "sub", "mul", "min", "max"):
                if name not in ops:
                    continue
                cls = _BINARY_OPS[name]
                for left, left_open in levels.get(left_size, []):
                    for right, right_open in levels.get(right_size, []):
                        keep(size, cls(left, right), left_open or right_open)

    results = [
        expr
        for size in sorted(levels)
        for expr, is_open in levels[size]
        if not is_open
    ]
    results.sort(key=lambda e: (description_length(e), unparse(e)))
    return results
