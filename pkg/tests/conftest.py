"""Shared builders and hypothesis strategies for the test suite."""

from __future__ import annotations

import hypothesis.strategies as st

from welfarium import (
    Space,
    Structure,
    history,
    make_elementary,
    make_prior,
    make_table,
    parse,
)
from welfarium.udsl import (
    TVAR,
    Add,
    Alive,
    Clamp,
    Const,
    Discount,
    FracLive,
    Match,
    Max,
    Min,
    Mul,
    Sub,
    TimeMean,
)


def identity_world(n_cells: int = 1):
    """Every cell keeps its own state forever."""
    return make_table(n_cells, 2, [[i] for i in range(n_cells)], {(0,): 0, (1,): 1})


def flip_world():
    """A single cell that negates itself each step."""
    return make_table(1, 2, [[0]], {(0,): 1, (1,): 0})


def two_hypotheses():
    """The worked pair: a constant and survival-at-the-final-step."""
    return make_prior([parse("(const 0.5)"), parse("(alive 0 1)")], mode="uniform")


# ---------------------------------------------------------------------------
# expression strategies


def _time_refs(horizon: int, allow_tvar: bool):
    base = st.integers(0, horizon)
    if allow_tvar:
        return st.one_of(base, st.just(TVAR))
    return base


def _spaces(n_cells: int):
    return st.sets(st.integers(0, n_cells - 1), min_size=1, max_size=n_cells).map(
        Space.from_cells
    )


@st.composite
def _match_nodes(draw, n_cells: int, horizon: int, n_states: int, allow_tvar: bool):
    space = draw(_spaces(n_cells))
    values = tuple(draw(st.integers(0, n_states - 1)) for _ in space.cells)
    return Match(Structure(space, values), draw(_time_refs(horizon, allow_tvar)))


def tagged_exprs(n_cells: int, horizon: int, n_states: int = 2, allow_tvar: bool = True):
    """Strategy of (expr, has_free_t) pairs; binders close over the time variable."""
    consts = st.floats(0.0, 1.0, allow_nan=False).map(Const)
    gammas = st.floats(0.01, 0.99)

    def leaves(tvar: bool):
        return st.one_of(
            consts,
            st.builds(Alive, st.integers(0, n_cells - 1), _time_refs(horizon, tvar)),
            st.builds(FracLive, _spaces(n_cells), _time_refs(horizon, tvar)),
            _match_nodes(n_cells, horizon, n_states, tvar),
        )

    base = leaves(False).map(lambda e: (e, False))
    if allow_tvar:
        base = st.one_of(base, leaves(True).map(lambda e: (e, _has_tvar(e))))

    def extend(children):
        binary = st.sampled_from([Add, Sub, Mul, Min, Max])
        return st.one_of(
            st.builds(lambda c: (Clamp(c[0]), c[1]), children),
            st.builds(lambda c: (TimeMean(c[0]), False), children),
            st.builds(lambda g, c: (Discount(g, c[0]), False), gammas, children),
            st.builds(
                lambda cls, a, b: (cls(a[0], b[0]), a[1] or b[1]), binary, children, children
            ),
        )

    return st.recursive(base, extend, max_leaves=8)


def _has_tvar(expr) -> bool:
    if isinstance(expr, (Alive, FracLive, Match)):
        return expr.time is TVAR
    return False


def closed_exprs(n_cells: int, horizon: int, n_states: int = 2):
    """Strategy of expressions with no free time variable (evaluable at top level)."""
    return (
        tagged_exprs(n_cells, horizon, n_states)
        .filter(lambda tagged: not tagged[1])
        .map(lambda tagged: tagged[0])
    )


@st.composite
def expr_with_history(draw, width: int = 3, max_horizon: int = 3):
    """A closed expression paired with a history it can be evaluated on."""
    rule = draw(st.integers(0, 255))
    horizon = draw(st.integers(0, max_horizon))
    initial = tuple(draw(st.lists(st.integers(0, 1), min_size=width, max_size=width)))
    system = make_elementary(rule, width)
    hist = history(system, initial, horizon)
    expr = draw(closed_exprs(width, horizon))
    return expr, hist
