"""Global welfare: expected utility summed over time steps, spaces, hypotheses.

All three sums are explicitly truncated by a TruncationPolicy (horizon, space
family, hypothesis set), and every report echoes the policy so no number is
ever quoted without its truncation.  Accumulation follows the canonical order
(time ascending, then spaces by size-then-lex, then hypothesis order); any
parallel fan-out reduces back in that order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .cellsys import CellularSystem, History
from .errors import DegenerateEvidenceError
from .inference import (
    LikelihoodModel,
    PosteriorTable,
    StructureEvent,
    event_posterior,
    observed_event,
)
from .structures import Space, SpaceFamily, enumerate_spaces
from .udsl import HypothesisSet, UtilityExpr, evaluate


class Verdict(Enum):
    BETTER = "better"
    WORSE = "worse"
    TIE = "tie"


@dataclass(frozen=True)
class TruncationPolicy:
    """The declared truncation that makes the welfare sums finite."""

    horizon: int
    space_family: SpaceFamily
    hypotheses: HypothesisSet
    beta: float
    tie_tolerance: float = 1e-9

    def __post_init__(self) -> None:
        if self.horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        if math.isnan(self.beta) or math.isinf(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be finite and non-negative, got {self.beta!r}")
        if not self.tie_tolerance > 0:
            raise ValueError(f"tie tolerance must be positive, got {self.tie_tolerance!r}")


@dataclass(frozen=True)
class Contribution:
    """One hypothesis's share of one event's expected utility."""

    event: StructureEvent
    expr: UtilityExpr
    amount: float


@dataclass(frozen=True)
class WelfareReport:
    total: float
    per_step: tuple[float, ...]
    per_space: Mapping[Space, float]
    per_event: tuple[tuple[int, Space, float], ...]
    top_contributors: tuple[Contribution, ...]
    policy: TruncationPolicy


@dataclass(frozen=True)
class ComparisonVerdict:
    difference: float
    verdict: Verdict
    partial_sums: tuple[float, ...] | None = None


def _event_result(
    system: CellularSystem,
    history: History,
    policy: TruncationPolicy,
    utilities: tuple[float, ...],
    i: int,
    space: Space,
) -> tuple[StructureEvent, PosteriorTable, tuple[float, ...], float]:
    """Posterior, per-hypothesis amounts, and expected utility for one (i, space)."""
    event = observed_event(history, space, i)
    model = LikelihoodModel(policy.beta)
    try:
        table = event_posterior(system, history, event, policy.hypotheses, model)
    except DegenerateEvidenceError as exc:
        raise DegenerateEvidenceError(f"at step {i} on space {space}: {exc}") from exc
    amounts = tuple(row.posterior * u for row, u in zip(table.rows, utilities))
    expected = 0.0
    for amount in amounts:
        expected += amount
    return event, table, amounts, expected


def _check_history(system: CellularSystem, history: History, policy: TruncationPolicy) -> None:
    if history.system != system:
        raise ValueError("history belongs to a different system")
    if history.horizon != policy.horizon:
        raise ValueError(
            f"history horizon {history.horizon} does not match policy horizon {policy.horizon}"
        )


def global_welfare(
    system: CellularSystem,
    history: History,
    policy: TruncationPolicy,
    threads: int = 1,
    top_n: int = 10,
) -> WelfareReport:
    """Total expected utility over every (step, space, hypothesis) in the policy."""
    _check_history(system, history, policy)
    spaces = enumerate_spaces(system, policy.space_family)
    utilities = tuple(evaluate(expr, history) for expr in policy.hypotheses.exprs)
    pairs = [(i, space) for i in range(policy.horizon + 1) for space in spaces]

    def compute(pair: tuple[int, Space]):
        return _event_result(system, history, policy, utilities, *pair)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(compute, pairs))
    else:
        results = [compute(pair) for pair in pairs]

    total = 0.0
    per_step = [0.0] * (policy.horizon + 1)
    per_space = {space: 0.0 for space in spaces}
    per_event = []
    contributions = []
    for (i, space), (event, _table, amounts, expected) in zip(pairs, results):
        total += expected
        per_step[i] += expected
        per_space[space] += expected
        per_event.append((i, space, expected))
        contributions.extend(
            Contribution(event=event, expr=expr, amount=amount)
            for expr, amount in zip(policy.hypotheses.exprs, amounts)
        )
    ranked = sorted(enumerate(contributions), key=lambda item: (-item[1].amount, item[0]))
    return WelfareReport(
        total=total,
        per_step=tuple(per_step),
        per_space=per_space,
        per_event=tuple(per_event),
        top_contributors=tuple(c for _, c in ranked[:top_n]),
        policy=policy,
    )


def compare_histories(
    system: CellularSystem,
    history_a: History,
    history_b: History,
    policy: TruncationPolicy,
    threads: int = 1,
    trace: bool = False,
) -> ComparisonVerdict:
    """Difference series between two histories, accumulated term-aligned.

    Each (step, space, hypothesis) term of one welfare sum is subtracted from
    its counterpart before accumulating, in canonical order; the verdict uses
    the policy's tie tolerance and is antisymmetric in the two histories.
    """
    _check_history(system, history_a, policy)
    _check_history(system, history_b, policy)
    spaces = enumerate_spaces(system, policy.space_family)
    utilities_a = tuple(evaluate(expr, history_a) for expr in policy.hypotheses.exprs)
    utilities_b = tuple(evaluate(expr, history_b) for expr in policy.hypotheses.exprs)
    pairs = [(i, space) for i in range(policy.horizon + 1) for space in spaces]

    def compute(pair: tuple[int, Space]):
        i, space = pair
        amounts_a = _event_result(system, history_a, policy, utilities_a, i, space)[2]
        amounts_b = _event_result(system, history_b, policy, utilities_b, i, space)[2]
        return amounts_a, amounts_b

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(compute, pairs))
    else:
        results = [compute(pair) for pair in pairs]

    difference = 0.0
    partials = []
    for amounts_a, amounts_b in results:
        for term_a, term_b in zip(amounts_a, amounts_b):
            difference += term_a - term_b
        partials.append(difference)
    if difference > policy.tie_tolerance:
        verdict = Verdict.BETTER
    elif difference < -policy.tie_tolerance:
        verdict = Verdict.WORSE
    else:
        verdict = Verdict.TIE
    return ComparisonVerdict(
        difference=difference,
        verdict=verdict,
        partial_sums=tuple(partials) if trace else None,
    )
