"""Bayesian preference extraction for structure events.

A structure observed at a time step is treated as the choice of an
approximately rational agent: each candidate structure on the same space is
spliced into the baseline history at that step, the world is re-evolved, and
the hypothesis utility of the resulting hybrid history is the candidate's
value.  Choice probabilities are Boltzmann (softmax) in those values with
rationality coefficient beta; Bayes' rule then turns choice likelihoods and
hypothesis priors into a posterior over utility functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, Sequence

from .cellsys import CellularSystem, History, step
from .errors import DegenerateEvidenceError
from .structures import (
    STRUCTURE_ENUMERATION_CAP,
    Space,
    Structure,
    enumerate_structures,
    restrict,
    splice,
)
from .udsl import HypothesisSet, UtilityExpr, evaluate


@dataclass(frozen=True)
class StructureEvent:
    """The event that a structure exists at a given time step."""

    structure: Structure
    time: int

    def __post_init__(self) -> None:
        if self.time < 0:
            raise ValueError(f"event time must be non-negative, got {self.time}")


@dataclass(frozen=True)
class LikelihoodModel:
    """Boltzmann rationality: choice probability ~ exp(beta * value).

    beta = 0 is indifference, beta -> infinity perfect maximization.  Values
    are counterfactual-splice utilities; that semantics is fixed.
    """

    beta: float

    VALUE_SEMANTICS: ClassVar[str] = "counterfactual_splice"

    def __post_init__(self) -> None:
        if math.isnan(self.beta) or math.isinf(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be finite and non-negative, got {self.beta!r}")


@dataclass(frozen=True)
class PosteriorRow:
    expr: UtilityExpr
    prior: float
    likelihood: float
    posterior: float


@dataclass(frozen=True)
class PosteriorTable:
    """Per-hypothesis prior, likelihood, and posterior for one event."""

    event: StructureEvent
    rows: tuple[PosteriorRow, ...]
    evidence: float

    @property
    def posteriors(self) -> tuple[float, ...]:
        return tuple(row.posterior for row in self.rows)


def counterfactual_value(
    system: CellularSystem,
    baseline: History,
    space: Space,
    i: int,
    candidate: Structure,
    expr: UtilityExpr,
) -> float:
    """Utility a hypothetical chooser attains by placing ``candidate`` at step ``i``.

    The hybrid history keeps the baseline before ``i``, splices the candidate
    into the baseline state at ``i``, and re-evolves the world afterwards.
    """
    if baseline.system != system:
        raise ValueError("baseline history belongs to a different system")
    if not 0 <= i <= baseline.horizon:
        raise ValueError(f"step {i} outside horizon 0..{baseline.horizon}")
    if candidate.space != space:
        raise ValueError(f"candidate is on space {candidate.space}, expected {space}")
    spliced = splice(baseline.states[i], candidate)
    states = list(baseline.states[:i])
    states.append(spliced)
    for _ in range(baseline.horizon - i):
        states.append(step(system, states[-1]))
    hybrid = History(system=system, states=tuple(states))
    return evaluate(expr, hybrid)


def boltzmann(values: Sequence[float], beta: float) -> list[float]:
    """Softmax of ``beta * values``, computed with max-subtraction."""
    if math.isnan(beta) or math.isinf(beta):
        raise ValueError(f"beta must be finite, got {beta!r}")
    if not values:
        raise ValueError("no values to normalize")
    scaled = [beta * v for v in values]
    peak = max(scaled)
    weights = [math.exp(s - peak) for s in scaled]
    total = 0.0
    for w in weights:
        total += w
    return [w / total for w in weights]


def likelihood(
    system: CellularSystem,
    baseline: History,
    space: Space,
    i: int,
    expr: UtilityExpr,
    model: LikelihoodModel,
    cap: int = STRUCTURE_ENUMERATION_CAP,
) -> dict[Structure, float]:
    """Choice distribution over all structures on ``space`` at step ``i``.

    Keys iterate in the canonical structure order and the probabilities sum
    to 1 (within float accumulation error).
    """
    candidates = enumerate_structures(space, system.n_states, cap=cap)
    values = [
        counterfactual_value(system, baseline, space, i, candidate, expr)
        for candidate in candidates
    ]
    probs = boltzmann(values, model.beta)
    return dict(zip(candidates, probs))


def posterior(
    event: StructureEvent,
    hypotheses: HypothesisSet,
    likelihoods: Sequence[float],
) -> PosteriorTable:
    """Bayes' rule: posterior ~ likelihood * prior, normalized by the evidence."""
    if len(likelihoods) != len(hypotheses):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(likelihoods)} likelihoods")
    for value in likelihoods:
        if math.isnan(value) or math.isinf(value) or value < 0:
            raise ValueError(f"likelihood must be finite and non-negative, got {value!r}")
    evidence = 0.0
    for expr_likelihood, prior in zip(likelihoods, hypotheses.priors):
        evidence += expr_likelihood * prior
    if evidence <= 0.0:
        raise DegenerateEvidenceError(f"evidence is {evidence!r}: every hypothesis assigns zero likelihood")
    rows = tuple(
        PosteriorRow(
            expr=expr,
            prior=prior,
            likelihood=expr_likelihood,
            posterior=expr_likelihood * prior / evidence,
        )
        for expr, prior, expr_likelihood in zip(hypotheses.exprs, hypotheses.priors, likelihoods)
    )
    return PosteriorTable(event=event, rows=rows, evidence=evidence)


def event_posterior(
    system: CellularSystem,
    baseline: History,
    event: StructureEvent,
    hypotheses: HypothesisSet,
    model: LikelihoodModel,
    cap: int = STRUCTURE_ENUMERATION_CAP,
) -> PosteriorTable:
    """Posterior over hypotheses for one structure event against a baseline."""
    space = event.structure.space
    likelihoods = []
    for expr in hypotheses.exprs:
        distribution = likelihood(system, baseline, space, event.time, expr, model, cap=cap)
        try:
            likelihoods.append(distribution[event.structure])
        except KeyError:
            raise ValueError(f"structure {event.structure} is not a candidate on {space}") from None
    return posterior(event, hypotheses, likelihoods)


def observed_event(baseline: History, space: Space, i: int) -> StructureEvent:
    """The event that the baseline history's own structure occupies ``space`` at ``i``."""
    if not 0 <= i <= baseline.horizon:
        raise ValueError(f"step {i} outside horizon 0..{baseline.horizon}")
    return StructureEvent(structure=restrict(baseline.states[i], space), time=i)


def expected_utility(table: PosteriorTable, actual: History) -> float:
    """Posterior-weighted utility of the actual history for one event."""
    total = 0.0
    for row in table.rows:
        total += row.posterior * evaluate(row.expr, actual)
    return total
