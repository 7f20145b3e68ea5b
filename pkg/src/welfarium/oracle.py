"""Brute-force reference implementations of the inference and welfare math.

Everything here recomputes posteriors and welfare by naive enumeration --
direct exponentials, plain sums, no shared normalization or counterfactual
helpers with the main path -- so agreement between the two is evidence, not
tautology.  Deliberately slow and capped to small instances; used only by
tests and the ``verify`` subcommand.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .cellsys import (
    Boundary,
    CellularSystem,
    History,
    history,
    make_elementary,
    make_table,
    step,
)
from .errors import CapExceededError
from .inference import (
    LikelihoodModel,
    PosteriorRow,
    PosteriorTable,
    StructureEvent,
    event_posterior,
    observed_event,
)
from .structures import (
    AllUpToSize,
    ExplicitSpaces,
    Space,
    SpaceFamily,
    Structure,
    enumerate_spaces,
    enumerate_structures,
    restrict,
    splice,
)
from .udsl import (
    Add,
    Alive,
    Clamp,
    Const,
    Discount,
    FracLive,
    HypothesisSet,
    Match,
    Max,
    Min,
    Mul,
    Sub,
    TimeMean,
    TVAR,
    UtilityExpr,
    evaluate,
    make_prior,
    unparse,
)
from .welfare import TruncationPolicy, global_welfare

MAX_STRUCTURES = 256
MAX_HYPOTHESES = 64
MAX_HORIZON = 8


def _check_caps(system: CellularSystem, space: Space, horizon: int, n_hypotheses: int) -> None:
    count = system.n_states ** len(space.cells)
    if count > MAX_STRUCTURES:
        raise CapExceededError(f"{count} candidate structures exceed oracle cap {MAX_STRUCTURES}")
    if n_hypotheses > MAX_HYPOTHESES:
        raise CapExceededError(f"{n_hypotheses} hypotheses exceed oracle cap {MAX_HYPOTHESES}")
    if horizon > MAX_HORIZON:
        raise CapExceededError(f"horizon {horizon} exceeds oracle cap {MAX_HORIZON}")


def _chooser_value(
    system: CellularSystem, baseline: History, i: int, candidate: Structure, expr: UtilityExpr
) -> float:
    states = [baseline.states[n] for n in range(i)]
    states.append(splice(baseline.states[i], candidate))
    while len(states) < baseline.horizon + 1:
        states.append(step(system, states[-1]))
    return evaluate(expr, History(system=system, states=tuple(states)))


def oracle_posterior(
    system: CellularSystem,
    baseline: History,
    space: Space,
    i: int,
    hypotheses: HypothesisSet,
    beta: float,
) -> PosteriorTable:
    """Posterior for the structure observed at (space, i), by direct enumeration."""
    _check_caps(system, space, baseline.horizon, len(hypotheses))
    observed = restrict(baseline.states[i], space)
    candidates = enumerate_structures(space, system.n_states)
    observed_index = candidates.index(observed)
    likelihoods = []
    for expr in hypotheses.exprs:
        weights = [
            math.exp(beta * _chooser_value(system, baseline, i, candidate, expr))
            for candidate in candidates
        ]
        likelihoods.append(weights[observed_index] / sum(weights))
    evidence = sum(l * p for l, p in zip(likelihoods, hypotheses.priors))
    rows = tuple(
        PosteriorRow(expr=expr, prior=p, likelihood=l, posterior=l * p / evidence)
        for expr, p, l in zip(hypotheses.exprs, hypotheses.priors, likelihoods)
    )
    return PosteriorTable(event=StructureEvent(structure=observed, time=i), rows=rows, evidence=evidence)


def oracle_welfare(system: CellularSystem, hist: History, policy: TruncationPolicy) -> float:
    """Global welfare by the naive triple loop over steps, spaces, hypotheses."""
    spaces = enumerate_spaces(system, policy.space_family)
    total = 0.0
    for i in range(policy.horizon + 1):
        for space in spaces:
            table = oracle_posterior(system, hist, space, i, policy.hypotheses, policy.beta)
            total += sum(row.posterior * evaluate(row.expr, hist) for row in table.rows)
    return total


# ---------------------------------------------------------------------------
# randomized verification harness


@dataclass
class Instance:
    """One randomized small world with everything a verification check needs."""

    system: CellularSystem
    history: History
    policy: TruncationPolicy
    space: Space
    time: int


def random_expr(
    rng: random.Random,
    n_cells: int,
    n_states: int,
    horizon: int,
    budget: int,
    allow_tvar: bool = False,
) -> UtilityExpr:
    """A random well-formed expression of at most ``budget`` nodes."""

    def time_ref(inside_binder: bool):
        if inside_binder and rng.random() < 0.5:
            return TVAR
        return rng.randint(0, horizon)

    def space_ref() -> Space:
        size = rng.randint(1, min(2, n_cells))
        return Space.from_cells(rng.sample(range(n_cells), size))

    def build(budget: int, inside_binder: bool) -> UtilityExpr:
        if budget <= 1:
            kind = rng.choice(["const", "alive", "fraclive", "match"])
            if kind == "const":
                return Const(rng.random())
            if kind == "alive":
                return Alive(rng.randrange(n_cells), time_ref(inside_binder))
            if kind == "fraclive":
                return FracLive(space_ref(), time_ref(inside_binder))
            space = space_ref()
            values = tuple(rng.randrange(n_states) for _ in space.cells)
            return Match(Structure(space, values), time_ref(inside_binder))
        kind = rng.choice(["leaf", "clamp", "timemean", "discount", "binary", "binary"])
        if kind == "leaf":
            return build(1, inside_binder)
        if kind == "clamp":
            return Clamp(build(budget - 1, inside_binder))
        if kind == "timemean":
            return TimeMean(build(budget - 1, True))
        if kind == "discount":
            return Discount(rng.uniform(0.05, 0.95), build(budget - 1, True))
        cls = rng.choice([Add, Sub, Mul, Min, Max])
        left_budget = rng.randint(1, budget - 2) if budget > 2 else 1
        left = build(left_budget, inside_binder)
        right = build(budget - 1 - left_budget, inside_binder)
        return cls(left, right)

    return build(budget, False)


def random_instance(
    rng: random.Random,
    max_cells: int = 3,
    max_horizon: int = 3,
    max_hypotheses: int = 8,
    state_counts: tuple[int, ...] = (2,),
) -> Instance:
    """A random small system, history, policy, and event within the oracle caps."""
    n_cells = rng.randint(1, max_cells)
    n_states = rng.choice(state_counts)
    if n_states == 2 and rng.random() < 0.4:
        boundary = rng.choice([Boundary.TOROIDAL, Boundary.FIXED_ZERO])
        system = make_elementary(rng.randrange(256), n_cells, boundary)
    else:
        neighborhoods = []
        table = {}
        for _ in range(n_cells):
            size = rng.randint(1, min(3, n_cells))
            neighborhoods.append(tuple(sorted(rng.sample(range(n_cells), size))))
        sizes = {len(nb) for nb in neighborhoods}
        for size in sizes:
            for key in _all_keys(n_states, size):
                table[key] = rng.randrange(n_states)
        system = make_table(n_cells, n_states, neighborhoods, table)
    initial = tuple(rng.randrange(n_states) for _ in range(n_cells))
    horizon = rng.randint(0, max_horizon)
    hist = history(system, initial, horizon)

    family: SpaceFamily
    if rng.random() < 0.5:
        family = AllUpToSize(rng.randint(1, min(2, n_cells)))
    else:
        picks = [
            Space.from_cells(rng.sample(range(n_cells), rng.randint(1, min(2, n_cells))))
            for _ in range(rng.randint(1, 3))
        ]
        family = ExplicitSpaces(tuple(picks))

    exprs: dict[str, UtilityExpr] = {}
    for _ in range(rng.randint(1, max_hypotheses)):
        expr = random_expr(rng, n_cells, n_states, horizon, budget=rng.randint(1, 4))
        exprs.setdefault(unparse(expr), expr)
    ordered = [exprs[text] for text in sorted(exprs)]
    mode = rng.choice(["uniform", "mdl", "explicit"])
    weights = [rng.uniform(0.1, 2.0) for _ in ordered] if mode == "explicit" else None
    hypotheses = make_prior(ordered, mode=mode, weights=weights)

    beta = 0.0 if rng.random() < 0.15 else rng.uniform(0.0, 4.0)
    policy = TruncationPolicy(
        horizon=horizon, space_family=family, hypotheses=hypotheses, beta=beta
    )
    spaces = enumerate_spaces(system, family)
    return Instance(
        system=system,
        history=hist,
        policy=policy,
        space=rng.choice(spaces),
        time=rng.randint(0, horizon),
    )


def _all_keys(n_states: int, size: int):
    keys = [()]
    for _ in range(size):
        keys = [key + (value,) for key in keys for value in range(n_states)]
    return keys


@dataclass
class VerificationSummary:
    """Outcome of comparing the main path against the oracle on random instances."""

    instances: int
    posterior_tolerance: float
    welfare_tolerance: float
    max_posterior_deviation: float = 0.0
    max_welfare_deviation: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def run_verification(
    instances: int = 200,
    seed: int = 0,
    posterior_tolerance: float = 1e-10,
    welfare_tolerance: float = 1e-9,
) -> VerificationSummary:
    """Compare main-path posteriors and welfare totals against the oracle."""
    rng = random.Random(seed)
    summary = VerificationSummary(
        instances=instances,
        posterior_tolerance=posterior_tolerance,
        welfare_tolerance=welfare_tolerance,
    )
    for index in range(instances):
        inst = random_instance(rng)
        policy = inst.policy
        model = LikelihoodModel(policy.beta)
        event = observed_event(inst.history, inst.space, inst.time)
        main_table = event_posterior(inst.system, inst.history, event, policy.hypotheses, model)
        oracle_table = oracle_posterior(
            inst.system, inst.history, inst.space, inst.time, policy.hypotheses, policy.beta
        )
        deviation = abs(main_table.evidence - oracle_table.evidence)
        for main_row, oracle_row in zip(main_table.rows, oracle_table.rows):
            deviation = max(
                deviation,
                abs(main_row.prior - oracle_row.prior),
                abs(main_row.likelihood - oracle_row.likelihood),
                abs(main_row.posterior - oracle_row.posterior),
            )
        summary.max_posterior_deviation = max(summary.max_posterior_deviation, deviation)
        if deviation > posterior_tolerance:
            summary.failures.append(
                f"instance {index}: posterior deviation {deviation:.3e} exceeds {posterior_tolerance:.1e}"
            )
        main_total = global_welfare(inst.system, inst.history, policy).total
        oracle_total = oracle_welfare(inst.system, inst.history, policy)
        welfare_deviation = abs(main_total - oracle_total)
        summary.max_welfare_deviation = max(summary.max_welfare_deviation, welfare_deviation)
        if welfare_deviation > welfare_tolerance:
            summary.failures.append(
                f"instance {index}: welfare deviation {welfare_deviation:.3e} exceeds {welfare_tolerance:.1e}"
            )
    return summary
