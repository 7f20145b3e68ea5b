"""Acceptance gate: one test per exit criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import json
import random
import time
from contextlib import contextmanager

import pytest
from hypothesis import given, settings

from welfarium import (
    AllUpToSize,
    LikelihoodModel,
    Space,
    boltzmann,
    compare_histories,
    enumerate_spaces,
    evaluate,
    event_posterior,
    expected_utility,
    global_welfare,
    history,
    likelihood,
    make_elementary,
    make_lifelike,
    make_prior,
    observed_event,
    parse,
    step,
    unparse,
)
from welfarium.cli import main as cli_main
from welfarium.oracle import oracle_posterior, oracle_welfare, random_instance, run_verification
from welfarium.welfare import TruncationPolicy, Verdict

from conftest import closed_exprs, expr_with_history, identity_world, two_hypotheses
from test_cli import WORKED_CONFIG, write_config
from test_welfare import worked_policy

BETA_GRID = [0.0, 0.5, 1.0, 2.0, 4.0]


@contextmanager
def criterion(number, name):
    try:
        yield
    except BaseException:
        print(f"[criterion {number}] {name}: FAIL")
        raise
    print(f"[criterion {number}] {name}: PASS")


@pytest.fixture(scope="module")
def suite():
    """200 randomized small instances: <= 3 cells, binary states, T <= 3, <= 8 hypotheses."""
    rng = random.Random(101)
    return [random_instance(rng) for _ in range(200)]


def test_criterion_1_normalization_suite(suite):
    with criterion(1, "normalization suite"):
        start = time.perf_counter()
        for inst in suite:
            model = LikelihoodModel(inst.policy.beta)
            for expr in inst.policy.hypotheses.exprs:
                dist = likelihood(inst.system, inst.history, inst.space, inst.time, expr, model)
                assert abs(sum(dist.values()) - 1.0) <= 1e-12
            event = observed_event(inst.history, inst.space, inst.time)
            table = event_posterior(inst.system, inst.history, event, inst.policy.hypotheses, model)
            assert abs(sum(table.posteriors) - 1.0) <= 1e-12
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"normalization suite took {elapsed:.1f}s"


def test_criterion_2_beta_zero_collapse(suite):
    with criterion(2, "beta-zero collapse to prior"):
        indifferent = LikelihoodModel(0.0)
        for inst in suite:
            event = observed_event(inst.history, inst.space, inst.time)
            table = event_posterior(
                inst.system, inst.history, event, inst.policy.hypotheses, indifferent
            )
            for row in table.rows:
                assert abs(row.posterior - row.prior) <= 1e-12


def test_criterion_3_oracle_equivalence():
    with criterion(3, "oracle equivalence"):
        start = time.perf_counter()
        summary = run_verification(instances=200, seed=202)
        elapsed = time.perf_counter() - start
        assert summary.passed, summary.failures
        assert summary.max_posterior_deviation <= 1e-10
        assert summary.max_welfare_deviation <= 1e-9
        assert elapsed < 60.0, f"verification took {elapsed:.1f}s"


def test_criterion_4_worked_two_hypothesis_instance():
    with criterion(4, "worked two-hypothesis instance"):
        system = identity_world()
        baseline = history(system, (1,), 1)
        hypotheses = two_hypotheses()
        space = Space((0,))

        # expected values frozen from the brute-force oracle
        oracle_table = oracle_posterior(system, baseline, space, 0, hypotheses, 1.0)
        assert oracle_table.posteriors[0] == pytest.approx(0.4061545150486907, abs=1e-9)
        assert oracle_table.posteriors[1] == pytest.approx(0.5938454849513094, abs=1e-9)

        event = observed_event(baseline, space, 0)
        table = event_posterior(system, baseline, event, hypotheses, LikelihoodModel(1.0))
        assert table.posteriors[0] == pytest.approx(0.4061545150486907, abs=1e-6)
        assert table.posteriors[1] == pytest.approx(0.5938454849513094, abs=1e-6)
        for main_row, oracle_row in zip(table.rows, oracle_table.rows):
            assert main_row.posterior == pytest.approx(oracle_row.posterior, abs=1e-10)

        assert expected_utility(table, baseline) == pytest.approx(0.796923, abs=1e-6)

        policy = worked_policy()
        report = global_welfare(system, baseline, policy)
        assert report.total == pytest.approx(1.593846, abs=1e-6)
        assert report.total == pytest.approx(
            oracle_welfare(system, baseline, policy), abs=1e-9
        )


def test_criterion_5_constants_tie():
    with criterion(5, "all-constant hypotheses tie"):
        system = make_elementary(110, 4)
        hypotheses = make_prior(
            [parse("(const 0.2)"), parse("(const 0.5)"), parse("(const 0.9)")], mode="mdl"
        )
        policy = TruncationPolicy(
            horizon=2,
            space_family=AllUpToSize(2),
            hypotheses=hypotheses,
            beta=1.3,
        )
        states = [(0, 1, 0, 0), (1, 1, 1, 1), (0, 0, 0, 0), (1, 0, 1, 0)]
        for a in states:
            for b in states:
                outcome = compare_histories(
                    system, history(system, a, 2), history(system, b, 2), policy
                )
                assert outcome.difference == 0.0
                assert outcome.verdict is Verdict.TIE


def test_criterion_6_boltzmann_monotonicity():
    with criterion(6, "Boltzmann monotonicity and shift invariance"):
        system = identity_world()
        baseline = history(system, (0,), 1)
        space = Space((0,))
        expr = parse("(alive 0 1)")
        best = None
        masses = []
        for beta in BETA_GRID:
            dist = likelihood(system, baseline, space, 0, expr, LikelihoodModel(beta))
            if best is None:
                values = {
                    candidate: evaluate(expr, history(system, candidate.values, 1))
                    for candidate in dist
                }
                best = max(dist, key=lambda c: values[c])
            masses.append(dist[best])
        assert all(a <= b for a, b in zip(masses, masses[1:]))

        rng = random.Random(66)
        for _ in range(100):
            values = [rng.random() for _ in range(rng.randint(2, 9))]
            shift = rng.uniform(-3, 3)
            beta = rng.choice(BETA_GRID)
            base = boltzmann(values, beta)
            shifted = boltzmann([v + shift for v in values], beta)
            assert max(abs(a - b) for a, b in zip(base, shifted)) <= 1e-12


def test_criterion_7_cellular_engine():
    with criterion(7, "cellular engine correctness"):
        rng = random.Random(7)
        identity_rule = make_elementary(204, 7)
        zero_rule = make_elementary(0, 7)
        for _ in range(100):
            state = tuple(rng.randint(0, 1) for _ in range(7))
            assert step(identity_rule, state) == state
            assert step(zero_rule, state) == (0,) * 7

        rule_110 = make_elementary(110, 5)
        assert step(rule_110, (0, 0, 1, 0, 0)) == (0, 1, 1, 0, 0)

        life = make_lifelike({3}, {2, 3}, 4, 4)
        block = tuple(int(ch) for ch in "0000011001100000")
        assert step(life, block) == block
        life5 = make_lifelike({3}, {2, 3}, 5, 5)
        horizontal = tuple(int(ch) for ch in "0000000000011100000000000")
        vertical = tuple(int(ch) for ch in "0000000100001000010000000")
        assert step(life5, horizontal) == vertical
        assert step(life5, vertical) == horizontal


def test_criterion_8_determinism_and_ordering(tmp_path):
    with criterion(8, "determinism and canonical ordering"):
        config = write_config(tmp_path, WORKED_CONFIG)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli_main(["welfare", "-c", config, "--out", str(out_a)]) == 0
        assert cli_main(["welfare", "-c", config, "--out", str(out_b)]) == 0
        bytes_a = (out_a / "welfare.json").read_bytes()
        assert bytes_a == (out_b / "welfare.json").read_bytes()
        json.loads(bytes_a)  # well-formed

        system = make_elementary(110, 3)
        hypotheses = make_prior(
            [parse("(alive 0 2)"), parse("(fraclive {0,1} 1)"), parse("(const 0.5)")]
        )
        policy = TruncationPolicy(
            horizon=2,
            space_family=AllUpToSize(2),
            hypotheses=hypotheses,
            beta=1.0,
        )
        baseline = history(system, (0, 1, 0), 2)
        report = global_welfare(system, baseline, policy)
        pairs = [
            (i, space)
            for i in range(policy.horizon + 1)
            for space in enumerate_spaces(system, policy.space_family)
        ]
        random.Random(17).shuffle(pairs)
        terms = []
        model = LikelihoodModel(policy.beta)
        for i, space in pairs:
            table = event_posterior(
                system, baseline, observed_event(baseline, space, i), hypotheses, model
            )
            terms.extend(row.posterior * evaluate(row.expr, baseline) for row in table.rows)
        random.Random(19).shuffle(terms)
        assert sum(terms) == pytest.approx(report.total, abs=1e-9)


def test_criterion_9_dsl_round_trip_and_range():
    with criterion(9, "DSL round-trip and evaluation range"):

        @settings(max_examples=1000, deadline=None)
        @given(expr=closed_exprs(n_cells=3, horizon=3))
        def check_round_trip(expr):
            assert parse(unparse(expr)) == expr

        @settings(max_examples=300, deadline=None)
        @given(pair=expr_with_history())
        def check_range(pair):
            expr, hist = pair
            assert 0.0 <= evaluate(expr, hist) <= 1.0

        check_round_trip()
        check_range()
