"""Experiment runner: subcommands over a declarative TOML config.

Reports are machine-readable (JSON, optionally CSV) and byte-identical across
runs on identical inputs: no timestamps, sorted keys, canonical float text.
Every report echoes the resolved truncation policy so numbers are never
quoted without the truncation that produced them.

Exit codes: 0 ok, 1 config error, 2 runtime/cap error, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .cellsys import History, history, state_to_string
from .config import Overrides, RunSetup, build_setup, load_config
from .errors import ConfigError, WelfariumError
from .inference import LikelihoodModel, PosteriorTable, event_posterior, observed_event
from .oracle import run_verification
from .structures import enumerate_spaces
from .udsl import description_length, unparse
from .welfare import TruncationPolicy, WelfareReport, compare_histories, global_welfare

CANONICAL_ORDER = (
    "time ascending, then spaces by size then lexicographic cells, then hypothesis order"
)

_COMMANDS = {
    "simulate": "evolve the configured initial state and dump the history",
    "posterior": "posterior over hypotheses for the configured (space, time) event",
    "welfare": "global welfare of the configured history under the truncation policy",
    "compare": "welfare-compare two initial states of the same system",
    "enumerate-hypotheses": "list the resolved hypothesis set with its prior",
    "verify": "compare the main path against the brute-force reference",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="welfarium",
        description="Cellular worlds, Bayesian preference inference, welfare reports.",
    )
    parser.add_argument("--version", action="version", version=f"welfarium {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, blurb in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=blurb)
        sub.add_argument("-c", "--config", required=True, metavar="PATH", help="TOML config file")
        sub.add_argument("--out", metavar="DIR", help="report directory (default from config)")
        sub.add_argument("--format", choices=["json", "csv", "both"], help="report format")
        sub.add_argument("--beta", type=float, help="override rationality coefficient")
        sub.add_argument("--horizon", type=int, help="override history horizon")
        sub.add_argument("--threads", type=int, help="worker threads for (time, space) fan-out")
        sub.add_argument("--seed", type=int, help="seed for randomized subcommands")
        if name == "compare":
            sub.add_argument("--state-a", metavar="STATE", help="first initial state (name or literal)")
            sub.add_argument("--state-b", metavar="STATE", help="second initial state (name or literal)")
    return parser


def _policy_echo(setup: RunSetup, full: bool) -> dict[str, Any]:
    echo: dict[str, Any] = {
        "system": setup.system_echo,
        "horizon": setup.horizon,
        "tie_tolerance": setup.tie_tolerance,
    }
    if full:
        echo["beta"] = setup.beta
        echo["space_family"] = setup.family_echo
        echo["spaces"] = [str(s) for s in enumerate_spaces(setup.system, setup.space_family)]
        echo["hypotheses"] = [
            {"expr": unparse(expr), "prior": prior}
            for expr, prior in zip(setup.hypotheses.exprs, setup.hypotheses.priors)
        ]
    return echo


def _payload(command: str, policy: dict[str, Any], body: dict[str, Any]) -> dict[str, Any]:
    return {
        "tool": {"name": "welfarium", "version": __version__},
        "command": command,
        "canonical_order": CANONICAL_ORDER,
        "policy": policy,
        **body,
    }


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _write_welfare_csv(path: Path, report: WelfareReport) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["i", "space", "subtotal"])
        for i, space, subtotal in report.per_event:
            writer.writerow([i, str(space), repr(subtotal)])
    print(f"wrote {path}")


def _require(setup: RunSetup, command: str, **parts: Any) -> None:
    for name, value in parts.items():
        if value is None:
            raise ConfigError(f"'{command}' needs key '{name}' in the config")


def _policy(setup: RunSetup) -> TruncationPolicy:
    return TruncationPolicy(
        horizon=setup.horizon,
        space_family=setup.space_family,
        hypotheses=setup.hypotheses,
        beta=setup.beta,
        tie_tolerance=setup.tie_tolerance,
    )


def _baseline(setup: RunSetup, command: str) -> History:
    _require(setup, command, **{"run.initial": setup.initial_text})
    initial = setup.resolve_state(setup.initial_text, "run.initial")
    return history(setup.system, initial, setup.horizon)


def _table_body(table: PosteriorTable) -> dict[str, Any]:
    return {
        "event": {
            "space": str(table.event.structure.space),
            "structure": str(table.event.structure),
            "time": table.event.time,
        },
        "evidence": table.evidence,
        "rows": [
            {
                "expr": unparse(row.expr),
                "prior": row.prior,
                "likelihood": row.likelihood,
                "posterior": row.posterior,
            }
            for row in table.rows
        ],
    }


def _cmd_simulate(setup: RunSetup, out_dir: Path) -> int:
    baseline = _baseline(setup, "simulate")
    body = {
        "initial": setup.initial_text,
        "states": [state_to_string(state) for state in baseline.states],
    }
    _write_json(out_dir / "simulate.json", _payload("simulate", _policy_echo(setup, False), body))
    return 0


def _cmd_posterior(setup: RunSetup, out_dir: Path) -> int:
    _require(
        setup,
        "posterior",
        **{"hypotheses": setup.hypotheses, "posterior.space": setup.posterior_space},
    )
    baseline = _baseline(setup, "posterior")
    event = observed_event(baseline, setup.posterior_space, setup.posterior_time)
    table = event_posterior(
        setup.system, baseline, event, setup.hypotheses, LikelihoodModel(setup.beta)
    )
    policy = _policy_echo(setup, False)
    policy["beta"] = setup.beta
    policy["hypotheses"] = [
        {"expr": unparse(expr), "prior": prior}
        for expr, prior in zip(setup.hypotheses.exprs, setup.hypotheses.priors)
    ]
    _write_json(out_dir / "posterior.json", _payload("posterior", policy, _table_body(table)))
    return 0


def _welfare_body(report: WelfareReport) -> dict[str, Any]:
    return {
        "total": report.total,
        "per_step": list(report.per_step),
        "per_space": {str(space): value for space, value in report.per_space.items()},
        "per_event": [
            {"time": i, "space": str(space), "subtotal": subtotal}
            for i, space, subtotal in report.per_event
        ],
        "top_contributors": [
            {
                "time": c.event.time,
                "space": str(c.event.structure.space),
                "structure": str(c.event.structure),
                "expr": unparse(c.expr),
                "amount": c.amount,
            }
            for c in report.top_contributors
        ],
    }


def _cmd_welfare(setup: RunSetup, out_dir: Path) -> int:
    _require(
        setup, "welfare", **{"spaces": setup.space_family, "hypotheses": setup.hypotheses}
    )
    baseline = _baseline(setup, "welfare")
    report = global_welfare(setup.system, baseline, _policy(setup), threads=setup.threads)
    if setup.out_format in ("json", "both"):
        _write_json(
            out_dir / "welfare.json",
            _payload("welfare", _policy_echo(setup, True), _welfare_body(report)),
        )
    if setup.out_format in ("csv", "both"):
        _write_welfare_csv(out_dir / "welfare.csv", report)
    return 0


def _cmd_compare(setup: RunSetup, out_dir: Path) -> int:
    _require(
        setup,
        "compare",
        **{
            "spaces": setup.space_family,
            "hypotheses": setup.hypotheses,
            "compare.state_a": setup.compare_state_a,
            "compare.state_b": setup.compare_state_b,
        },
    )
    state_a = setup.resolve_state(setup.compare_state_a, "compare.state_a")
    state_b = setup.resolve_state(setup.compare_state_b, "compare.state_b")
    history_a = history(setup.system, state_a, setup.horizon)
    history_b = history(setup.system, state_b, setup.horizon)
    policy = _policy(setup)
    outcome = compare_histories(
        setup.system, history_a, history_b, policy,
        threads=setup.threads, trace=setup.compare_trace,
    )
    body: dict[str, Any] = {
        "state_a": setup.compare_state_a,
        "state_b": setup.compare_state_b,
        "difference": outcome.difference,
        "verdict": outcome.verdict.value,
        "welfare_a": global_welfare(setup.system, history_a, policy, threads=setup.threads).total,
        "welfare_b": global_welfare(setup.system, history_b, policy, threads=setup.threads).total,
    }
    if outcome.partial_sums is not None:
        body["partial_sums"] = list(outcome.partial_sums)
    _write_json(out_dir / "compare.json", _payload("compare", _policy_echo(setup, True), body))
    return 0


def _cmd_enumerate(setup: RunSetup, out_dir: Path) -> int:
    _require(setup, "enumerate-hypotheses", hypotheses=setup.hypotheses)
    policy = _policy_echo(setup, False)
    policy["beta"] = setup.beta
    body = {
        "count": len(setup.hypotheses),
        "hypotheses": [
            {
                "expr": unparse(expr),
                "prior": prior,
                "description_length": description_length(expr),
            }
            for expr, prior in zip(setup.hypotheses.exprs, setup.hypotheses.priors)
        ],
    }
    _write_json(
        out_dir / "enumerate-hypotheses.json", _payload("enumerate-hypotheses", policy, body)
    )
    return 0


def _cmd_verify(setup: RunSetup, out_dir: Path) -> int:
    summary = run_verification(instances=setup.verify_instances, seed=setup.verify_seed)
    body = {
        "instances": summary.instances,
        "seed": setup.verify_seed,
        "posterior_tolerance": summary.posterior_tolerance,
        "welfare_tolerance": summary.welfare_tolerance,
        "max_posterior_deviation": summary.max_posterior_deviation,
        "max_welfare_deviation": summary.max_welfare_deviation,
        "failures": list(summary.failures),
        "passed": summary.passed,
    }
    _write_json(out_dir / "verify.json", _payload("verify", _policy_echo(setup, False), body))
    if not summary.passed:
        print(f"verification FAILED: {len(summary.failures)} mismatches", file=sys.stderr)
        return 3
    print(f"verification passed: {summary.instances} instances")
    return 0


_RUNNERS = {
    "simulate": _cmd_simulate,
    "posterior": _cmd_posterior,
    "welfare": _cmd_welfare,
    "compare": _cmd_compare,
    "enumerate-hypotheses": _cmd_enumerate,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = Overrides(
        beta=args.beta,
        horizon=args.horizon,
        threads=args.threads,
        out=args.out,
        format=args.format,
        seed=args.seed,
        state_a=getattr(args, "state_a", None),
        state_b=getattr(args, "state_b", None),
    )
    try:
        setup = build_setup(load_config(args.config), overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _RUNNERS[args.command](setup, Path(setup.out_dir))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (WelfariumError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
