"""Declarative experiment configuration: TOML loading and strict validation.

Every run is reproducible from one config file plus explicit CLI overrides.
Unknown keys are rejected and every error message names the offending key.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cellsys import (
    Boundary,
    CellularSystem,
    WorldState,
    make_elementary,
    make_lifelike,
    make_table,
    state_from_string,
)
from .errors import ConfigError, DslSyntaxError, EvalError
from .structures import (
    AllUpToSize,
    ConnectedWindows,
    ExplicitSpaces,
    Space,
    SpaceFamily,
    Structure,
)
from .udsl import (
    HypothesisSet,
    OperatorWhitelist,
    UtilityExpr,
    check_references,
    enumerate_hypotheses,
    make_prior,
    parse,
)

_BOUNDARIES = {"toroidal": Boundary.TOROIDAL, "fixed_zero": Boundary.FIXED_ZERO}
_FORMATS = ("json", "csv", "both")


@dataclass
class Overrides:
    """CLI-level overrides applied while resolving the config."""

    beta: float | None = None
    horizon: int | None = None
    threads: int | None = None
    out: str | None = None
    format: str | None = None
    seed: int | None = None
    state_a: str | None = None
    state_b: str | None = None


@dataclass
class RunSetup:
    """A fully resolved experiment: typed values plus echo material."""

    system: CellularSystem
    system_echo: dict[str, Any]
    horizon: int
    beta: float
    tie_tolerance: float
    threads: int
    initial_text: str | None
    named_states: dict[str, str]
    space_family: SpaceFamily | None
    family_echo: dict[str, Any] | None
    hypotheses: HypothesisSet | None
    posterior_space: Space | None
    posterior_time: int | None
    compare_state_a: str | None
    compare_state_b: str | None
    compare_trace: bool
    verify_instances: int
    verify_seed: int
    out_dir: str
    out_format: str
    hypothesis_exprs_raw: list[str] = field(default_factory=list)

    def resolve_state(self, text: str, where: str) -> WorldState:
        """Turn a state name or literal into a world state."""
        literal = self.named_states.get(text, text)
        try:
            return state_from_string(literal, self.system)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc


class _Section:
    """One config table; tracks consumed keys so leftovers can be rejected."""

    def __init__(self, data: dict[str, Any], name: str):
        self.data = dict(data)
        self.name = name

    def take(self, key: str, types, required: bool = False, default: Any = None) -> Any:
        if key not in self.data:
            if required:
                raise ConfigError(f"missing required key '{self.name}.{key}'")
            return default
        value = self.data.pop(key)
        allowed = _astuple(types)
        if not isinstance(value, allowed) or (isinstance(value, bool) and bool not in allowed):
            raise ConfigError(
                f"key '{self.name}.{key}' has wrong type {type(value).__name__}"
            )
        return value

    def finish(self) -> None:
        for key in self.data:
            raise ConfigError(f"unknown key '{self.name}.{key}'")


def _astuple(types) -> tuple:
    return types if isinstance(types, tuple) else (types,)


def _int_list(value: Any, where: str) -> list[int]:
    if not isinstance(value, list) or any(not isinstance(v, int) or isinstance(v, bool) for v in value):
        raise ConfigError(f"key '{where}' must be a list of integers")
    return value


def _str_list(value: Any, where: str) -> list[str]:
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise ConfigError(f"key '{where}' must be a list of strings")
    return value


def _number_list(value: Any, where: str) -> list[float]:
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
    ):
        raise ConfigError(f"key '{where}' must be a list of numbers")
    return [float(v) for v in value]


def load_config(path: str | Path) -> dict[str, Any]:
    """Read and parse the TOML config file."""
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def _build_system(raw: dict[str, Any]) -> tuple[CellularSystem, dict[str, Any]]:
    section = _Section(raw, "system")
    kind = section.take("kind", str, required=True)
    boundary_name = section.take("boundary", str, default="toroidal")
    if boundary_name not in _BOUNDARIES:
        raise ConfigError(
            f"key 'system.boundary' must be one of {sorted(_BOUNDARIES)}, got {boundary_name!r}"
        )
    boundary = _BOUNDARIES[boundary_name]
    try:
        if kind == "elementary":
            rule = section.take("rule", int, required=True)
            width = section.take("width", int, required=True)
            section.finish()
            system = make_elementary(rule, width, boundary)
            echo = {"kind": kind, "rule": rule, "width": width, "boundary": boundary_name}
        elif kind == "lifelike":
            birth = _int_list(section.take("birth", list, required=True), "system.birth")
            survive = _int_list(section.take("survive", list, required=True), "system.survive")
            width = section.take("width", int, required=True)
            height = section.take("height", int, required=True)
            section.finish()
            system = make_lifelike(birth, survive, width, height, boundary)
            echo = {
                "kind": kind,
                "birth": sorted(birth),
                "survive": sorted(survive),
                "width": width,
                "height": height,
                "boundary": boundary_name,
            }
        elif kind == "table":
            cells = section.take("cells", int, required=True)
            states = section.take("states", int, required=True)
            neighborhoods = section.take("neighborhoods", list, required=True)
            table_raw = section.take("table", dict, required=True)
            section.finish()
            neighborhoods = [
                _int_list(nb, f"system.neighborhoods[{k}]") for k, nb in enumerate(neighborhoods)
            ]
            table = {}
            for key, value in table_raw.items():
                if not isinstance(key, str) or not isinstance(value, int) or isinstance(value, bool):
                    raise ConfigError("key 'system.table' must map digit strings to integers")
                try:
                    table[tuple(int(ch, 36) for ch in key)] = value
                except ValueError as exc:
                    raise ConfigError(f"key 'system.table': bad entry {key!r}: {exc}") from exc
            system = make_table(cells, states, neighborhoods, table)
            echo = {
                "kind": kind,
                "cells": cells,
                "states": states,
                "neighborhoods": neighborhoods,
                "boundary": boundary_name,
            }
        else:
            raise ConfigError(
                f"key 'system.kind' must be elementary, lifelike, or table, got {kind!r}"
            )
    except ValueError as exc:
        raise ConfigError(f"system: {exc}") from exc
    return system, echo


def _build_family(
    raw: dict[str, Any] | None, system: CellularSystem
) -> tuple[SpaceFamily | None, dict[str, Any] | None]:
    if raw is None:
        return None, None
    section = _Section(raw, "spaces")
    kind = section.take("family", str, required=True)
    if kind == "all_up_to_size":
        k = section.take("k", int, required=True)
        section.finish()
        return AllUpToSize(k), {"kind": kind, "k": k}
    if kind == "connected_windows":
        k = section.take("k", int, required=True)
        section.finish()
        return ConnectedWindows(k), {"kind": kind, "k": k}
    if kind == "explicit":
        raw_spaces = section.take("spaces", list, required=True)
        section.finish()
        spaces = []
        for index, cells in enumerate(raw_spaces):
            cells = _int_list(cells, f"spaces.spaces[{index}]")
            if not cells:
                raise ConfigError(f"key 'spaces.spaces[{index}]' must be non-empty")
            for cell in cells:
                if not 0 <= cell < system.n_cells:
                    raise ConfigError(
                        f"key 'spaces.spaces[{index}]': cell {cell} out of range for "
                        f"{system.n_cells}-cell system"
                    )
            spaces.append(Space.from_cells(cells))
        return ExplicitSpaces(tuple(spaces)), {
            "kind": kind,
            "spaces": [list(space.cells) for space in spaces],
        }
    raise ConfigError(
        f"key 'spaces.family' must be all_up_to_size, explicit, or connected_windows, got {kind!r}"
    )


def _build_hypotheses(
    raw: dict[str, Any] | None, system: CellularSystem, horizon: int
) -> tuple[HypothesisSet | None, list[str]]:
    if raw is None:
        return None, []
    section = _Section(raw, "hypotheses")
    source = section.take("source", str, default="inline")
    prior_mode = section.take("prior", str, default="uniform")
    if prior_mode not in ("uniform", "mdl", "explicit"):
        raise ConfigError(
            f"key 'hypotheses.prior' must be uniform, mdl, or explicit, got {prior_mode!r}"
        )
    weights = section.take("weights", list)
    if weights is not None:
        weights = _number_list(weights, "hypotheses.weights")

    exprs: list[UtilityExpr]
    raw_texts: list[str]
    if source == "inline":
        texts = _str_list(section.take("exprs", list, required=True), "hypotheses.exprs")
        section.finish()
        exprs = []
        for index, text in enumerate(texts):
            try:
                exprs.append(parse(text))
            except DslSyntaxError as exc:
                raise ConfigError(f"hypotheses.exprs[{index}]: {exc}") from exc
        raw_texts = texts
    elif source == "enumerate":
        max_nodes = section.take("max_nodes", int, required=True)
        operators = _str_list(section.take("operators", list, required=True), "hypotheses.operators")
        const_values = _number_list(
            section.take("const_values", list, default=[]), "hypotheses.const_values"
        )
        gammas = _number_list(
            section.take("discount_gammas", list, default=[]), "hypotheses.discount_gammas"
        )
        raw_spaces = section.take("fraclive_spaces", list, default=[])
        raw_structures = section.take("match_structures", list, default=[])
        cap = section.take("cap", int, default=None)
        section.finish()
        spaces = tuple(
            Space.from_cells(_int_list(cells, f"hypotheses.fraclive_spaces[{k}]"))
            for k, cells in enumerate(raw_spaces)
        )
        match_structures = []
        for k, entry in enumerate(raw_structures):
            where = f"hypotheses.match_structures[{k}]"
            if not isinstance(entry, dict) or set(entry) != {"cells", "values"}:
                raise ConfigError(f"key '{where}' must have exactly 'cells' and 'values'")
            cells = _int_list(entry["cells"], f"{where}.cells")
            values = _int_list(entry["values"], f"{where}.values")
            try:
                match_structures.append(Structure(Space(tuple(cells)), tuple(values)))
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
        try:
            whitelist = OperatorWhitelist(
                operators=frozenset(operators),
                const_values=tuple(const_values),
                fraclive_spaces=spaces,
                match_structures=tuple(match_structures),
                discount_gammas=tuple(gammas),
            )
            kwargs = {"cap": cap} if cap is not None else {}
            exprs = list(enumerate_hypotheses(system, horizon, max_nodes, whitelist, **kwargs))
        except ValueError as exc:
            raise ConfigError(f"hypotheses: {exc}") from exc
        if not exprs:
            raise ConfigError("hypotheses: enumeration produced no hypotheses")
        raw_texts = []
    else:
        raise ConfigError(
            f"key 'hypotheses.source' must be inline or enumerate, got {source!r}"
        )

    for index, expr in enumerate(exprs):
        try:
            check_references(expr, system, horizon)
        except EvalError as exc:
            raise ConfigError(f"hypotheses.exprs[{index}]: {exc}") from exc
    try:
        hypotheses = make_prior(exprs, mode=prior_mode, weights=weights)
    except ValueError as exc:
        raise ConfigError(f"hypotheses: {exc}") from exc
    return hypotheses, raw_texts


def build_setup(raw: dict[str, Any], overrides: Overrides | None = None) -> RunSetup:
    """Validate a parsed config and resolve it into typed values."""
    overrides = overrides or Overrides()
    known = {"system", "run", "states", "spaces", "hypotheses", "posterior", "compare", "verify", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown key '{key}'")
    if "system" not in raw:
        raise ConfigError("missing required key 'system'")
    if "run" not in raw:
        raise ConfigError("missing required key 'run'")

    system, system_echo = _build_system(raw["system"])

    run = _Section(raw["run"], "run")
    horizon = run.take("horizon", int, required=True)
    beta = float(run.take("beta", (int, float), default=1.0))
    tie_tolerance = float(run.take("tie_tolerance", (int, float), default=1e-9))
    threads = run.take("threads", int, default=1)
    initial_text = run.take("initial", str)
    run.finish()
    if overrides.horizon is not None:
        horizon = overrides.horizon
    if overrides.beta is not None:
        beta = overrides.beta
    if overrides.threads is not None:
        threads = overrides.threads
    if horizon < 0:
        raise ConfigError(f"key 'run.horizon' must be non-negative, got {horizon}")
    if threads < 1:
        raise ConfigError(f"key 'run.threads' must be positive, got {threads}")

    named_states: dict[str, str] = {}
    if "states" in raw:
        for key, value in raw["states"].items():
            if not isinstance(value, str):
                raise ConfigError(f"key 'states.{key}' must be a string")
            named_states[key] = value

    family, family_echo = _build_family(raw.get("spaces"), system)
    hypotheses, raw_texts = _build_hypotheses(raw.get("hypotheses"), system, horizon)

    posterior_space = posterior_time = None
    if "posterior" in raw:
        section = _Section(raw["posterior"], "posterior")
        cells = _int_list(section.take("space", list, required=True), "posterior.space")
        posterior_time = section.take("time", int, required=True)
        section.finish()
        if not cells:
            raise ConfigError("key 'posterior.space' must be non-empty")
        for cell in cells:
            if not 0 <= cell < system.n_cells:
                raise ConfigError(
                    f"key 'posterior.space': cell {cell} out of range for "
                    f"{system.n_cells}-cell system"
                )
        posterior_space = Space.from_cells(cells)
        if not 0 <= posterior_time <= horizon:
            raise ConfigError(
                f"key 'posterior.time' must be within 0..{horizon}, got {posterior_time}"
            )

    compare_a = compare_b = None
    compare_trace = False
    if "compare" in raw:
        section = _Section(raw["compare"], "compare")
        compare_a = section.take("state_a", str)
        compare_b = section.take("state_b", str)
        compare_trace = bool(section.take("trace", bool, default=False))
        section.finish()
    if overrides.state_a is not None:
        compare_a = overrides.state_a
    if overrides.state_b is not None:
        compare_b = overrides.state_b

    verify_instances, verify_seed = 200, 0
    if "verify" in raw:
        section = _Section(raw["verify"], "verify")
        verify_instances = section.take("instances", int, default=200)
        verify_seed = section.take("seed", int, default=0)
        section.finish()
        if verify_instances < 1:
            raise ConfigError(f"key 'verify.instances' must be positive, got {verify_instances}")
    if overrides.seed is not None:
        verify_seed = overrides.seed

    out_dir, out_format = ".", "json"
    if "output" in raw:
        section = _Section(raw["output"], "output")
        out_dir = section.take("dir", str, default=".")
        out_format = section.take("format", str, default="json")
        section.finish()
    if overrides.out is not None:
        out_dir = overrides.out
    if overrides.format is not None:
        out_format = overrides.format
    if out_format not in _FORMATS:
        raise ConfigError(f"key 'output.format' must be one of {_FORMATS}, got {out_format!r}")

    return RunSetup(
        system=system,
        system_echo=system_echo,
        horizon=horizon,
        beta=beta,
        tie_tolerance=tie_tolerance,
        threads=threads,
        initial_text=initial_text,
        named_states=named_states,
        space_family=family,
        family_echo=family_echo,
        hypotheses=hypotheses,
        posterior_space=posterior_space,
        posterior_time=posterior_time,
        compare_state_a=compare_a,
        compare_state_b=compare_b,
        compare_trace=compare_trace,
        verify_instances=verify_instances,
        verify_seed=verify_seed,
        out_dir=out_dir,
        out_format=out_format,
        hypothesis_exprs_raw=raw_texts,
    )
