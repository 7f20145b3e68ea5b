"""Deterministic cellular worlds, Bayesian preference inference for embedded
structures, and explicitly truncated global-welfare accounting."""

from .cellsys import (
    Boundary,
    CellularSystem,
    History,
    WorldState,
    history,
    make_elementary,
    make_lifelike,
    make_table,
    state_from_string,
    state_to_string,
    step,
)
from .errors import (
    CapExceededError,
    ConfigError,
    DegenerateEvidenceError,
    DslSyntaxError,
    EvalError,
    WelfariumError,
)
from .inference import (
    LikelihoodModel,
    PosteriorRow,
    PosteriorTable,
    StructureEvent,
    boltzmann,
    counterfactual_value,
    event_posterior,
    expected_utility,
    likelihood,
    observed_event,
    posterior,
)
from .structures import (
    AllUpToSize,
    ConnectedWindows,
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
    HypothesisSet,
    OperatorWhitelist,
    TVAR,
    UtilityExpr,
    description_length,
    enumerate_hypotheses,
    evaluate,
    make_prior,
    parse,
    unparse,
)
from .welfare import (
    ComparisonVerdict,
    Contribution,
    TruncationPolicy,
    Verdict,
    WelfareReport,
    compare_histories,
    global_welfare,
)

__version__ = "0.1.0"
