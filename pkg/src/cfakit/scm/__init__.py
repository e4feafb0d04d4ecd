"""Structural causal models: mechanisms, units, interventions, scenarios."""
from .expr import Expr, ExprError, const, expit, land, lor, lt, maximum, minimum, var
from .model import (
    EMPTY_PLAN,
    CounterfactualRef,
    ExogenousSpec,
    InterventionPlan,
    Mechanism,
    Roles,
    StructuralError,
    StructuralModel,
    Unit,
    UnitBatch,
    bernoulli,
    do,
    evaluate,
    evaluate_batch,
    normal,
    pointmass,
    sample_observational,
    sample_units,
    uniform,
)
from .scenarios import SCENARIOS, ScenarioId, UnknownScenario, builtin_scenario
