"""Fair prediction: constrained linear fits, Causal IF transport and auditing."""
from .audit import AuditReport, ComplianceCurve, audit_predictor, fpt_experiment
from .linear import (
    EFFECTS,
    ConstraintVectors,
    FairFitWarning,
    LinearPredictor,
    closed_form_projection,
    estimate_constraint_vectors,
    inproc_fair_fit,
    kkt_solve,
    moments,
    ols_fit,
    training_mse,
    tv_only_fit,
)
from .transport import CausalIFConfig, TransportError, TransportMap, causal_if

__all__ = [
    "AuditReport", "ComplianceCurve", "audit_predictor", "fpt_experiment", "EFFECTS",
    "ConstraintVectors", "FairFitWarning", "LinearPredictor", "closed_form_projection",
    "estimate_constraint_vectors", "inproc_fair_fit", "kkt_solve", "moments", "ols_fit",
    "training_mse", "tv_only_fit", "CausalIFConfig", "TransportError", "TransportMap",
    "causal_if",
]
