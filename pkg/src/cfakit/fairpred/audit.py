"""Auditing predictions and the random-SCM compliance experiment."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..diagram import SfmProjection
from ..estimation import EstimatorConfig, estimate_measures
from ..oracle import MeasureSpec, event
from ..scm.model import sample_observational
from ..scm.scenarios import random_linear
from .linear import LinearPredictor, estimate_constraint_vectors, moments, tv_only_fit

PRED_COLUMN = "__yhat"


@dataclass
class AuditReport:
    """x-specific decomposition of a prediction column."""

    tv: object
    de: object
    ie: object
    se: object
    de_sym: object
    ie_sym: object

    @property
    def residual(self):
        return self.tv.value - (self.de.value - self.ie.value - self.se.value)

    def to_record(self):
        rec = {k: getattr(self, k).to_record() for k in
               ("tv", "de", "ie", "se", "de_sym", "ie_sym")}
        rec["combination"] = "tv = de - ie - se; de = xDE_{x0,x1}(y|x0), " \
                             "ie = xIE_{x1,x0}(y|x0), se = xSE_{x1,x0}"
        rec["residual"] = self.residual
        return rec


def audit_specs(x):
    """Specs of the audited measures; the IE term is evaluated in the x0 group."""
    return {
        "tv": MeasureSpec("TV"),
        "de": MeasureSpec("xDE"),
        "ie": MeasureSpec("xIE", 1.0, 0.0, event(**{x: 0})),
        "se": MeasureSpec("xSE", 1.0, 0.0),
        "de_sym": MeasureSpec("xDEsym"),
        "ie_sym": MeasureSpec("xIEsym"),
    }


def audit_predictor(dataset, predictor, sfm, config=None):
    """Estimate TV and the x-specific effects of a predictor's output.

    ``predictor`` is a ``LinearPredictor``, an array of predictions, or the
    name of a column already in ``dataset``.
    """
    if isinstance(predictor, LinearPredictor):
        yhat = predictor.predict(dataset)
    elif isinstance(predictor, str):
        yhat = dataset.column(predictor)
    else:
        yhat = np.asarray(predictor, dtype=float)
    data = dataset.with_column(PRED_COLUMN, yhat)
    psfm = SfmProjection(sfm.x, PRED_COLUMN, sfm.z, sfm.w, sfm.extra_bidirected)
    specs = audit_specs(sfm.x)
    ests = estimate_measures(data, psfm, list(specs.values()), config or EstimatorConfig())
    return AuditReport(**dict(zip(specs, ests)))


# ------------------------------------------------------------------ FPT runs
@dataclass
class ComplianceCurve:
    eps: np.ndarray
    probability: np.ndarray
    per_effect: dict
    effects: np.ndarray
    redrawn: int = 0
    notes: list = field(default_factory=list)

    def to_record(self):
        return {
            "eps": [float(e) for e in self.eps],
            "probability": [float(p) for p in self.probability],
            "per_effect": {k: [float(p) for p in v] for k, v in self.per_effect.items()},
            "n_scms": int(self.effects.shape[0]),
            "redrawn": self.redrawn,
            "notes": list(self.notes),
        }

    def plot_rows(self):
        return [(float(e), float(p)) for e, p in zip(self.eps, self.probability)]


def _one_scm(nz, nw, n, seed, max_redraw=10):
    """(|DE|, |IE|, |SE|) of the TV-only fit on one random SCM, plus redraw count."""
    ss = np.random.SeedSequence(seed)
    for attempt in range(max_redraw):
        model_seed, data_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
        ss = ss.spawn(1)[0]
        model = random_linear(nz, nw, model_seed)
        r = model.roles
        sfm = SfmProjection(r.x, r.y, r.z, r.w)
        data = sample_observational(model, n, data_seed)
        X = data.column(r.x)
        S, _ = moments(data, sfm)
        if X.min() == X.max() or np.linalg.cond(S) > 1e12:
            continue
        pred = tv_only_fit(data, sfm)
        cv = estimate_constraint_vectors(data, sfm, check=False)
        _, de, ie, se = cv.effects(pred.coef)
        return (abs(de), abs(ie), abs(se)), attempt
    raise RuntimeError("could not draw a non-degenerate SCM")


def fpt_experiment(nz=5, nw=5, n_scms=500, n_per_scm=10**5, eps=(0.01,), seed=0, threads=1):
    """Fraction of random linear SCMs whose TV-constrained fit is eps-compliant.

    Compliance at ``eps`` requires all three x-specific effects of the fitted
    predictor to be at most ``eps`` in magnitude; ``per_effect`` also reports
    the fraction for each effect alone.
    """
    if n_scms < 1:
        raise ValueError("n_scms must be >= 1")
    eps = np.sort(np.asarray(eps, dtype=float))
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_scms)]

    def run(s):
        return _one_scm(nz, nw, n_per_scm, s)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, seeds))
    else:
        results = [run(s) for s in seeds]
    eff = np.array([r[0] for r in results])
    redrawn = int(sum(r[1] for r in results))
    worst = eff.max(axis=1)
    prob = np.array([np.mean(worst <= e) for e in eps])
    per = {name: np.array([np.mean(eff[:, j] <= e) for e in eps])
           for j, name in enumerate(("DE", "IE", "SE"))}
    return ComplianceCurve(eps, prob, per, eff, redrawn)
