"""Doubly-robust and cross-fitted estimators for TV-family measures.

Every identifiable measure is a signed sum of two building blocks, both
conditioned on an optional factual attribute value ``c`` and Z-cell:

* ``A(x | c)  = E[y_x | X=c]``
* ``B(x, x' | c) = E[y_{x, W_{x'}} | X=c]``

Each block is a ratio ``E[g] / E[h]`` whose numerator ``g`` is the
efficient influence-function term (outcome model plus weighted residual
corrections) and whose denominator ``h`` is the indicator of the
conditioning event.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from ..diagram import IDENTIFIABLE, measure_status
from ..oracle import Eq, MeasureSpec
from .nuisance import (
    FitWarning,
    cell_codes,
    cell_mean_fit,
    design,
    fit_logistic,
    fit_regression,
    predict_logistic,
)

METHODS = ("PluginDiscrete", "PluginRegression", "DR", "DML")
NUISANCES = ("parametric", "saturated")
SUPPORTED = (
    "TV", "TE", "ExpSE", "NDE", "NIE", "xTE", "xDE", "xIE", "xSE",
    "zTE", "zDE", "zIE", "xzTE", "xzDE", "xzIE", "vTE", "vDE", "vIE",
    "xDEsym", "xIEsym", "ObsDE",
)


class EstimationError(ValueError):
    pass


class NotIdentifiableError(EstimationError):
    def __init__(self, kind, status, blocking):
        self.kind, self.status, self.blocking = kind, status, tuple(blocking)
        why = ", ".join(self.blocking) or "unknown"
        super().__init__(f"{kind} is {status} under this SFM (blocked by {why})")


class EmptyCellError(EstimationError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    method: str = "DML"
    folds: int = 5
    clip: float = 0.01
    bootstrap: int = 500
    ci_level: float = 0.95
    seed: int = 0
    nuisance: str = "parametric"
    interactions: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.nuisance not in NUISANCES:
            raise ValueError(f"nuisance must be one of {NUISANCES}")
        if self.method == "DML" and self.folds < 2:
            raise ValueError("DML needs at least 2 folds")
        if not 0 < self.clip < 0.5:
            raise ValueError("clip must lie in (0, 0.5)")
        if self.bootstrap < 1:
            raise ValueError("bootstrap must be >= 1")
        if not 0 < self.ci_level < 1:
            raise ValueError("ci_level must lie in (0, 1)")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class MeasureEstimate:
    kind: str
    value: float
    stderr: float
    ci_lo: float
    ci_hi: float
    method: str
    n: int
    x0: float = 0.0
    x1: float = 1.0
    event: str = "default"
    warnings: tuple = field(default_factory=tuple)

    def to_record(self):
        def clean(v):
            return None if v is None or not np.isfinite(v) else float(v)

        return {
            "kind": self.kind, "x0": self.x0, "x1": self.x1, "event": self.event,
            "method": self.method, "value": clean(self.value), "stderr": clean(self.stderr),
            "ci": [clean(self.ci_lo), clean(self.ci_hi)], "n": self.n,
            "warnings": list(self.warnings),
        }

    def excludes_zero(self):
        return bool(self.ci_lo > 0 or self.ci_hi < 0)


# ---------------------------------------------------------------- spec parsing
def split_event(spec, sfm):
    """(c, z_predicates, other_predicates) for a spec's event."""
    c, zp, other = None, [], []
    if spec.event is not None:
        for p in spec.event.predicates:
            if p.var == sfm.x:
                if not isinstance(p, Eq):
                    raise EstimationError("X can only be conditioned on by equality")
                c = float(p.value)
            elif p.var in sfm.z:
                zp.append(p)
            else:
                other.append(p)
    return c, zp, other


def measure_terms(spec, sfm):
    """Signed building blocks for ``spec`` plus its conditioning pieces.

    Returns ``(terms, z_predicates, other_predicates)`` where each term is
    ``(coef, ("A", x, c))``, ``(coef, ("B", x, x_med, c))`` or
    ``(coef, ("O", c))`` (a factual mean, used for ObsDE).
    """
    kind, a, b = spec.kind, float(spec.x0), float(spec.x1)
    if kind not in SUPPORTED:
        raise NotIdentifiableError(kind, "NotIdentifiable", ("not estimable from data",))
    c, zp, other = split_event(spec, sfm)
    if other and kind != "ObsDE":
        bad = sorted({p.var for p in other})
        raise NotIdentifiableError(kind, "NotIdentifiable",
                                   (f"event conditions on {bad}",))
    if kind in ("xTE", "xDE", "xIE", "xDEsym", "xIEsym") and c is None:
        c = a
    if kind in ("TE", "NDE", "NIE", "ExpSE", "TV", "xSE") or kind.startswith("z"):
        if c is not None:
            raise EstimationError(f"{kind} takes no X condition")
    if kind.startswith("xz") and c is None:
        raise EstimationError(f"{kind} needs an X condition in its event")

    def A(x, cc=c):
        return ("A", x, cc)

    def B(x, xm, cc=c):
        return ("B", x, xm, cc)

    if kind == "TV":
        terms = [(1.0, A(b, b)), (-1.0, A(a, a))]
    elif kind == "ExpSE":
        terms = [(1.0, A(a, None)), (-1.0, A(a, a))]
    elif kind == "xSE":
        terms = [(1.0, A(a, b)), (-1.0, A(a, a))]
    elif kind == "ObsDE":
        terms = [(1.0, ("O", b)), (-1.0, ("O", a))]
    elif kind == "xDEsym":
        terms = [(0.5, B(b, a)), (-0.5, A(a)), (-0.5, B(a, b)), (0.5, A(b))]
    elif kind == "xIEsym":
        terms = [(0.5, B(a, b)), (-0.5, A(a)), (-0.5, B(b, a)), (0.5, A(b))]
    else:
        base = kind[-2:]
        if base == "TE":
            terms = [(1.0, A(b)), (-1.0, A(a))]
        elif base == "DE":
            terms = [(1.0, B(b, a)), (-1.0, A(a))]
        else:
            terms = [(1.0, B(a, b)), (-1.0, A(a))]
    return terms, zp, other


def check_estimable(sfm, spec):
    """Raise ``NotIdentifiableError`` unless the spec is identifiable."""
    ev = spec.event.variables if spec.event is not None else ()
    st, blocking = measure_status(sfm, spec.kind, ev)
    if st != IDENTIFIABLE:
        raise NotIdentifiableError(spec.kind, st, blocking)


def _arrays(dataset, sfm):
    X = dataset.column(sfm.x)
    u = np.unique(X)
    if not set(u.tolist()) <= {0.0, 1.0}:
        raise EstimationError("X must be binary with values in {0, 1}")
    if len(u) < 2:
        raise EstimationError("both X groups must be non-empty")
    return X, dataset.column(sfm.y), dataset.matrix(list(sfm.z)), dataset.matrix(list(sfm.w))


def _check_x_values(spec):
    if {float(spec.x0), float(spec.x1)} != {0.0, 1.0}:
        raise EstimationError("binary X: the transition must be between 0 and 1")


# ---------------------------------------------------------------------- engine
class Estimator:
    """Caches fitted nuisances so several measures share one set of fits.

    Parameters
    ----------
    dataset : Dataset
    sfm : SfmProjection
    config : EstimatorConfig
        ``method`` must be one of PluginRegression, DR, DML.
    weights : array_like, optional
        Nonnegative frequency weights (bootstrap resamples use these).
    """

    def __init__(self, dataset, sfm, config=None, weights=None):
        self.cfg = config or EstimatorConfig()
        if self.cfg.method == "PluginDiscrete":
            raise EstimationError("use plugin_discrete for the frequency-table route")
        self.sfm = sfm
        self.X, self.Y, self.Z, self.W = _arrays(dataset, sfm)
        self.n = len(self.X)
        self.w = np.ones(self.n) if weights is None else np.asarray(weights, dtype=float)
        self.data = dataset
        self.binary_y = bool(np.all((self.Y == 0) | (self.Y == 1)))
        self.warnings = []
        self._cache = {}
        n = self.n
        inter = self.cfg.interactions
        self.f_z = design(n, self.Z, interactions=inter)
        self.f_zw = design(n, self.Z, self.W, interactions=inter)
        if self.cfg.nuisance == "saturated":
            self.code_z = cell_codes(self.Z)
            self.code_zw = cell_codes(self.Z, self.W)
        rng = np.random.default_rng(self.cfg.seed)
        if self.cfg.method == "DML":
            fold = rng.permutation(n) % self.cfg.folds
            self.folds = [(np.flatnonzero(fold != k), np.flatnonzero(fold == k))
                          for k in range(self.cfg.folds)]
            half = rng.random(n) < 0.5
            self.subsplit = [(tr[half[tr]], tr[~half[tr]]) for tr, _ in self.folds]
        else:
            every = np.arange(n)
            self.folds = [(every, every)]
            self.subsplit = [(every, every)]

    # ---------------------------------------------------------- primitives
    def _fit_predict(self, target, feats, codes, train, evalr, binary):
        w = self.w[train]
        if w.sum() <= 0:
            raise EmptyCellError("a nuisance training set is empty")
        if self.cfg.nuisance == "saturated":
            ncode = int(codes.max()) + 1
            means = cell_mean_fit(codes[train], target[train], w, ncode)
            fallback = np.sum(w * target[train]) / w.sum()
            out = means[codes[evalr]]
            return np.where(np.isnan(out), fallback, out)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", FitWarning)
            if binary:
                beta = fit_logistic(feats[train], target[train], weights=w)
                out = predict_logistic(beta, feats[evalr])
            else:
                beta = fit_regression(feats[train], target[train], weights=w)
                out = feats[evalr] @ beta
        for c in caught:
            msg = str(c.message)
            if msg not in self.warnings:
                self.warnings.append(msg)
        return out

    def _crossfit(self, key, fn):
        if key not in self._cache:
            out = np.empty(self.n)
            for k, (tr, ev) in enumerate(self.folds):
                out[ev] = fn(k, tr, ev)
            self._cache[key] = out
        return self._cache[key]

    def _clip(self, p, label):
        d = self.cfg.clip
        frac = float(np.mean((p < d) | (p > 1 - d)))
        if frac > 0.10:
            msg = f"{frac:.1%} of {label} propensities clipped to [{d}, {1 - d}]"
            if msg not in self.warnings:
                self.warnings.append(msg)
        return np.clip(p, d, 1 - d)

    def px_z(self):
        """Clipped P(X=1 | Z), out of fold."""
        def fn(k, tr, ev):
            return self._fit_predict(self.X, self.f_z, getattr(self, "code_z", None),
                                     tr, ev, True)
        key = ("px_z",)
        if key not in self._cache:
            self._cache[key] = self._clip(self._crossfit(("raw",) + key, fn), "P(x|z)")
        return self._cache[key]

    def px_zw(self):
        def fn(k, tr, ev):
            return self._fit_predict(self.X, self.f_zw, getattr(self, "code_zw", None),
                                     tr, ev, True)
        key = ("px_zw",)
        if key not in self._cache:
            self._cache[key] = self._clip(self._crossfit(("raw",) + key, fn), "P(x|z,w)")
        return self._cache[key]

    def _arm(self, rows, x):
        return rows[self.X[rows] == x]

    def mu_z(self, x):
        def fn(k, tr, ev):
            return self._fit_predict(self.Y, self.f_z, getattr(self, "code_z", None),
                                     self._arm(tr, x), ev, self.binary_y)
        return self._crossfit(("mu_z", x), fn)

    def mu_zw(self, x):
        def fn(k, tr, ev):
            return self._fit_predict(self.Y, self.f_zw, getattr(self, "code_zw", None),
                                     self._arm(tr, x), ev, self.binary_y)
        return self._crossfit(("mu_zw", x), fn)

    def nu(self, x, xm):
        """E[mu(x, W, Z) | X=xm, Z], fitted on a second split of the complement."""
        codes_z = getattr(self, "code_z", None)
        codes_zw = getattr(self, "code_zw", None)

        def fn(k, tr, ev):
            s1, s2 = self.subsplit[k]
            s2 = self._arm(s2, xm)
            inner = self._fit_predict(self.Y, self.f_zw, codes_zw, self._arm(s1, x), s2,
                                      self.binary_y)
            full = np.zeros(self.n)
            full[s2] = inner
            return self._fit_predict(full, self.f_z, codes_z, s2, ev, self.binary_y)
        return self._crossfit(("nu", x, xm), fn)

    # ------------------------------------------------------------- blocks
    def _p(self, p1, x):
        return p1 if x == 1.0 else 1.0 - p1

    def block(self, term, cell):
        """Numerator and denominator arrays for one building block."""
        kind = term[0]
        c = term[-1]
        X, Y = self.X, self.Y
        h_obs = cell.astype(float) if c is None else cell * (X == c)
        if kind == "O":
            return h_obs * Y, h_obs
        plugin = self.cfg.method == "PluginRegression"
        if not plugin:
            pz = self.px_z()
            h_prop = cell.astype(float) if c is None else cell * self._p(pz, c)
        if kind == "A":
            x = term[1]
            mu = self.mu_z(x)
            g = h_obs * mu
            if not plugin:
                g = g + (X == x) * h_prop / self._p(pz, x) * (Y - mu)
            return g, h_obs
        x, xm = term[1], term[2]
        nu = self.nu(x, xm)
        g = h_obs * nu
        if not plugin:
            mu = self.mu_zw(x)
            pzw = self.px_zw()
            base = h_prop / self._p(pz, xm)
            g = (g + (X == xm) * base * (mu - nu)
                 + (X == x) * base * self._p(pzw, xm) / self._p(pzw, x) * (Y - mu))
        return g, h_obs

    def cell_mask(self, predicates):
        m = np.ones(self.n, dtype=bool)
        for p in predicates:
            m &= p.mask({p.var: self.data.column(p.var)})
        return m

    def estimate(self, spec, check=True):
        """Point estimate and influence-function standard error."""
        if check:
            check_estimable(self.sfm, spec)
        _check_x_values(spec)
        terms, zp, other = measure_terms(spec, self.sfm)
        cell = self.cell_mask(zp + other)
        w = self.w
        sw = w.sum()
        value = 0.0
        phi = np.zeros(self.n)
        for coef, term in terms:
            g, h = self.block(term, cell)
            den = np.dot(w, h) / sw
            if den <= 0:
                raise EmptyCellError(f"no rows in the conditioning event of {spec.kind} "
                                     f"(term {term[0]} with X={term[-1]})")
            theta = np.dot(w, g) / sw / den
            value += coef * theta
            phi += coef * (g - theta * h) / den
        se = float(np.sqrt(np.dot(w, phi ** 2) / sw / sw))
        return float(value), se


def _event_label(spec):
    return spec.event.describe() if spec.event is not None else "default"


def estimate_measures(dataset, sfm, specs, config=None, weights=None):
    """Estimate several measures sharing one set of nuisance fits."""
    config = config or EstimatorConfig()
    for s in specs:
        check_estimable(sfm, s)
    if config.method == "PluginDiscrete":
        from .plugin import plugin_discrete

        return [plugin_discrete(dataset, sfm, s, weights=weights) for s in specs]
    eng = Estimator(dataset, sfm, config, weights)
    zq = float(norm.ppf(0.5 + config.ci_level / 2))
    out = []
    for s in specs:
        v, se = eng.estimate(s, check=False)
        out.append(MeasureEstimate(s.kind, v, se, v - zq * se, v + zq * se, config.method, eng.n,
                                   float(s.x0), float(s.x1), _event_label(s),
                                   tuple(eng.warnings)))
    return out


def estimate_measure(dataset, sfm, spec, config=None, weights=None):
    """Estimate one measure; the CI here is a Wald interval from the IF variance.

    Use ``bootstrap_ci`` for the percentile bootstrap interval.
    """
    return estimate_measures(dataset, sfm, [spec], config, weights)[0]


__all__ = [
    "EstimatorConfig", "MeasureEstimate", "Estimator", "EstimationError",
    "NotIdentifiableError", "EmptyCellError", "estimate_measure", "estimate_measures",
    "measure_terms", "check_estimable", "MeasureSpec",
]
