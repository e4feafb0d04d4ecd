"""Linear predictors under TV-only and causal equality constraints.

A predictor is ``f(V) = a . V`` with ``V = (X, Z..., W..., 1)``. For such a
predictor every x-specific effect is linear in ``a``: the effect equals
``c_k . a`` for a constraint vector ``c_k`` built from group means. The
squared-loss objective is ``a' S a - 2 a' b`` with ``S = E[V V']`` and
``b = E[V Y]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..diagram import IDENTIFIABLE, check_identifiability
from ..estimation.core import NotIdentifiableError
from ..estimation.nuisance import design, fit_regression

EFFECTS = ("DE", "IE", "SE")


class FairFitWarning(UserWarning):
    pass


def feature_names(sfm):
    return (sfm.x, *sfm.z, *sfm.w, "intercept")


def feature_matrix(dataset, sfm):
    n = len(dataset)
    return np.column_stack([dataset.matrix([sfm.x, *sfm.z, *sfm.w]), np.ones(n)])


@dataclass
class LinearPredictor:
    names: tuple
    coef: np.ndarray
    notes: list = field(default_factory=list)

    def predict(self, dataset):
        cols = [c for c in self.names if c != "intercept"]
        V = np.column_stack([dataset.matrix(cols), np.ones(len(dataset))])
        return V @ self.coef

    def to_record(self):
        return {"coefficients": {k: float(v) for k, v in zip(self.names, self.coef)},
                "notes": list(self.notes)}

    @classmethod
    def from_record(cls, rec):
        names = tuple(rec["coefficients"])
        return cls(names, np.array([rec["coefficients"][k] for k in names]),
                   list(rec.get("notes", [])))


@dataclass
class ConstraintVectors:
    names: tuple
    c: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    c3: np.ndarray

    def of(self, effect):
        return {"TV": self.c, "DE": self.c1, "IE": self.c2, "SE": self.c3}[effect]

    def effects(self, coef):
        """(TV, DE, IE, SE) of a linear predictor with coefficients ``coef``."""
        return tuple(float(v @ coef) for v in (self.c, self.c1, self.c2, self.c3))


def moments(dataset, sfm):
    """Second-moment matrix ``E[V V']`` and cross moment ``E[V Y]``."""
    V = feature_matrix(dataset, sfm)
    y = dataset.column(sfm.y)
    n = len(y)
    return V.T @ V / n, V.T @ y / n


def estimate_constraint_vectors(dataset, sfm, x0=0.0, x1=1.0, given="x1", check=True):
    """Constraint vectors ``c``, ``c1`` (DE), ``c2`` (IE), ``c3`` (SE).

    With ``given="x1"`` the mediator entries are

    * ``c2 = E[W | x1] - E[W_{x0} | x1]``
    * ``c3 = E[W_{x0} | x1] - E[W | x0]``

    With ``given="x0"`` they are the identification expressions of the
    audited measures x-IE^sym(y|x0) and -x-SE_{x1,x0}(y):

    * ``c2 = E[W_{x1} | x0] - E[W | x0]``
    * ``c3 = E[W | x1] - E[W_{x1} | x0]``

    Counterfactual mediator means are regressions of W on Z in one group
    averaged over the other group's rows. In both forms ``c1 + c2 + c3 = c``.
    """
    if given not in ("x0", "x1"):
        raise ValueError("given must be 'x0' or 'x1'")
    if check:
        verdict = check_identifiability(sfm, "x-specific")
        for kind in ("xDE", "xIE", "xSE"):
            if verdict.status(kind) != IDENTIFIABLE:
                raise NotIdentifiableError(kind, verdict.status(kind), verdict.reasons[kind])
    names = feature_names(sfm)
    X = dataset.column(sfm.x)
    m0, m1 = X == x0, X == x1
    if not m0.any() or not m1.any():
        raise ValueError("both attribute groups must be non-empty")
    V = feature_matrix(dataset, sfm)
    c = V[m1].mean(axis=0) - V[m0].mean(axis=0)
    k = len(names)
    c1, c2, c3 = np.zeros(k), np.zeros(k), np.zeros(k)
    c1[0] = x1 - x0
    nz = len(sfm.z)
    zsl = slice(1, 1 + nz)
    wsl = slice(1 + nz, 1 + nz + len(sfm.w))
    c3[zsl] = c[zsl]
    if sfm.w:
        Z = dataset.matrix(list(sfm.z))
        W = dataset.matrix(list(sfm.w))
        F = design(len(X), Z)
        ew1, ew0 = W[m1].mean(axis=0), W[m0].mean(axis=0)
        if given == "x1":
            ew_cf = (F[m1] @ fit_regression(F[m0], W[m0])).mean(axis=0)
            c2[wsl] = ew1 - ew_cf
            c3[wsl] = ew_cf - ew0
        else:
            ew_cf = (F[m0] @ fit_regression(F[m1], W[m1])).mean(axis=0)
            c2[wsl] = ew_cf - ew0
            c3[wsl] = ew1 - ew_cf
    return ConstraintVectors(names, c, c1, c2, c3)


def ols_fit(dataset, sfm, ridge=1e-10):
    S, b = moments(dataset, sfm)
    coef = np.linalg.solve(S + ridge * np.eye(len(b)), b)
    return LinearPredictor(feature_names(sfm), coef)


def closed_form_projection(S, b, c, ridge=1e-10):
    """Minimizer of the squared loss subject to ``c . a = 0`` (single constraint)."""
    S = S + ridge * np.eye(len(b))
    a = np.linalg.solve(S, b)
    Sc = np.linalg.solve(S, c)
    return a - (c @ a) * Sc / (c @ Sc)


def kkt_solve(S, b, C, ridge=1e-10):
    """Minimize ``a' S a - 2 a' b`` subject to ``C a = 0`` via the KKT system.

    Rank-deficient constraint sets are regularized, with a warning.
    """
    S = S + ridge * np.eye(len(b))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    k, m = len(b), C.shape[0]
    if m == 0:
        return np.linalg.solve(S, b)
    K = np.zeros((k + m, k + m))
    K[:k, :k] = 2 * S
    K[:k, k:] = C.T
    K[k:, :k] = C
    rhs = np.concatenate([2 * b, np.zeros(m)])
    if np.linalg.matrix_rank(C) < m:
        warnings.warn("constraint vectors are collinear; using a regularized KKT system",
                      FairFitWarning, stacklevel=2)
        K[k:, k:] = -1e-8 * np.eye(m)
    return np.linalg.solve(K, rhs)[:k]


def tv_only_fit(dataset, sfm, x0=0.0, x1=1.0):
    """Least squares subject to zero TV of the predictor (closed form)."""
    S, b = moments(dataset, sfm)
    X = dataset.column(sfm.x)
    V = feature_matrix(dataset, sfm)
    c = V[X == x1].mean(axis=0) - V[X == x0].mean(axis=0)
    names = feature_names(sfm)
    if np.max(np.abs(c)) < 1e-12:
        pred = LinearPredictor(names, np.linalg.solve(S + 1e-10 * np.eye(len(b)), b))
        pred.notes.append("TV constraint vector is zero; returned the unconstrained fit")
        return pred
    return LinearPredictor(names, closed_form_projection(S, b, c))


def inproc_fair_fit(dataset, sfm, effects=EFFECTS, x0=0.0, x1=1.0, vectors=None):
    """Least squares with ``c_k . a = 0`` for each requested effect.

    By default the constraints are the ``given="x0"`` vectors, whose
    products with the coefficients are the identified x-DE^sym, x-IE^sym
    and x-SE of the predictor.
    """
    effects = tuple(effects)
    bad = set(effects) - set(EFFECTS) - {"TV"}
    if bad:
        raise ValueError(f"unknown effects {sorted(bad)}; choose from {EFFECTS}")
    S, b = moments(dataset, sfm)
    names = feature_names(sfm)
    if not effects:
        return LinearPredictor(names, kkt_solve(S, b, np.empty((0, len(b)))))
    cv = vectors or estimate_constraint_vectors(dataset, sfm, x0, x1, given="x0")
    C = np.array([cv.of(e) for e in effects])
    keep = np.max(np.abs(C), axis=1) > 1e-12
    notes = [f"{e} constraint vector is zero; dropped" for e, k in zip(effects, keep) if not k]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FairFitWarning)
        coef = kkt_solve(S, b, C[keep])
    notes += [str(w.message) for w in caught]
    return LinearPredictor(names, coef, notes)


def training_mse(pred, dataset, sfm):
    r = dataset.column(sfm.y) - pred.predict(dataset)
    return float(np.mean(r ** 2))
