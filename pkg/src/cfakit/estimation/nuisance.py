"""Logistic and linear nuisance fits, plus cell-mean fits for saturated models."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.special import expit


class FitWarning(UserWarning):
    """A nuisance fit needed regularization or did not converge."""


def design(n, *blocks, interactions=False):
    """Intercept column plus the covariate blocks (each ``(n, k)`` or ``(n,)``)."""
    cols = [np.asarray(b, dtype=float).reshape(n, -1) for b in blocks]
    cols = [c for c in cols if c.shape[1]]
    feats = np.hstack(cols) if cols else np.empty((n, 0))
    if interactions and feats.shape[1] > 1:
        k = feats.shape[1]
        extra = [feats[:, i] * feats[:, j] for i in range(k) for j in range(i + 1, k)]
        feats = np.column_stack([feats] + extra)
    return np.column_stack([np.ones(n), feats])


def fit_regression(features, targets, weights=None, ridge=1e-8):
    """Weighted least squares via the ridge-stabilized normal equations."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("no rows to fit")
    Xw = X * w[:, None]
    gram = Xw.T @ X
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        warnings.warn("collinear regression features; ridge resolves the fit", FitWarning,
                      stacklevel=2)
    return np.linalg.solve(gram + ridge * np.eye(gram.shape[0]), Xw.T @ y)


def _irls(X, y, w, ridge, max_iter, tol):
    beta = np.zeros(X.shape[1])
    pen = ridge * np.eye(X.shape[1])
    for it in range(max_iter):
        p = expit(X @ beta)
        grad = X.T @ (w * (y - p)) - ridge * beta
        hess = (X * (w * p * (1 - p))[:, None]).T @ X + pen
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return beta, False
        beta = beta + step
        if not np.all(np.isfinite(beta)):
            return beta, False
        if np.max(np.abs(step)) < tol:
            return beta, True
    return beta, False


def fit_logistic(features, labels, max_iter=100, tol=1e-8, weights=None):
    """Logistic regression by iteratively reweighted least squares.

    ``labels`` may be fractional in [0, 1] (quasi-binomial fit), which is how
    nested means of probabilities are regressed.

    Under (quasi) separation the unpenalized fit diverges; in that case the
    fit is repeated with a unit ridge penalty and a ``FitWarning`` is issued.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if np.any((y < 0) | (y > 1)):
        raise ValueError("labels must lie in [0, 1]")
    w = np.ones(len(y)) if weights is None else np.asarray(weights, dtype=float)
    beta, ok = _irls(X, y, w, 1e-10, max_iter, tol)
    if ok and np.max(np.abs(beta)) < 25:
        return beta
    warnings.warn("logistic fit separated or did not converge; using ridge fallback",
                  FitWarning, stacklevel=2)
    beta, ok = _irls(X, y, w, 1.0, max_iter, tol)
    if not ok:
        warnings.warn("ridge logistic fit reached max_iter", FitWarning, stacklevel=2)
    return beta


def predict_logistic(beta, features):
    return expit(np.asarray(features) @ beta)


def cell_codes(*blocks):
    """Integer code of each row's joint value over the given columns."""
    cols = [np.asarray(b, dtype=float).reshape(len(b), -1) for b in blocks]
    mat = np.hstack(cols)
    if mat.shape[1] == 0:
        return np.zeros(mat.shape[0], dtype=np.intp)
    _, inv = np.unique(mat, axis=0, return_inverse=True)
    return inv.ravel()


def cell_mean_fit(codes, targets, weights, n_codes):
    """Weighted mean of ``targets`` per code; NaN where a code is unseen."""
    tot = np.bincount(codes, weights=weights * targets, minlength=n_codes)
    cnt = np.bincount(codes, weights=weights, minlength=n_codes)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, tot / np.where(cnt > 0, cnt, 1), np.nan)
