"""Exact frequency-table evaluation of identification expressions.

For discrete Z and W the two building blocks are

* ``A(x | c) = sum_z P(y | x, z) P(z | c)``
* ``B(x, x' | c) = sum_{z, w} P(y | x, z, w) P(w | x', z) P(z | c)``

with ``P(z | c)`` replaced by ``P(z)`` at population level and restricted
to the event's Z-cells when one is given.
"""
from __future__ import annotations

import numpy as np

from .core import (
    EmptyCellError,
    EstimationError,
    MeasureEstimate,
    _arrays,
    _check_x_values,
    _event_label,
    check_estimable,
    measure_terms,
)
from .nuisance import cell_codes

MAX_LEVELS = 50


class _Tables:
    """Weighted cell counts; codes are computed once and shared by reweighting."""

    def __init__(self, dataset, sfm, weights=None, _codes=None):
        if _codes is None:
            X, Y, Z, W = _arrays(dataset, sfm)
            for name, col in zip(list(sfm.z) + list(sfm.w), np.hstack([Z, W]).T):
                if len(np.unique(col)) > MAX_LEVELS:
                    raise EstimationError(
                        f"column {name} looks continuous; use PluginRegression")
            zc = cell_codes(Z)
            zwc = cell_codes(Z, W)
            kz, kzw = int(zc.max()) + 1, int(zwc.max()) + 1
            zw_to_z = np.zeros(kzw, dtype=np.intp)
            zw_to_z[zwc] = zc
            rep_z = np.zeros(kz, dtype=np.intp)
            rep_z[zc[::-1]] = np.arange(len(X))[::-1]
            rep_zw = np.zeros(kzw, dtype=np.intp)
            rep_zw[zwc[::-1]] = np.arange(len(X))[::-1]
            xi = X.astype(np.intp)
            _codes = dict(X=X, Y=Y, Z=Z, W=W, zc=zc, zwc=zwc, kz=kz, kzw=kzw,
                          zw_to_z=zw_to_z, rep_z=rep_z, rep_zw=rep_zw,
                          key_z=xi * kz + zc, key_zw=xi * kzw + zwc)
        self._codes = _codes
        self.__dict__.update(_codes)
        self.sfm, self.data = sfm, dataset
        n = len(self.X)
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        self.w = w
        kz, kzw = self.kz, self.kzw
        self.n_xz = np.bincount(self.key_z, w, 2 * kz).reshape(2, kz)
        self.s_xz = np.bincount(self.key_z, w * self.Y, 2 * kz).reshape(2, kz)
        self.n_xzw = np.bincount(self.key_zw, w, 2 * kzw).reshape(2, kzw)
        self.s_xzw = np.bincount(self.key_zw, w * self.Y, 2 * kzw).reshape(2, kzw)

    def reweighted(self, weights):
        return _Tables(self.data, self.sfm, weights, self._codes)

    def label_z(self, code):
        r = self.rep_z[code]
        return ", ".join(f"{v}={self.Z[r, i]:g}" for i, v in enumerate(self.sfm.z)) or "(no Z)"

    def label_zw(self, code):
        r = self.rep_zw[code]
        parts = [f"{v}={self.Z[r, i]:g}" for i, v in enumerate(self.sfm.z)]
        parts += [f"{v}={self.W[r, i]:g}" for i, v in enumerate(self.sfm.w)]
        return ", ".join(parts)

    def z_weights(self, c, in_cell):
        """P(z | c) (or P(z)) restricted to the event and renormalized."""
        base = self.n_xz.sum(axis=0) if c is None else self.n_xz[int(c)]
        q = base * in_cell
        tot = q.sum()
        if tot <= 0:
            raise EmptyCellError(f"no rows with X={c} in the conditioning event")
        return q / tot

    def A(self, x, q):
        x = int(x)
        need = q > 0
        bad = need & (self.n_xz[x] <= 0)
        if bad.any():
            code = int(np.flatnonzero(bad)[0])
            raise EmptyCellError(f"empty cell X={x}, {self.label_z(code)}")
        m = np.divide(self.s_xz[x], self.n_xz[x], out=np.zeros(self.kz), where=need)
        return float(np.sum(q[need] * m[need]))

    def B(self, x, xm, q):
        x, xm = int(x), int(xm)
        qz = q[self.zw_to_z]
        denom = self.n_xz[xm][self.zw_to_z]
        bad_den = (qz > 0) & (denom <= 0)
        if bad_den.any():
            code = int(self.zw_to_z[np.flatnonzero(bad_den)[0]])
            raise EmptyCellError(f"empty cell X={xm}, {self.label_z(code)}")
        pw = np.divide(self.n_xzw[xm], denom, out=np.zeros(self.kzw), where=qz > 0)
        need = (qz > 0) & (pw > 0)
        bad = need & (self.n_xzw[x] <= 0)
        if bad.any():
            code = int(np.flatnonzero(bad)[0])
            raise EmptyCellError(f"empty cell X={x}, {self.label_zw(code)}")
        m = np.divide(self.s_xzw[x], self.n_xzw[x], out=np.zeros(self.kzw), where=need)
        return float(np.sum(qz[need] * pw[need] * m[need]))


def _row_mask(dataset, predicates, n):
    m = np.ones(n, dtype=bool)
    for p in predicates:
        m &= p.mask({p.var: dataset.column(p.var)})
    return m


def plugin_discrete(dataset, sfm, spec, weights=None, check=True):
    """Evaluate a measure's identification expression with cell frequencies.

    Parameters
    ----------
    dataset : Dataset
    sfm : SfmProjection
    spec : MeasureSpec
    weights : array_like, optional
        Frequency weights; a bootstrap resample is a vector of counts.

    Returns
    -------
    MeasureEstimate
        The standard error and CI are NaN; ``bootstrap_ci`` fills them.
    """
    return plugin_discrete_many(dataset, sfm, [spec], weights, check)[0]


def plugin_discrete_many(dataset, sfm, specs, weights=None, check=True, tables=None):
    """``plugin_discrete`` for several specs over one set of cell tables."""
    for spec in specs:
        if check:
            check_estimable(sfm, spec)
        _check_x_values(spec)
    if tables is None:
        tables = _Tables(dataset, sfm, weights)
    elif weights is not None:
        tables = tables.reweighted(weights)
    return [_plugin_value(dataset, sfm, tables, s) for s in specs]


def _plugin_value(dataset, sfm, t, spec):
    terms, zp, other = measure_terms(spec, sfm)
    n = len(t.X)
    value = 0.0
    if spec.kind == "ObsDE":
        rows = _row_mask(dataset, zp + other, n)
        for coef, (_, c) in terms:
            sel = rows & (t.X == c)
            tot = np.dot(t.w, sel)
            if tot <= 0:
                raise EmptyCellError(f"no rows with X={c:g} in the ObsDE cell")
            value += coef * np.dot(t.w * sel, t.Y) / tot
    else:
        rows = _row_mask(dataset, zp, n)
        in_cell = np.bincount(t.zc, rows.astype(float), t.kz) > 0
        for coef, term in terms:
            q = t.z_weights(term[-1], in_cell)
            if term[0] == "A":
                value += coef * t.A(term[1], q)
            else:
                value += coef * t.B(term[1], term[2], q)
    return MeasureEstimate(spec.kind, float(value), float("nan"), float("nan"), float("nan"),
                           "PluginDiscrete", n, float(spec.x0), float(spec.x1),
                           _event_label(spec))


def obs_de(dataset, sfm, z_cell=None, w_cell=None, x0=0.0, x1=1.0):
    """P(y | x1, z, w) - P(y | x0, z, w) within one (z, w) cell.

    ``z_cell`` and ``w_cell`` map column names to values; omitted columns
    are not conditioned on.
    """
    X, Y = dataset.column(sfm.x), dataset.column(sfm.y)
    m = np.ones(len(X), dtype=bool)
    for cell in (z_cell or {}, w_cell or {}):
        for k, v in cell.items():
            m &= dataset.column(k) == v
    out = []
    for x in (x1, x0):
        sel = m & (X == x)
        if not sel.any():
            raise EmptyCellError(f"empty cell X={x:g}, {z_cell or {}}, {w_cell or {}}")
        out.append(Y[sel].mean())
    return float(out[0] - out[1])
