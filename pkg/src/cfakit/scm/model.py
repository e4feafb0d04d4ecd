"""Structural causal models, units, interventions and potential responses."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri

from .. import kernels
from ..dataset import Dataset
from . import expr as E

MAX_CF_DEPTH = 2


class StructuralError(ValueError):
    """Raised for malformed models, plans or unresolved references."""


# ----------------------------------------------------------------- exogenous
_DISTS = {"bernoulli": 1, "uniform": 2, "normal": 2, "pointmass": 1}


@dataclass(frozen=True)
class ExogenousSpec:
    """One exogenous variable and its distribution.

    ``dist`` is one of ``bernoulli(p)``, ``uniform(lo, hi)``,
    ``normal(mean, sd)`` or ``pointmass(v)``.
    """

    name: str
    dist: str
    params: tuple

    def __post_init__(self):
        dist = self.dist.lower()
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if dist not in _DISTS:
            raise StructuralError(f"unknown distribution {self.dist!r}")
        if len(self.params) != _DISTS[dist]:
            raise StructuralError(f"{dist} takes {_DISTS[dist]} parameter(s)")
        if dist == "bernoulli" and not 0.0 <= self.params[0] <= 1.0:
            raise StructuralError("bernoulli p must lie in [0, 1]")
        if dist == "uniform" and not self.params[0] < self.params[1]:
            raise StructuralError("uniform needs lo < hi")
        if dist == "normal" and not self.params[1] > 0:
            raise StructuralError("normal needs sd > 0")

    @property
    def discrete(self):
        return self.dist in ("bernoulli", "pointmass")

    def from_uniform(self, u):
        """Inverse-CDF transform of uniforms in (0, 1)."""
        p = self.params
        if self.dist == "bernoulli":
            return (u < p[0]).astype(np.float64)
        if self.dist == "uniform":
            return p[0] + (p[1] - p[0]) * u
        if self.dist == "normal":
            return p[0] + p[1] * ndtri(u)
        return np.full(u.shape, p[0])


def bernoulli(name, p):
    return ExogenousSpec(name, "bernoulli", (p,))


def uniform(name, lo=0.0, hi=1.0):
    return ExogenousSpec(name, "uniform", (lo, hi))


def normal(name, mean=0.0, sd=1.0):
    return ExogenousSpec(name, "normal", (mean, sd))


def pointmass(name, v):
    return ExogenousSpec(name, "pointmass", (v,))


# ---------------------------------------------------------------- mechanisms
@dataclass(frozen=True)
class Mechanism:
    target: str
    parents: tuple
    exogenous_args: tuple
    expr: E.Expr

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "exogenous_args", tuple(self.exogenous_args))
        allowed = set(self.parents) | set(self.exogenous_args)
        stray = E.variables(self.expr) - allowed
        if stray:
            raise StructuralError(
                f"mechanism for {self.target} references undeclared {sorted(stray)}"
            )


@dataclass(frozen=True)
class Roles:
    """SFM role assignment carried by built-in scenarios."""

    x: str
    y: str
    z: tuple = ()
    w: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "w", tuple(self.w))


@dataclass(frozen=True)
class StructuralModel:
    exogenous: tuple
    mechanisms: tuple
    roles: Roles | None = None
    name: str = ""
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "exogenous", tuple(self.exogenous))
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))
        exo_names = [e.name for e in self.exogenous]
        if len(set(exo_names)) != len(exo_names):
            raise StructuralError("duplicate exogenous names")
        seen = set()
        for m in self.mechanisms:
            if m.target in seen or m.target in exo_names:
                raise StructuralError(f"duplicate variable {m.target}")
            for p in m.parents:
                if p not in seen:
                    raise StructuralError(
                        f"{m.target} reads {p}, which is not an earlier mechanism"
                    )
            for a in m.exogenous_args:
                if a not in exo_names:
                    raise StructuralError(f"{m.target} uses undeclared exogenous {a}")
            seen.add(m.target)
        if self.roles is not None:
            r = self.roles
            for v in (r.x, r.y, *r.z, *r.w):
                if v not in seen:
                    raise StructuralError(f"role variable {v} is not endogenous")

    @property
    def endogenous(self):
        return tuple(m.target for m in self.mechanisms)

    @property
    def exogenous_names(self):
        return tuple(e.name for e in self.exogenous)

    def mechanism(self, target):
        for m in self.mechanisms:
            if m.target == target:
                return m
        raise StructuralError(f"no mechanism for {target}")

    def discrete_variables(self):
        """Endogenous and exogenous names whose support is finite."""
        disc = {e.name for e in self.exogenous if e.discrete}
        for m in self.mechanisms:
            if E.is_discrete(m.expr, disc):
                disc.add(m.target)
        return disc


# --------------------------------------------------------------------- units
class Unit(Mapping):
    """A single assignment of all exogenous variables."""

    def __init__(self, assignment):
        self._a = dict((k, float(v)) for k, v in assignment.items())

    def __getitem__(self, k):
        return self._a[k]

    def __iter__(self):
        return iter(self._a)

    def __len__(self):
        return len(self._a)

    def __repr__(self):
        return f"Unit({self._a})"


class UnitBatch(Sequence):
    """Columnar storage of many units; indexes to :class:`Unit`."""

    def __init__(self, columns, n):
        self.columns = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}
        self.n = n

    def __len__(self):
        return self.n

    def __getitem__(self, i):
        if isinstance(i, slice):
            idx = range(*i.indices(self.n))
            return [self[j] for j in idx]
        if i < 0:
            i += self.n
        if not 0 <= i < self.n:
            raise IndexError(i)
        return Unit({k: v[i] for k, v in self.columns.items()})

    def take(self, idx):
        return UnitBatch({k: v[idx] for k, v in self.columns.items()}, len(idx))

    def __eq__(self, other):
        if not isinstance(other, UnitBatch) or other.n != self.n:
            return False
        return self.columns.keys() == other.columns.keys() and all(
            np.array_equal(v, other.columns[k]) for k, v in self.columns.items()
        )

    @classmethod
    def from_units(cls, model, units):
        units = list(units)
        cols = {}
        for name in model.exogenous_names:
            try:
                cols[name] = np.array([u[name] for u in units], dtype=np.float64)
            except KeyError:
                raise StructuralError(f"unit lacks exogenous {name}") from None
        for u in units:
            if set(u) != set(model.exogenous_names):
                raise StructuralError("unit must cover exactly the exogenous set")
        return cls(cols, len(units))


def sample_units(model, n, seed, threads=1, chunk=1 << 16):
    """Draw ``n`` i.i.d. units.

    Each exogenous variable has its own counter-based stream, and the draw
    for unit ``i`` depends only on ``(seed, variable position, i)``. Splitting
    the work across threads therefore returns the same units as a serial run.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    cols = {}
    for j, spec in enumerate(model.exogenous):
        key = kernels.stream_key(int(seed), j)
        if threads > 1 and n > chunk:
            starts = range(0, n, chunk)
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(
                    lambda s: kernels.counter_uniforms(key, s, min(chunk, n - s)), starts
                ))
            u = np.concatenate(parts)
        else:
            u = kernels.counter_uniforms(key, 0, n)
        cols[spec.name] = spec.from_uniform(u)
    return UnitBatch(cols, n)


# -------------------------------------------------------------- interventions
@dataclass(frozen=True)
class CounterfactualRef:
    """The value ``var`` takes for the same unit under ``plan``."""

    var: str
    plan: "InterventionPlan"


@dataclass(frozen=True)
class InterventionPlan:
    fixed: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fixed", MappingProxyType(dict(self.fixed)))
        if self.depth() > MAX_CF_DEPTH:
            raise StructuralError(
                f"counterfactual nesting depth {self.depth()} exceeds {MAX_CF_DEPTH}"
            )

    def depth(self):
        d = 0
        for v in self.fixed.values():
            if isinstance(v, CounterfactualRef):
                d = max(d, 1 + v.plan.depth())
        return d

    def __hash__(self):
        return hash(tuple(sorted((k, repr(v)) for k, v in self.fixed.items())))

    def __eq__(self, other):
        return isinstance(other, InterventionPlan) and dict(self.fixed) == dict(other.fixed)


EMPTY_PLAN = InterventionPlan()


def do(**fixed):
    return InterventionPlan(fixed)


def _check_plan(model, plan):
    endo = set(model.endogenous)
    for k, v in plan.fixed.items():
        if k not in endo:
            raise StructuralError(f"plan fixes unknown variable {k}")
        if isinstance(v, CounterfactualRef):
            if v.var not in endo:
                raise StructuralError(f"reference to unknown variable {v.var}")
            _check_plan(model, v.plan)


def evaluate_batch(model, units, plan=EMPTY_PLAN):
    """Potential responses of every endogenous variable for all ``units``."""
    _check_plan(model, plan)
    return _evaluate(model, units, plan)


def _evaluate(model, units, plan):
    n = len(units)
    env = dict(units.columns)
    fixed = {}
    for k, v in plan.fixed.items():
        if isinstance(v, CounterfactualRef):
            fixed[k] = _evaluate(model, units, v.plan)[v.var]
        else:
            fixed[k] = np.full(n, float(v))
    out = {}
    for m in model.mechanisms:
        if m.target in fixed:
            val = fixed[m.target]
        else:
            val = E.evaluate(m.expr, env)
            val = np.broadcast_to(np.asarray(val, dtype=np.float64), (n,)).copy()
        env[m.target] = val
        out[m.target] = val
    return out


def evaluate(model, u, plan=EMPTY_PLAN):
    """Potential response of one unit as a ``{variable: value}`` mapping."""
    batch = UnitBatch.from_units(model, [u])
    res = evaluate_batch(model, batch, plan)
    return {k: float(v[0]) for k, v in res.items()}


def sample_observational(model, n, seed, threads=1):
    units = sample_units(model, n, seed, threads=threads)
    vals = _evaluate(model, units, EMPTY_PLAN)
    names = model.endogenous
    table = np.column_stack([vals[k] for k in names]) if names else np.empty((n, 0))
    return Dataset(names, table.reshape(n, len(names)))
