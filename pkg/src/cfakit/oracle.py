"""Ground-truth evaluation of TV-family measures directly from an SCM.

Every measure is a contrast ``E[y_{C1} | E1] - E[y_{C0} | E0]`` evaluated on
one shared sample of units. Conditioning is by rejection. When both arms
share the event, the standard error comes from the per-unit paired
differences.

Transition convention for ``MeasureSpec(x0=a, x1=b)``:

======  ===========================================
TE      y_b - y_a
DE      y_{b, W_a} - y_a
IE      y_{a, W_b} - y_a
x-SE    E[y_a | X=b] - E[y_a | X=a]
ExpSE   E[y_a] - E[y | X=a]
======  ===========================================
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagram import structural_criteria
from .scm.model import (
    EMPTY_PLAN,
    CounterfactualRef,
    InterventionPlan,
    Unit,
    UnitBatch,
    evaluate_batch,
    sample_units,
)

MIN_EFFECTIVE = 100

KINDS = (
    "TV", "TE", "ExpSE", "NDE", "NIE",
    "xTE", "xDE", "xIE", "xSE",
    "zTE", "zDE", "zIE", "xzTE", "xzDE", "xzIE",
    "vTE", "vDE", "vIE", "unitTE", "unitDE", "unitIE",
    "xDEsym", "xIEsym", "ObsDE", "PS", "PN", "JointCtf",
)
_PAIRED_BASE = {"TE", "DE", "IE"}


class DegenerateEventError(ValueError):
    """The conditioning event has too few units in the sample."""


class MeasureSpecError(ValueError):
    pass


# --------------------------------------------------------------------- events
@dataclass(frozen=True)
class Eq:
    var: str
    value: float

    def mask(self, vals):
        return vals[self.var] == self.value

    def describe(self):
        return f"{self.var}={_num(self.value)}"


@dataclass(frozen=True)
class Interval:
    """Half-open interval ``lo <= var < hi``."""

    var: str
    lo: float = -np.inf
    hi: float = np.inf

    def mask(self, vals):
        v = vals[self.var]
        return (v >= self.lo) & (v < self.hi)

    def describe(self):
        return f"{self.var} in [{_num(self.lo)},{_num(self.hi)})"


def _num(v):
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


@dataclass(frozen=True)
class Event:
    predicates: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "predicates", tuple(self.predicates))

    @property
    def variables(self):
        return {p.var for p in self.predicates}

    def mask(self, vals, n):
        m = np.ones(n, dtype=bool)
        for p in self.predicates:
            m &= p.mask(vals)
        return m

    def __and__(self, other):
        return Event(self.predicates + other.predicates)

    def describe(self):
        return " & ".join(p.describe() for p in self.predicates) or "all"


def event(**eqs):
    """Conjunction of equality predicates, e.g. ``event(X=0, Z=1)``."""
    return Event(tuple(Eq(k, float(v)) for k, v in sorted(eqs.items())))


ALL = Event()


# ---------------------------------------------------------------- measure spec
@dataclass(frozen=True)
class MeasureSpec:
    kind: str
    x0: float = 0.0
    x1: float = 1.0
    event: Event | None = None
    unit: Unit | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeasureSpecError(f"unknown measure kind {self.kind!r}")
        if self.kind.startswith("unit") and self.unit is None:
            raise MeasureSpecError("unit-level kinds need a unit")
        if self.x0 == self.x1:
            raise MeasureSpecError("x0 and x1 must differ")

    def describe(self):
        ev = self.event.describe() if self.event is not None else "default"
        return f"{self.kind}[{_num(self.x0)}->{_num(self.x1)}] | {ev}"


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    mc_stderr: float
    n_effective: int

    def to_record(self, spec=None):
        rec = {"value": self.value, "stderr": self.mc_stderr, "n_effective": self.n_effective}
        if spec is not None:
            rec = {"kind": spec.kind, "x0": spec.x0, "x1": spec.x1,
                   "event": spec.event.describe() if spec.event else "default", **rec}
        return rec


# ------------------------------------------------------------------- engine
class World:
    """A fixed sample of units plus cached potential outcomes.

    All measures computed through one ``World`` share their units, which is
    what makes the decomposition identities hold to rounding error.
    """

    def __init__(self, model, n=None, seed=0, units=None, threads=1):
        if model.roles is None:
            raise MeasureSpecError("model needs SFM roles for measure evaluation")
        self.model = model
        self.roles = model.roles
        self.units = units if units is not None else sample_units(model, n, seed, threads=threads)
        self.n = len(self.units)
        self._cache = {}
        self._discrete = model.discrete_variables()

    # plans ---------------------------------------------------------------
    def plan_x(self, x):
        return InterventionPlan({self.roles.x: float(x)})

    def plan_x_w(self, x, xw):
        """X set to ``x`` with each mediator at its value under ``X = xw``."""
        fixed = {self.roles.x: float(x)}
        for w in self.roles.w:
            fixed[w] = CounterfactualRef(w, InterventionPlan({self.roles.x: float(xw)}))
        return InterventionPlan(fixed)

    def values(self, plan=EMPTY_PLAN):
        key = plan
        if key not in self._cache:
            self._cache[key] = evaluate_batch(self.model, self.units, plan)
        return self._cache[key]

    def y(self, plan=EMPTY_PLAN):
        return self.values(plan)[self.roles.y]

    @property
    def factual(self):
        return self.values(EMPTY_PLAN)

    def mask(self, ev):
        if ev is None:
            return np.ones(self.n, dtype=bool)
        for p in ev.predicates:
            if isinstance(p, Eq) and p.var not in self._discrete:
                raise MeasureSpecError(
                    f"point conditioning on continuous {p.var}; use an Interval"
                )
            if p.var not in self.factual:
                raise MeasureSpecError(f"event references unknown variable {p.var}")
        return ev.mask(self.factual, self.n)

    # primitives ----------------------------------------------------------
    def paired(self, diff, m):
        k = int(m.sum())
        if k < MIN_EFFECTIVE:
            raise DegenerateEventError(f"only {k} units satisfy the event (need {MIN_EFFECTIVE})")
        d = diff[m]
        se = d.std(ddof=1) / np.sqrt(k) if k > 1 else 0.0
        return OracleEstimate(float(d.mean()), float(se), k)

    def two_sample(self, y1, m1, y0, m0):
        k1, k0 = int(m1.sum()), int(m0.sum())
        if min(k1, k0) < MIN_EFFECTIVE:
            raise DegenerateEventError(
                f"conditioning cells have {k1} and {k0} units (need {MIN_EFFECTIVE})"
            )
        a, b = y1[m1], y0[m0]
        se = np.sqrt(a.var(ddof=1) / k1 + b.var(ddof=1) / k0)
        return OracleEstimate(float(a.mean() - b.mean()), float(se), min(k1, k0))

    def mean(self, y, m):
        k = int(m.sum())
        if k < MIN_EFFECTIVE:
            raise DegenerateEventError(f"only {k} units satisfy the event (need {MIN_EFFECTIVE})")
        v = y[m]
        return OracleEstimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(k)), k)

    # effect contrasts ----------------------------------------------------
    def unit_diff(self, base, a, b):
        """Per-unit contrast for TE/DE/IE with transition a -> b."""
        if base == "TE":
            return self.y(self.plan_x(b)) - self.y(self.plan_x(a))
        if base == "DE":
            return self.y(self.plan_x_w(b, a)) - self.y(self.plan_x(a))
        if base == "IE":
            return self.y(self.plan_x_w(a, b)) - self.y(self.plan_x(a))
        raise MeasureSpecError(base)

    def measure(self, spec):
        return _measure(self, spec)


def _default_event(world, spec):
    kind = spec.kind
    x = world.roles.x
    if kind.startswith("x") and kind not in ("xSE",) and spec.event is None:
        return event(**{x: spec.x0})
    return spec.event


def _check_event_scope(world, spec, ev):
    if ev is None:
        return
    r = world.roles
    vs = ev.variables
    kind = spec.kind
    allowed = None
    if kind.startswith("xz"):
        allowed = {r.x, *r.z}
    elif kind in ("xTE", "xDE", "xIE", "xDEsym", "xIEsym"):
        allowed = {r.x}
    elif kind.startswith("z"):
        allowed = set(r.z)
    elif kind == "ObsDE":
        allowed = set(r.z) | set(r.w)
    elif kind in ("TE", "NDE", "NIE", "TV", "ExpSE", "xSE", "JointCtf"):
        allowed = set()
    if allowed is not None and not vs <= allowed:
        raise MeasureSpecError(
            f"{kind} cannot condition on {sorted(vs - allowed)}"
        )


def _measure(world, spec):
    kind, a, b = spec.kind, spec.x0, spec.x1
    r = world.roles
    if kind.startswith("unit"):
        return _unit_measure(world.model, spec)
    ev = _default_event(world, spec)
    _check_event_scope(world, spec, ev)
    fx = world.factual
    xcol = fx[r.x]
    y = fx[r.y]

    if kind == "TV":
        return world.two_sample(y, xcol == b, y, xcol == a)
    if kind == "ExpSE":
        return world.two_sample(world.y(world.plan_x(a)), world.mask(None), y, xcol == a)
    if kind == "xSE":
        ya = world.y(world.plan_x(a))
        return world.two_sample(ya, xcol == b, ya, xcol == a)
    if kind == "ObsDE":
        m = world.mask(ev)
        return world.two_sample(y, m & (xcol == b), y, m & (xcol == a))
    if kind == "PS":
        return world.mean(world.y(world.plan_x(b)), (xcol == a) & (y == 0))
    if kind == "PN":
        return world.mean((world.y(world.plan_x(a)) == 0).astype(float), (xcol == b) & (y == 1))
    if kind == "JointCtf":
        both = (world.y(world.plan_x(b)) == 1) & (world.y(world.plan_x(a)) == 1)
        return world.mean(both.astype(float), world.mask(None))
    if kind in ("xDEsym", "xIEsym"):
        base = kind[1:3]
        d = 0.5 * (world.unit_diff(base, a, b) - world.unit_diff(base, b, a))
        return world.paired(d, world.mask(ev))
    # remaining kinds: (prefix)(TE|DE|IE) with prefix in "", x, z, xz, v, N
    base = kind[-2:]
    if kind in ("NDE", "NIE"):
        base = kind[1:]
    return world.paired(world.unit_diff(base, a, b), world.mask(ev))


def _unit_measure(model, spec):
    batch = UnitBatch.from_units(model, [spec.unit])
    w = World(model, units=batch)
    d = w.unit_diff(spec.kind[4:], spec.x0, spec.x1)
    return OracleEstimate(float(d[0]), 0.0, 1)


def oracle_measure(model, spec, n=10**5, seed=0, world=None):
    """Monte-Carlo value of one measure.

    Parameters
    ----------
    model : StructuralModel
        Must carry SFM roles.
    spec : MeasureSpec
    n, seed : int
        Sample size and seed; ignored when ``world`` is given or the kind is
        unit-level.
    """
    if spec.kind.startswith("unit"):
        return _unit_measure(model, spec)
    if n <= 0 and world is None:
        raise ValueError("n must be positive")
    world = world or World(model, n, seed)
    return world.measure(spec)


# ------------------------------------------------------------ decompositions
@dataclass
class DecompositionReport:
    level: str
    tv: float
    de: float
    ie: float
    se: float
    residual: float
    combination: str
    n: int
    cells: list = field(default_factory=list)

    def to_record(self):
        return {k: getattr(self, k) for k in
                ("level", "tv", "de", "ie", "se", "residual", "combination", "n", "cells")}


COMBINATIONS = {
    "general": "tv = de - ie + se; de = NDE_{x0,x1}, ie = NIE_{x1,x0}, se = ExpSE_{x0} - ExpSE_{x1}",
    "x-specific": "tv = de - ie - se; de = xDE_{x0,x1}(y|x0), ie = xIE_{x1,x0}(y|x0), se = xSE_{x1,x0}",
    "z-specific": "tv = de - ie + se; de = sum_z zDE_{x0,x1}(y|z)P(z), ie = sum_z zIE_{x1,x0}(y|z)P(z), "
                  "se = ExpSE_{x0} - ExpSE_{x1}",
}


def z_cells(world, n_bins=5):
    """Partition of the unit sample by Z.

    Discrete Z uses exact value combinations; a continuous Z column is cut at
    its empirical quantiles. Returns ``[(label, mask), ...]``.
    """
    r = world.roles
    if not r.z:
        return [("all", np.ones(world.n, dtype=bool))]
    fx = world.factual
    codes = []
    labels = []
    for z in r.z:
        v = fx[z]
        if z in world._discrete:
            levels, c = np.unique(v, return_inverse=True)
            labels.append([f"{z}={_num(l)}" for l in levels])
        else:
            edges = np.quantile(v, np.linspace(0, 1, n_bins + 1)[1:-1])
            c = np.searchsorted(edges, v, side="right")
            bounds = np.r_[-np.inf, edges, np.inf]
            labels.append([f"{z} in [{bounds[i]:.4g},{bounds[i + 1]:.4g})" for i in range(n_bins)])
        codes.append(c)
    codes = np.array(codes)
    keys, inv = np.unique(codes.T, axis=0, return_inverse=True)
    inv = inv.ravel()
    out = []
    for i, key in enumerate(keys):
        out.append((" & ".join(labels[j][k] for j, k in enumerate(key)), inv == i))
    return out


def decompose_tv(model, level="x-specific", n=10**5, seed=0, world=None, x0=0.0, x1=1.0):
    """Decompose TV into direct, indirect and spurious parts on one sample."""
    world = world or World(model, n, seed)
    a, b = x0, x1
    r = world.roles
    fx = world.factual
    xcol, y = fx[r.x], fx[r.y]
    ma, mb = xcol == a, xcol == b
    for m in (ma, mb):
        if m.sum() < MIN_EFFECTIVE:
            raise DegenerateEventError("an attribute group is nearly empty")
    tv = y[mb].mean() - y[ma].mean()
    ya, yb = world.y(world.plan_x(a)), world.y(world.plan_x(b))
    yb_wa = world.y(world.plan_x_w(b, a))
    exp_se_a = ya.mean() - y[ma].mean()
    exp_se_b = yb.mean() - y[mb].mean()
    cells = []
    if level == "general":
        de = (yb_wa - ya).mean()
        ie = (yb_wa - yb).mean()
        se = exp_se_a - exp_se_b
        resid = tv - (de - ie + se)
    elif level == "x-specific":
        de = (yb_wa - ya)[ma].mean()
        ie = (yb_wa - yb)[ma].mean()
        se = yb[ma].mean() - yb[mb].mean()
        resid = tv - (de - ie - se)
    elif level == "z-specific":
        de = ie = 0.0
        for label, m in z_cells(world):
            pz = m.mean()
            zde = (yb_wa - ya)[m].mean()
            zie = (yb_wa - yb)[m].mean()
            de += pz * zde
            ie += pz * zie
            cells.append({"cell": label, "p": float(pz), "de": float(zde), "ie": float(zie)})
        se = exp_se_a - exp_se_b
        resid = tv - (de - ie + se)
    else:
        raise ValueError(f"unknown level {level!r}")
    return DecompositionReport(level, float(tv), float(de), float(ie), float(se),
                               float(resid), COMBINATIONS[level], world.n, cells)


def covariance_decomposition(model, x0=0.0, x1=1.0, n=10**5, seed=0, world=None):
    """Cov(X, Y) split into Cov(X, Y - Y_x) and Cov(X, Y_x) at ``x = x0``.

    Returns ``(cov, cov_causal, cov_spurious, stderr)``, where ``stderr`` is a
    delta-method standard error of ``cov``.
    """
    world = world or World(model, n, seed)
    r = world.roles
    x = world.factual[r.x]
    y = world.factual[r.y]
    yx = world.y(world.plan_x(x0))

    def cov(a, b):
        return float(np.mean((a - a.mean()) * (b - b.mean())))

    c, cc, cs = cov(x, y), cov(x, y - yx), cov(x, yx)
    prod = (x - x.mean()) * (y - y.mean())
    se = float(prod.std(ddof=1) / np.sqrt(world.n))
    return c, cc, cs, se


# ----------------------------------------------------------- map relations
@dataclass
class RelationResult:
    name: str
    lhs: float
    rhs: float
    residual: float


@dataclass
class AdmissibilityCheck:
    criterion: str
    measure: str
    value: float
    stderr: float
    ok: bool


@dataclass
class MapReport:
    relations: list
    admissibility: list
    criteria: tuple
    flags: list

    @property
    def max_residual(self):
        return max(abs(r.residual) for r in self.relations)

    @property
    def admissible(self):
        return all(c.ok for c in self.admissibility)


def verify_map_relations(model, n=10**5, seed=0, world=None, x0=0.0, x1=1.0, n_units=200):
    """Check the decomposition and power identities on one shared sample."""
    world = world or World(model, n, seed)
    a, b = x0, x1
    r = world.roles
    fx = world.factual
    xcol, y = fx[r.x], fx[r.y]
    ya, yb = world.y(world.plan_x(a)), world.y(world.plan_x(b))
    yb_wa, ya_wb = world.y(world.plan_x_w(b, a)), world.y(world.plan_x_w(a, b))
    rel = []

    def add(name, lhs, rhs):
        rel.append(RelationResult(name, float(lhs), float(rhs), float(lhs - rhs)))

    ma, mb = xcol == a, xcol == b
    tv = y[mb].mean() - y[ma].mean()
    te = (yb - ya).mean()
    exp_se = {a: ya.mean() - y[ma].mean(), b: yb.mean() - y[mb].mean()}
    add("tv_decomposition_I", tv, te + exp_se[a] - exp_se[b])
    for lvl in ("general", "x-specific") + (("z-specific",) if r.z else ()):
        rep = decompose_tv(model, lvl, world=world, x0=a, x1=b)
        add(f"tv_decomposition_{lvl}", rep.tv, rep.tv - rep.residual)
    # extended mediation formula, both transitions, every population level
    levels = [("population", np.ones(world.n, dtype=bool)), ("x=x0", ma), ("x=x1", mb)]
    if r.z:
        levels += [(f"z:{lab}", m) for lab, m in z_cells(world)]
    for lab, m in levels:
        if m.sum() == 0:
            continue
        add(f"ext_mediation[{lab}]({_num(a)}->{_num(b)})",
            (yb - ya)[m].mean(), (yb_wa - ya)[m].mean() - (yb_wa - yb)[m].mean())
        add(f"ext_mediation[{lab}]({_num(b)}->{_num(a)})",
            (ya - yb)[m].mean(), (ya_wb - yb)[m].mean() - (ya_wb - ya)[m].mean())
    # spurious power relation: ExpSE_x = P(x') * xSE_{x,x'}
    for x, xp in ((a, b), (b, a)):
        yx = ya if x == a else yb
        mx, mxp = xcol == x, xcol == xp
        xse = yx[mxp].mean() - yx[mx].mean()
        add(f"expse_ctfse[x={_num(x)}]", exp_se[x], mxp.mean() * xse)

    crit = structural_criteria(model)
    adm, flags = _admissibility(world, crit, a, b, n_units)
    str_de, str_ie, _ = crit
    nde = world.paired(world.unit_diff("DE", a, b), np.ones(world.n, dtype=bool))
    if str_de and abs(nde.value) <= 3 * nde.mc_stderr:
        flags.append("power: Str-DE holds but NDE is 0 within noise (cancellation)")
    nie = world.paired(world.unit_diff("IE", a, b), np.ones(world.n, dtype=bool))
    if str_ie and abs(nie.value) <= 3 * nie.mc_stderr:
        flags.append("power: Str-IE holds but NIE is 0 within noise (cancellation)")
    return MapReport(rel, adm, crit, flags)


def _admissibility(world, crit, a, b, n_units):
    str_de, str_ie, str_se = crit
    r = world.roles
    checks, flags = [], []
    xcol = world.factual[r.x]
    everyone = np.ones(world.n, dtype=bool)
    pops = [("population", everyone), ("x=x0", xcol == a)]
    if r.z:
        pops += [(f"z:{lab}", m) for lab, m in z_cells(world) if m.sum() >= MIN_EFFECTIVE]
    idx = np.arange(min(n_units, world.n))

    def check_paired(name, base):
        d = world.unit_diff(base, a, b)
        for lab, m in pops:
            est = world.paired(d, m)
            ok = abs(est.value) <= 3 * est.mc_stderr + 1e-12
            checks.append(AdmissibilityCheck(name, f"{base}[{lab}]", est.value, est.mc_stderr, ok))
        unit_max = float(np.max(np.abs(d[idx]))) if len(idx) else 0.0
        checks.append(AdmissibilityCheck(name, f"unit{base}[max over {len(idx)} units]",
                                         unit_max, 0.0, unit_max == 0.0))

    if not str_de:
        check_paired("Str-DE", "DE")
    if not str_ie:
        check_paired("Str-IE", "IE")
    if not str_se:
        for kind in ("ExpSE", "xSE"):
            est = world.measure(MeasureSpec(kind, a, b))
            checks.append(AdmissibilityCheck("Str-SE", kind, est.value, est.mc_stderr,
                                             abs(est.value) <= 3 * est.mc_stderr + 1e-12))
    return checks, flags
