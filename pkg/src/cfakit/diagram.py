"""Causal diagrams, SFM projections, structural criteria and the
latent-confounding identifiability checker."""
from __future__ import annotations

from dataclasses import dataclass, field

# groups in SFM order; cross-group bidirected labels use this order
GROUPS = ("X", "Z", "W", "Y")
EXTRA_PAIRS = ("XW", "XY", "ZY", "ZW", "WY")

IDENTIFIABLE = "Identifiable"
REFINE_Z = "RefineZ"
REFINE_W = "RefineW"
REFINE_ZW = "RefineZW"
NOT_IDENTIFIABLE = "NotIdentifiable"
_SEVERITY = {IDENTIFIABLE: 0, REFINE_Z: 1, REFINE_W: 1, REFINE_ZW: 2, NOT_IDENTIFIABLE: 3}

FAMILIES = {
    "general": ("TE", "ExpSE", "NDE", "NIE"),
    "x-specific": ("xTE", "xDE", "xIE", "xSE", "xDEsym", "xIEsym"),
    "z-specific": ("zTE", "zDE", "zIE", "xzTE", "xzDE", "xzIE"),
    "v-specific": ("vTE", "vDE", "vIE"),
    "unit-level": ("unitTE", "unitDE", "unitIE"),
}
_OBSERVATIONAL = ("TV", "ObsDE")
# measures whose identification needs Y-conditioning or a joint over worlds
_CROSS_WORLD = ("PS", "PN", "JointCtf")


class DiagramError(ValueError):
    pass


class ProjectionError(DiagramError):
    pass


@dataclass(frozen=True)
class CausalDiagram:
    nodes: frozenset
    directed: frozenset
    bidirected: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", frozenset(self.nodes))
        object.__setattr__(self, "directed", frozenset(tuple(e) for e in self.directed))
        object.__setattr__(self, "bidirected",
                           frozenset(frozenset(e) for e in self.bidirected))
        for a, b in self.directed:
            if a not in self.nodes or b not in self.nodes:
                raise DiagramError(f"edge {a}->{b} has an unknown endpoint")
        for e in self.bidirected:
            if len(e) != 2 or not e <= self.nodes:
                raise DiagramError(f"bad bidirected edge {set(e)}")
        if _has_cycle(self.nodes, self.directed):
            raise DiagramError("directed part has a cycle")

    def parents(self, v):
        return {a for a, b in self.directed if b == v}

    def children(self, v):
        return {b for a, b in self.directed if a == v}

    def ancestors(self, v, removed=()):
        """Ancestors of ``v`` including ``v``, ignoring nodes in ``removed``."""
        seen, stack = {v}, [v]
        while stack:
            cur = stack.pop()
            for p in self.parents(cur):
                if p not in seen and p not in removed:
                    seen.add(p)
                    stack.append(p)
        return seen


def _has_cycle(nodes, edges):
    indeg = {n: 0 for n in nodes}
    out = {n: [] for n in nodes}
    for a, b in edges:
        indeg[b] += 1
        out[a].append(b)
    queue = [n for n, d in indeg.items() if d == 0]
    count = 0
    while queue:
        n = queue.pop()
        count += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    return count != len(nodes)


def diagram_of(model):
    """Diagram read off declared parents and shared exogenous arguments."""
    nodes = model.endogenous
    directed = {(p, m.target) for m in model.mechanisms for p in m.parents}
    bidirected = set()
    mechs = model.mechanisms
    for i, a in enumerate(mechs):
        for b in mechs[i + 1:]:
            if set(a.exogenous_args) & set(b.exogenous_args):
                bidirected.add(frozenset((a.target, b.target)))
    return CausalDiagram(frozenset(nodes), frozenset(directed), frozenset(bidirected))


# --------------------------------------------------------------- projection
def normalize_pair(label):
    """Canonical cross-group label, e.g. ``"W-Y"`` or ``"YW"`` -> ``"WY"``."""
    letters = [c for c in label.upper() if c in GROUPS]
    if len(letters) != 2 or letters[0] == letters[1]:
        raise ValueError(f"bad bidirected label {label!r}")
    a, b = sorted(letters, key=GROUPS.index)
    return a + b


@dataclass(frozen=True)
class SfmProjection:
    x: str
    y: str
    z: tuple = ()
    w: tuple = ()
    extra_bidirected: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "w", tuple(self.w))
        pairs = frozenset(normalize_pair(p) for p in self.extra_bidirected)
        pairs = pairs - {"XZ"}
        bad = pairs - set(EXTRA_PAIRS)
        if bad:
            raise ProjectionError(f"unsupported bidirected pairs {sorted(bad)}")
        object.__setattr__(self, "extra_bidirected", pairs)
        names = [self.x, self.y, *self.z, *self.w]
        if len(set(names)) != len(names):
            raise ProjectionError("roles must partition the variables")

    def group_of(self, v):
        if v == self.x:
            return "X"
        if v == self.y:
            return "Y"
        if v in self.z:
            return "Z"
        if v in self.w:
            return "W"
        raise KeyError(v)

    @property
    def variables(self):
        return (self.x, *self.z, *self.w, self.y)


def _roles_tuple(roles):
    if isinstance(roles, dict):
        return roles["x"], roles["y"], tuple(roles.get("z", ())), tuple(roles.get("w", ()))
    return roles.x, roles.y, tuple(roles.z), tuple(roles.w)


_FORBIDDEN = {("Y", g) for g in GROUPS} | {(g, "X") for g in ("Z", "W", "Y")} | {
    ("X", "Z"), ("W", "Z"),
}


def project_to_sfm(diagram, roles):
    x, y, z, w = _roles_tuple(roles)
    sfm = SfmProjection(x, y, z, w)
    assigned = set(sfm.variables)
    if assigned != set(diagram.nodes):
        missing = set(diagram.nodes) - assigned
        extra = assigned - set(diagram.nodes)
        raise ProjectionError(f"roles do not cover the diagram (missing {sorted(missing)}, "
                              f"unknown {sorted(extra)})")
    for a, b in sorted(diagram.directed):
        ga, gb = sfm.group_of(a), sfm.group_of(b)
        if ga != gb and (ga, gb) in _FORBIDDEN:
            raise ProjectionError(f"edge {a}->{b} violates the {ga}->{gb} role order")
        if ga == gb == "Y" or (ga == "X" and gb == "X"):
            raise ProjectionError(f"edge {a}->{b} inside a singleton group")
    # mediators must not be ancestors of X (catches W -> ... -> X chains)
    anc_x = diagram.ancestors(x)
    for v in w:
        if v in anc_x:
            raise ProjectionError(f"mediator {v} is an ancestor of {x}")
    extra = set()
    for e in diagram.bidirected:
        a, b = tuple(e)
        ga, gb = sfm.group_of(a), sfm.group_of(b)
        if ga != gb:
            pair = normalize_pair(ga + gb)
            if pair != "XZ":
                extra.add(pair)
    return SfmProjection(x, y, z, w, frozenset(extra))


# ------------------------------------------------------- structural criteria
def structural_criteria(model, x=None, y=None):
    """(Str-DE, Str-IE, Str-SE) computed from declared parents.

    Str-SE holds when X and Y have a common endogenous ancestor, or share an
    exogenous argument, along routes that do not pass through X.
    """
    if x is None or y is None:
        if model.roles is None:
            raise DiagramError("model has no roles; pass x and y")
        x = x or model.roles.x
        y = y or model.roles.y
    g = diagram_of(model)
    str_de = x in g.parents(y)
    # X -> M -> ... -> Y with at least one intermediate node
    reach = set()
    stack = [c for c in g.children(x) if c != y]
    while stack:
        cur = stack.pop()
        if cur in reach:
            continue
        reach.add(cur)
        stack.extend(g.children(cur))
    str_ie = any(y in g.children(m) for m in reach)
    anc_x = g.ancestors(x)
    anc_y = g.ancestors(y, removed={x})
    exo = {m.target: set(m.exogenous_args) for m in model.mechanisms}
    common_endo = (anc_x - {x}) & anc_y
    ux = set().union(*(exo[v] for v in anc_x))
    uy = set().union(*(exo[v] for v in anc_y))
    str_se = bool(common_endo) or bool(ux & uy)
    return str_de, str_ie, str_se


# ------------------------------------------------------------ identifiability
@dataclass(frozen=True)
class IdentifiabilityVerdict:
    statuses: dict
    reasons: dict

    def status(self, measure):
        return self.statuses[measure]

    @property
    def overall(self):
        return max(self.statuses.values(), key=_SEVERITY.get, default=IDENTIFIABLE)

    def identifiable(self, measure=None):
        if measure is None:
            return self.overall == IDENTIFIABLE
        return self.statuses[measure] == IDENTIFIABLE


def family_of(kind):
    for fam, kinds in FAMILIES.items():
        if kind in kinds:
            return fam
    if kind in _OBSERVATIONAL:
        return "observational"
    if kind in _CROSS_WORLD:
        return "cross-world"
    raise KeyError(f"unknown measure kind {kind!r}")


def _combine(a, b):
    if {a, b} == {REFINE_Z, REFINE_W}:
        return REFINE_ZW
    return a if _SEVERITY[a] >= _SEVERITY[b] else b


def _edge_status(pair, kind):
    base = kind.replace("sym", "")
    if pair == "XY":
        return NOT_IDENTIFIABLE
    if pair == "ZY":
        return REFINE_Z
    if pair == "XW":
        return REFINE_W
    if pair == "ZW":
        return REFINE_ZW
    # W <-> Y leaves total and spurious measures alone
    if base.endswith("TE") or base.endswith("SE"):
        return IDENTIFIABLE
    return REFINE_W


def measure_status(sfm, kind, event_vars=()):
    """Status and blocking edges for one measure kind."""
    fam = family_of(kind)
    if fam == "observational":
        return IDENTIFIABLE, ()
    if fam in ("unit-level", "cross-world"):
        return NOT_IDENTIFIABLE, ("unit-level or cross-world quantity",)
    if fam == "v-specific":
        post = set(sfm.w) | {sfm.y}
        if set(event_vars) & post:
            return NOT_IDENTIFIABLE, ("event conditions on a post-treatment variable",)
    status, blocking = IDENTIFIABLE, []
    for pair in sorted(sfm.extra_bidirected):
        st = _edge_status(pair, kind)
        if st != IDENTIFIABLE:
            blocking.append(f"{pair[0]}<->{pair[1]}")
        status = _combine(status, st)
    return status, tuple(blocking)


def check_identifiability(sfm, family, event_vars=()):
    """Verdict for every measure in ``family`` under the SFM's extra edges."""
    if family not in FAMILIES:
        raise KeyError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}")
    statuses, reasons = {}, {}
    for kind in FAMILIES[family]:
        st, why = measure_status(sfm, kind, event_vars)
        statuses[kind] = st
        reasons[kind] = why
    return IdentifiabilityVerdict(statuses, reasons)
