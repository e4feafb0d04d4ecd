"""Worked example SCMs shipped with the toolkit.

Each builder returns a :class:`StructuralModel` whose mechanisms transcribe
the example's equations. Terms with a zero coefficient are omitted together
with the corresponding parent, so structural criteria read off the declared
parents match the example's narrative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import const, expit, lor, lt, var
from .model import (
    Mechanism,
    Roles,
    StructuralModel,
    bernoulli,
    normal,
    uniform,
)


class UnknownScenario(KeyError):
    pass


@dataclass(frozen=True)
class ScenarioId:
    name: str
    params: dict = field(default_factory=dict)


def _lin(terms, intercept=0.0):
    """Sum of ``coef * expr`` with zero coefficients dropped."""
    out = const(intercept) if intercept != 0.0 else None
    for c, e in terms:
        if c == 0.0:
            continue
        t = e if c == 1.0 else const(c) * e
        out = t if out is None else out + t
    return out if out is not None else const(0.0)


def berkeley(alpha=0.0, beta=0.7, lam=0.2):
    X, D = var("X"), var("D")
    for v in (alpha, beta, lam):
        if not -1 <= v <= 1:
            raise ValueError("coefficients must lie in [-1, 1]")
    if not (0 <= 0.5 + lam <= 1 and 0 <= 0.1 + alpha + beta <= 1 and 0 <= 0.1 + min(alpha, 0) + min(beta, 0)):
        raise ValueError("thresholds must stay within [0, 1]")
    d_par = ("X",) if lam != 0 else ()
    y_par = tuple(p for p, c in (("X", alpha), ("D", beta)) if c != 0)
    return StructuralModel(
        exogenous=[uniform("U_X"), uniform("U_D"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), lt(var("U_X"), 0.5)),
            Mechanism("D", d_par, ("U_D",), lt(var("U_D"), _lin([(lam, X)], 0.5))),
            Mechanism("Y", y_par, ("U_Y",), lt(var("U_Y"), _lin([(alpha, X), (beta, D)], 0.1))),
        ],
        roles=Roles("X", "Y", (), ("D",)),
        name="berkeley",
        meta={"alpha": alpha, "beta": beta, "lambda": lam},
    )


def college_mprime():
    """The hypothesized model M' in which admission depends on gender only."""
    return StructuralModel(
        exogenous=[uniform("U_X"), uniform("U_D"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), lt(var("U_X"), 0.5)),
            Mechanism("D", ("X",), ("U_D",), lt(var("U_D"), 0.5 + 0.2 * var("X"))),
            Mechanism("Y", ("X",), ("U_Y",), lt(var("U_Y"), 0.1 + 0.14 * var("X"))),
        ],
        roles=Roles("X", "Y", (), ("D",)),
        name="college_mprime",
    )


def ndefail():
    X, Z, W = var("X"), var("Z"), var("W")
    return StructuralModel(
        exogenous=[normal("U"), uniform("U_X"), uniform("U_Z"), uniform("U_W"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X", "U"), lt(var("U_X"), expit(var("U")))),
            Mechanism("Z", (), ("U_Z", "U"), lt(var("U_Z"), expit(var("U")))),
            Mechanism("W", (), ("U_W",), lt(var("U_W"), 0.3)),
            Mechanism(
                "Y", ("X", "Z", "W"), ("U_Y",),
                lt(var("U_Y"), 0.2 * (X + Z - 2.0 * X * Z) + (1.0 / 6.0) * W),
            ),
        ],
        roles=Roles("X", "Y", ("Z",), ("W",)),
        name="ndefail",
    )


def startup_salaries_true():
    X, W = var("X"), var("W")
    return StructuralModel(
        exogenous=[bernoulli("U_X", 0.5), normal("U_W"), normal("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), var("U_X")),
            Mechanism("W", ("X",), ("U_W",), var("U_W") - X),
            Mechanism("Y", ("X", "W"), ("U_Y",), X + W + var("U_Y")),
        ],
        roles=Roles("X", "Y", (), ("W",)),
        name="startup_salaries_true",
    )


def startup_salaries_alt():
    X, W = var("X"), var("W")
    # (-1)^X written as 1 - 2X for binary X
    return StructuralModel(
        exogenous=[bernoulli("U_X", 0.5), normal("U_W"), normal("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), var("U_X")),
            Mechanism("W", ("X",), ("U_W",), (1.0 - 2.0 * X) * var("U_W") - X),
            Mechanism("Y", ("X", "W"), ("U_Y",), X + W + var("U_Y")),
        ],
        roles=Roles("X", "Y", (), ("W",)),
        name="startup_salaries_alt",
    )


def hiring3a():
    return StructuralModel(
        exogenous=[bernoulli("U_XY", 0.5), normal("U_Z"), normal("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_XY",), var("U_XY")),
            Mechanism("Z", (), ("U_Z",), var("U_Z")),
            Mechanism("Y", ("X", "Z"), ("U_XY", "U_Y"),
                      var("X") - var("U_XY") + var("Z") + var("U_Y")),
        ],
        roles=Roles("X", "Y", ("Z",), ()),
        name="hiring3a",
    )


def hiring3b():
    return StructuralModel(
        exogenous=[bernoulli("U_XZ", 0.5), normal("U_ZY"), normal("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_XZ",), var("U_XZ")),
            Mechanism("Z", (), ("U_XZ", "U_ZY"), var("U_XZ") + var("U_ZY")),
            Mechanism("Y", (), ("U_ZY", "U_Y"), var("U_ZY") + var("U_Y")),
        ],
        roles=Roles("X", "Y", ("Z",), ()),
        name="hiring3b",
    )


def hiring4():
    X, Z, W = var("X"), var("Z"), var("W")
    return StructuralModel(
        exogenous=[bernoulli("U_XZ", 0.5), uniform("U_Z"), uniform("U_W"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_XZ",), var("U_XZ")),
            Mechanism("Z", (), ("U_XZ", "U_Z"), var("U_Z") - var("U_XZ")),
            Mechanism("W", ("X", "Z"), ("U_W",), X + Z + var("U_W")),
            Mechanism("Y", ("W",), ("U_Y",), lt(var("U_Y"), expit(W))),
        ],
        roles=Roles("X", "Y", ("Z",), ("W",)),
        name="hiring4",
    )


def otfails(eps=0.1):
    if eps <= 0:
        raise ValueError("eps must be positive")
    X, W, UY = var("X"), var("W"), var("U_Y")
    y0 = lor(UY, lt(0.0, W))
    y1 = lor(UY, lt(W, 0.0))
    return StructuralModel(
        exogenous=[bernoulli("U_X", 0.5), bernoulli("U_W", 0.5), bernoulli("U_Y", 0.5)],
        mechanisms=[
            Mechanism("X", (), ("U_X",), var("U_X")),
            Mechanism("W", (), ("U_W",), eps * (2.0 * var("U_W") - 1.0)),
            Mechanism("Y", ("X", "W"), ("U_Y",), (1.0 - X) * y0 + X * y1),
        ],
        roles=Roles("X", "Y", (), ("W",)),
        name="otfails",
        meta={"eps": eps},
    )


def _nonid(cx, cw, cu, name):
    X, W, U = var("X"), var("W"), var("U_WY")
    return StructuralModel(
        exogenous=[bernoulli("U_X", 0.5), uniform("U_D"), bernoulli("U_WY", 0.5), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), var("U_X")),
            Mechanism("W", ("X",), ("U_D", "U_WY"), lt(var("U_D"), 0.2 + 0.4 * X + 0.4 * U)),
            Mechanism("Y", ("X", "W"), ("U_Y", "U_WY"),
                      lt(var("U_Y"), cx * X + cw * W + cu * U)),
        ],
        roles=Roles("X", "Y", (), ("W",)),
        name=name,
    )


def nonid_m1():
    return _nonid(0.1, 0.7, 0.1, "nonid_m1")


def nonid_m2():
    return _nonid(0.2, 0.1, 0.7, "nonid_m2")


def college_coefficients(t, kappa0=0.4, lam0=0.3, alpha0=0.2, beta0=0.3, dyn_seed=0):
    """Coefficients (kappa, lambda, alpha, beta) after ``t`` yearly steps."""
    rng = np.random.default_rng(dyn_seed)
    k, lam, a, b = kappa0, lam0, alpha0, beta0
    for _ in range(int(t)):
        f = rng.uniform(0.8, 1.2)
        k, lam, a, b = 0.9 * k, lam * (1 - b), 0.8 * a, b * (1 - lam) * f
    return k, lam, a, b


def college_temporal(t=0, kappa0=0.4, lam0=0.3, alpha0=0.2, beta0=0.3, dyn_seed=0):
    """College admissions at year ``t0 + t`` under the yearly coefficient dynamics.

    W shares U_XZ with X and has no X parent, so in the SFM projection it is a
    confounder; the roles group it with Z.
    """
    k, lam, a, b = college_coefficients(t, kappa0, lam0, alpha0, beta0, dyn_seed)
    if not (0 <= 0.5 + k <= 1 and 0 <= 0.5 + lam <= 1 and 0.2 + a + b <= 1):
        raise ValueError("initial coefficients push a threshold outside [0, 1]")
    X, Z, W, U = var("X"), var("Z"), var("W"), var("U_XZ")
    return StructuralModel(
        exogenous=[bernoulli("U_XZ", 0.5), uniform("U_X"), uniform("U_Z"),
                   uniform("U_W"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X", "U_XZ"), lt(var("U_X"), 0.5 + 0.1 * U)),
            Mechanism("Z", (), ("U_Z", "U_XZ"), lt(var("U_Z"), _lin([(k, U)], 0.5))),
            Mechanism("W", (), ("U_W", "U_XZ"), lt(var("U_W"), _lin([(lam, U)], 0.5))),
            Mechanism("Y", tuple(p for p, c in (("X", a), ("Z", 0.1), ("W", b)) if c != 0),
                      ("U_Y",),
                      lt(var("U_Y"), _lin([(a, X), (b, W), (0.1, Z)], 0.1))),
        ],
        roles=Roles("X", "Y", ("Z", "W"), ()),
        name="college_temporal",
        meta={"t": t, "kappa": k, "lambda": lam, "alpha": a, "beta": b},
    )


def random_linear(n_z=5, n_w=5, seed=0):
    """Random linear SFM with coefficients drawn uniformly from [-1, 1].

    X is Bernoulli(expit(U)) with U standard normal shared with every Z;
    the Z and W blocks are strictly upper triangular; noise terms are N(0, 1).
    """
    rng = np.random.default_rng(seed)
    coef = {}

    def draw(key):
        coef[key] = float(rng.uniform(-1.0, 1.0))
        return coef[key]

    exo = [normal("U"), uniform("U_X")]
    mechs = [Mechanism("X", (), ("U_X", "U"), lt(var("U_X"), expit(var("U"))))]
    zs = [f"Z{i + 1}" for i in range(n_z)]
    ws = [f"W{i + 1}" for i in range(n_w)]
    for i, z in enumerate(zs):
        exo.append(normal(f"E_{z}"))
        terms = [(draw(("U", z)), var("U"))]
        terms += [(draw((zs[j], z)), var(zs[j])) for j in range(i)]
        terms.append((1.0, var(f"E_{z}")))
        mechs.append(Mechanism(z, tuple(zs[:i]), ("U", f"E_{z}"), _lin(terms)))
    for i, w in enumerate(ws):
        exo.append(normal(f"E_{w}"))
        terms = [(draw(("X", w)), var("X"))]
        terms += [(draw((z, w)), var(z)) for z in zs]
        terms += [(draw((ws[j], w)), var(ws[j])) for j in range(i)]
        terms.append((1.0, var(f"E_{w}")))
        mechs.append(Mechanism(w, ("X", *zs, *ws[:i]), (f"E_{w}",), _lin(terms)))
    exo.append(normal("E_Y"))
    terms = [(draw(("X", "Y")), var("X"))]
    terms += [(draw((v, "Y")), var(v)) for v in (*zs, *ws)]
    terms.append((1.0, var("E_Y")))
    mechs.append(Mechanism("Y", ("X", *zs, *ws), ("E_Y",), _lin(terms)))
    return StructuralModel(
        exogenous=exo, mechanisms=mechs, roles=Roles("X", "Y", zs, ws),
        name="random_linear", meta={"seed": seed, "coefficients": coef},
    )


def null_model(de=0.0):
    """X and Y independent; every fairness measure is zero.

    A nonzero ``de`` adds a direct X -> Y effect of that size on P(y).
    """
    y_parents = ("X", "Z", "W") if de else ("Z", "W")
    y_thresh = 0.2 + 0.2 * var("Z") + 0.3 * var("W")
    if de:
        y_thresh = y_thresh + de * var("X")
    return StructuralModel(
        exogenous=[uniform("U_X"), uniform("U_Z"), uniform("U_W"), uniform("U_Y")],
        mechanisms=[
            Mechanism("X", (), ("U_X",), lt(var("U_X"), 0.5)),
            Mechanism("Z", (), ("U_Z",), lt(var("U_Z"), 0.5)),
            Mechanism("W", ("Z",), ("U_W",), lt(var("U_W"), 0.3 + 0.4 * var("Z"))),
            Mechanism("Y", y_parents, ("U_Y",), lt(var("U_Y"), y_thresh)),
        ],
        roles=Roles("X", "Y", ("Z",), ("W",)),
        name="null",
    )


_BUILDERS = {
    "berkeley": berkeley,
    "college_mprime": college_mprime,
    "ndefail": ndefail,
    "startup_salaries_true": startup_salaries_true,
    "startup_salaries_alt": startup_salaries_alt,
    "hiring3a": hiring3a,
    "hiring3b": hiring3b,
    "hiring4": hiring4,
    "otfails": otfails,
    "nonid_m1": nonid_m1,
    "nonid_m2": nonid_m2,
    "college_temporal": college_temporal,
    "random_linear": random_linear,
    "null": null_model,
}

SCENARIOS = tuple(sorted(_BUILDERS))


def builtin_scenario(sid, **params):
    """Build a scenario by :class:`ScenarioId` or by name plus keyword params."""
    if isinstance(sid, ScenarioId):
        params = {**sid.params, **params}
        sid = sid.name
    try:
        builder = _BUILDERS[sid]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {sid!r}; known: {', '.join(SCENARIOS)}") from None
    return builder(**params)
