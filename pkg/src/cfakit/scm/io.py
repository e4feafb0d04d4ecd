"""Plain-text scenario files.

One entry per line::

    name berkeley
    roles x=X y=Y z= w=D
    exogenous U_X uniform 0 1
    mechanism Y | parents=D | exogenous=U_Y | (lt U_Y (add 0.1 (mul 0.7 D)))

Blank lines and ``#`` comments are ignored. Numeric metadata is not stored.
"""
from .expr import _fmt_number, parse_prefix, to_prefix
from .model import ExogenousSpec, Mechanism, Roles, StructuralError, StructuralModel


def dumps(model):
    lines = [f"name {model.name or 'model'}"]
    if model.roles is not None:
        r = model.roles
        lines.append(f"roles x={r.x} y={r.y} z={','.join(r.z)} w={','.join(r.w)}")
    for e in model.exogenous:
        lines.append("exogenous " + " ".join([e.name, e.dist] + [_fmt_number(p) for p in e.params]))
    for m in model.mechanisms:
        lines.append(
            f"mechanism {m.target} | parents={','.join(m.parents)} | "
            f"exogenous={','.join(m.exogenous_args)} | {to_prefix(m.expr)}"
        )
    return "\n".join(lines) + "\n"


def _split(v):
    return tuple(s for s in v.split(",") if s)


def loads(text):
    name, roles, exo, mechs = "", None, [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "name":
                name = rest.strip()
            elif head == "roles":
                kv = dict(tok.split("=", 1) for tok in rest.split())
                roles = Roles(kv["x"], kv["y"], _split(kv.get("z", "")), _split(kv.get("w", "")))
            elif head == "exogenous":
                parts = rest.split()
                exo.append(ExogenousSpec(parts[0], parts[1], tuple(float(p) for p in parts[2:])))
            elif head == "mechanism":
                target, parents, exargs, expr = (s.strip() for s in rest.split("|", 3))
                if not parents.startswith("parents=") or not exargs.startswith("exogenous="):
                    raise ValueError("expected parents= and exogenous= fields")
                mechs.append(Mechanism(target, _split(parents[8:]), _split(exargs[10:]),
                                       parse_prefix(expr)))
            else:
                raise ValueError(f"unknown entry {head!r}")
        except (ValueError, KeyError, IndexError) as exc:
            raise StructuralError(f"line {lineno}: {exc}") from None
    return StructuralModel(exo, mechs, roles=roles, name=name)


def save(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
