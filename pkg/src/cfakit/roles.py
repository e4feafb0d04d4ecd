"""Column-role configuration shared by estimation, cookbook and CLI.

Format, one ``key=value`` per line::

    x=X
    y=Y
    z=age,race
    w=edu,job
    bidirected=WY
    type.age=continuous
    type.race=discrete
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .diagram import SfmProjection, normalize_pair

TYPES = ("discrete", "continuous")


class RoleConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RoleConfig:
    x: str
    y: str
    z: tuple = ()
    w: tuple = ()
    bidirected: tuple = ()
    types: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "w", tuple(self.w))
        try:
            pairs = tuple(sorted({normalize_pair(p) for p in self.bidirected}))
        except ValueError as exc:
            raise RoleConfigError(str(exc)) from None
        object.__setattr__(self, "bidirected", pairs)
        for k, v in self.types.items():
            if v not in TYPES:
                raise RoleConfigError(f"type.{k} must be one of {TYPES}")
        object.__setattr__(self, "types", dict(sorted(self.types.items())))
        names = [self.x, self.y, *self.z, *self.w]
        if len(set(names)) != len(names):
            raise RoleConfigError("a column appears in more than one role")

    def to_sfm(self):
        return SfmProjection(self.x, self.y, self.z, self.w, frozenset(self.bidirected))

    def is_discrete(self, col, data=None, max_levels=20):
        """Declared type, else inferred: few distinct integer values means discrete."""
        if col in self.types:
            return self.types[col] == "discrete"
        if data is None:
            return False
        import numpy as np

        v = data.column(col)
        u = np.unique(v)
        return len(u) <= max_levels and np.all(np.equal(np.mod(u, 1), 0))

    @classmethod
    def from_sfm(cls, sfm, types=None):
        return cls(sfm.x, sfm.y, sfm.z, sfm.w, tuple(sfm.extra_bidirected), types or {})


def dumps(cfg):
    lines = [f"x={cfg.x}", f"y={cfg.y}", f"z={','.join(cfg.z)}", f"w={','.join(cfg.w)}",
             f"bidirected={','.join(cfg.bidirected)}"]
    lines += [f"type.{k}={v}" for k, v in cfg.types.items()]
    return "\n".join(lines) + "\n"


def loads(text):
    kv, types = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RoleConfigError(f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key.startswith("type."):
            types[key[5:]] = val
        elif key in ("x", "y", "z", "w", "bidirected"):
            if key in kv:
                raise RoleConfigError(f"line {lineno}: duplicate key {key}")
            kv[key] = val
        else:
            raise RoleConfigError(f"line {lineno}: unknown key {key!r}")
    for req in ("x", "y"):
        if not kv.get(req):
            raise RoleConfigError(f"missing required key {req}")

    def split(v):
        return tuple(s.strip() for s in v.split(",") if s.strip())

    return RoleConfig(kv["x"], kv["y"], split(kv.get("z", "")), split(kv.get("w", "")),
                      split(kv.get("bidirected", "")), types)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def save(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(cfg))
