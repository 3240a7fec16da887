"""Flat ``key=value`` config files for ModelConfig and SyntheticMotionSpec."""
import dataclasses
import os

from .tensor import ContractError


def parse_kv(text):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _coerce(value, typ, key):
    if typ is bool or typ == "bool":
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ContractError(f"{key}: not a boolean: {value!r}")
    if typ is int or typ == "int":
        return int(value)
    if typ is float or typ == "float":
        return float(value)
    return value


def load_dataclass(cls, path, overrides=None, env_seed=True):
    """Build ``cls`` from a key=value file; ``SCT_SEED`` overrides ``seed``."""
    with open(path) as fh:
        raw = parse_kv(fh.read())
    raw.update(overrides or {})
    types = {f.name: f.type for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(types))
    if unknown:
        raise ContractError(f"{path}: unknown keys {unknown}")
    values = {k: _coerce(str(v), types[k], k) for k, v in raw.items()}
    if env_seed and "seed" in types and os.environ.get("SCT_SEED"):
        values["seed"] = int(os.environ["SCT_SEED"])
    return cls(**values)


def dump_dataclass(obj, path):
    with open(path, "w") as fh:
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            fh.write(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}\n")
