"""Experiment configuration files.

The format is line oriented::

    # comment
    experiment = verify-structural
    seed = 7

    permutation {
        count = 20
        tol = 1e-3
    }

Top-level ``key = value`` lines set run options; ``kind [label] {`` ... ``}``
opens a block holding the options of one check family.  The label names the
CSV file and defaults to the kind, so a kind may appear several times with
different labels.  Blocks do not nest.
Lists are comma separated and rows of a matrix are separated by ``;``.
Commas inside parentheses belong to the item, so ``atom(0.5,0), atom(1,0)`` is
a two-element list.  Every key is validated against the schema of the
experiment kind; unknown keys and blocks are rejected with their line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError

EXPERIMENT_KINDS = ("boyd-indices", "k-functional", "interp-norm", "verify-structural",
                    "sobolev-besov", "lorentz")


@dataclass
class Value:
    raw: str
    line: int


@dataclass
class Block:
    kind: str
    name: str
    line: int
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BlockSpec:
    kind: str
    name: str
    values: dict


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    out: str
    tolerance_scale: float
    jobs: int
    blocks: list
    source: str = ""


def split_top(text: str, sep: str) -> list:
    """Split on ``sep`` outside parentheses and brackets."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur).strip())
    if depth != 0:
        raise ValueError(f"unbalanced parentheses in {text!r}")
    return [p for p in parts if p]


def _float(text, line):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        if "/" in t:
            num, den = t.split("/", 1)
            return float(num) / float(den)
        return float(t)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line) from None


def _int(text, line):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}", line) from None


def _bool(text, line):
    t = text.strip().lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true or false, got {text!r}", line)


CONVERTERS = {
    "int": _int,
    "float": _float,
    "bool": _bool,
    "str": lambda text, line: text.strip(),
    "floats": lambda text, line: [_float(x, line) for x in split_top(text, ",")],
    "ints": lambda text, line: [_int(x, line) for x in split_top(text, ",")],
    "strs": lambda text, line: split_top(text, ","),
    "matrix": lambda text, line: [[_float(x, line) for x in split_top(row, ",")]
                                  for row in split_top(text, ";")],
}


def convert(value: Value, kind: str):
    return CONVERTERS[kind](value.raw, value.line)


def _is_name(word: str) -> bool:
    return bool(word) and word.replace("_", "").replace("-", "").isalnum()


def parse_text(text: str):
    """Raw structure: (top-level values, list of blocks)."""
    top = {}
    blocks = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.endswith("{"):
            if current is not None:
                raise ConfigError("blocks cannot be nested", lineno)
            words = line[:-1].split()
            if len(words) not in (1, 2) or not all(_is_name(w) for w in words):
                raise ConfigError(f"bad block header {line!r}", lineno)
            kind, name = words[0], words[-1]
            if any(b.name == name for b in blocks):
                raise ConfigError(f"duplicate block {name!r}", lineno)
            current = Block(kind, name, lineno)
            continue
        if line == "}":
            if current is None:
                raise ConfigError("unmatched '}'", lineno)
            blocks.append(current)
            current = None
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        target = top if current is None else current.values
        if key in target:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        target[key] = Value(val, lineno)
    if current is not None:
        raise ConfigError(f"block {current.name!r} is not closed", current.line)
    return top, blocks


TOP_SCHEMA = {
    "experiment": "str",
    "seed": "int",
    "out": "str",
    "tolerance_scale": "float",
    "jobs": "int",
}


def load(text: str, schemas: dict, source: str = "") -> ExperimentConfig:
    """Parse and validate a configuration.

    Parameters
    ----------
    text : str
        File contents.
    schemas : dict
        ``{experiment kind: {block name: {key: (type, default)}}}``.
    """
    top, raw_blocks = parse_text(text)
    for key, v in top.items():
        if key not in TOP_SCHEMA:
            raise ConfigError(f"unknown key {key!r}", v.line)
    if "experiment" not in top:
        raise ConfigError("missing 'experiment' key", 1)
    kind = convert(top["experiment"], "str")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; expected one of {', '.join(EXPERIMENT_KINDS)}",
                          top["experiment"].line)
    seed = convert(top["seed"], "int") if "seed" in top else 0
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", top["seed"].line)
    scale = convert(top["tolerance_scale"], "float") if "tolerance_scale" in top else 1.0
    if not scale > 0:
        raise ConfigError("tolerance_scale must be positive", top["tolerance_scale"].line)
    jobs = convert(top["jobs"], "int") if "jobs" in top else 1
    if jobs < 1:
        raise ConfigError("jobs must be at least 1", top["jobs"].line)
    out = convert(top["out"], "str") if "out" in top else "results"

    schema = schemas[kind]
    blocks = []
    for b in raw_blocks:
        if b.kind not in schema:
            raise ConfigError(f"unknown block {b.kind!r} for experiment {kind}", b.line)
        spec = schema[b.kind]
        values = {}
        for key, v in b.values.items():
            if key not in spec:
                raise ConfigError(f"unknown key {key!r} in block {b.name!r}", v.line)
            try:
                values[key] = convert(v, spec[key][0])
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(str(exc), v.line) from None
        for key, (_, default) in spec.items():
            values.setdefault(key, default)
        blocks.append(BlockSpec(b.kind, b.name, values))
    if not blocks:
        raise ConfigError(f"no check blocks for experiment {kind}", 1)
    return ExperimentConfig(kind, seed, out, scale, jobs, blocks, source)


def apply_overrides(cfg: ExperimentConfig, seed=None, out=None, tolerance_scale=None, jobs=None):
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    if tolerance_scale is not None:
        if not tolerance_scale > 0:
            raise ConfigError("tolerance scale must be positive")
        cfg.tolerance_scale = tolerance_scale
    if jobs is not None:
        if jobs < 1:
            raise ConfigError("jobs must be at least 1")
        cfg.jobs = jobs
    return cfg
