"""Run configuration: a YAML document with line-aware validation.

Example::

    seed: 7
    output: results
    model:
      catalog: diffusion        # or: levy
      mu: -1.0                  # number, or {kind: linear|table, ...}
      sigma: 1.0
    solver: {step: 1.0e-3}
    mc: {paths: 100000, step: 1.0e-4, horizon: 50}
    tasks:
      - task: exit
        windows: [[0, 1]]
        x: [0.3]
        q: [0, 0.5]

Numeric lists may be given as a list or as ``{start, stop, step}``.
"""
from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np
import yaml

from .exceptions import ConfigError, ModelError
from .mc import MCConfig
from .models import Coefficient, DiffusionModel, ExponentialJumps, FixedJumps, SNLPModel

TASK_TYPES = ("psi-table", "scale-table", "exit", "resolvent", "verify-identities",
              "verify-duality", "laplace-check")
VERIFY_TASKS = ("verify-identities", "verify-duality", "laplace-check")


class Node:
    """A parsed value together with its dotted path and source line."""

    def __init__(self, value, path, lines):
        self.value = value
        self.path = path
        self._lines = lines

    @property
    def field(self):
        return ".".join(str(p) for p in self.path) or "<root>"

    @property
    def line(self):
        path = self.path
        while path and path not in self._lines:
            path = path[:-1]
        return self._lines.get(path)

    def error(self, message):
        return ConfigError(message, field=self.field, line=self.line)

    def child(self, key):
        return Node(self.value[key], self.path + (key,), self._lines)

    def has(self, key):
        return isinstance(self.value, dict) and key in self.value

    def get(self, key, default=None, required=False):
        if not isinstance(self.value, dict):
            raise self.error("expected a mapping")
        if key not in self.value or self.value[key] is None:
            if required:
                raise self.error(f"missing required field {key!r}")
            return Node(default, self.path + (key,), self._lines)
        return self.child(key)

    def mapping(self):
        if not isinstance(self.value, dict):
            raise self.error("expected a mapping")
        return self

    def items(self):
        if not isinstance(self.value, list):
            raise self.error("expected a list")
        return [self.child(i) for i in range(len(self.value))]

    def check_keys(self, allowed):
        extra = sorted(set(self.mapping().value) - set(allowed))
        if extra:
            bad = self.child(extra[0])
            raise bad.error(f"unknown field {extra[0]!r}; allowed: {', '.join(sorted(allowed))}")

    # scalar coercions; YAML 1.1 reads "1e-3" as a string, so numbers are
    # converted from text as well

    def number(self, minimum=None, strict_min=False):
        v = self.value
        if isinstance(v, bool) or v is None:
            raise self.error(f"expected a number, got {v!r}")
        try:
            v = float(v)
        except (TypeError, ValueError):
            raise self.error(f"expected a number, got {v!r}") from None
        if math.isnan(v):
            raise self.error("NaN is not allowed")
        if minimum is not None and (v < minimum or (strict_min and v == minimum)):
            op = ">" if strict_min else ">="
            raise self.error(f"must be {op} {minimum}, got {v!r}")
        return v

    def integer(self, minimum=None):
        v = self.value
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise self.error(f"expected an integer, got {v!r}")
        try:
            f = float(v)
        except ValueError:
            raise self.error(f"expected an integer, got {v!r}") from None
        if not f.is_integer():
            raise self.error(f"expected an integer, got {v!r}")
        iv = int(v) if isinstance(v, int) else int(f)
        if minimum is not None and iv < minimum:
            raise self.error(f"must be >= {minimum}, got {iv}")
        return iv

    def boolean(self):
        if not isinstance(self.value, bool):
            raise self.error(f"expected true/false, got {self.value!r}")
        return self.value

    def string(self, choices=None):
        if not isinstance(self.value, str):
            raise self.error(f"expected a string, got {self.value!r}")
        if choices is not None and self.value not in choices:
            raise self.error(f"must be one of {', '.join(choices)}; got {self.value!r}")
        return self.value

    def numbers(self, minimum=None):
        """A list of numbers, a single number, or ``{start, stop, step}``."""
        v = self.value
        if isinstance(v, dict):
            self.check_keys({"start", "stop", "step"})
            start = self.get("start", required=True).number()
            stop = self.get("stop", required=True).number()
            step = self.get("step", required=True).number(0, strict_min=True)
            if stop < start:
                raise self.error("range needs stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9))
            vals = start + step * np.arange(n + 1)
            if abs(vals[-1] - stop) <= 1e-9 * max(1.0, abs(stop)):
                vals[-1] = stop
            out = [float(u) for u in vals]
        elif isinstance(v, list):
            out = [c.number() for c in self.items()]
        else:
            out = [self.number()]
        if minimum is not None:
            for u in out:
                if u < minimum:
                    raise self.error(f"values must be >= {minimum}, got {u!r}")
        return out


def _line_map(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = key_node.value
            _line_map(value_node, path + (key,), lines)
            # report the key's line rather than the value's
            lines[path + (key,)] = key_node.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_map(item, path + (i,), lines)


def parse_yaml(text):
    """Parse ``text`` into a root :class:`Node`."""
    try:
        loader = yaml.SafeLoader(text)
        try:
            root = loader.get_single_node()
            data = loader.construct_document(root) if root is not None else None
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(f"YAML syntax error: {exc.problem or exc.context}",
                          line=mark.line + 1 if mark else None) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from None
    lines = {}
    if root is not None:
        _line_map(root, (), lines)
    return Node(data if data is not None else {}, (), lines)


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

def _coefficient(node):
    if not isinstance(node.value, dict):
        return Coefficient.constant(node.number())
    kind = node.get("kind", required=True).string(("constant", "linear", "table"))
    try:
        if kind == "constant":
            node.check_keys({"kind", "value"})
            return Coefficient.constant(node.get("value", required=True).number())
        if kind == "linear":
            node.check_keys({"kind", "intercept", "slope"})
            return Coefficient.linear(node.get("intercept", required=True).number(),
                                      node.get("slope", required=True).number())
        node.check_keys({"kind", "xs", "ys"})
        return Coefficient.table(node.get("xs", required=True).numbers(),
                                 node.get("ys", required=True).numbers())
    except ModelError as exc:
        raise node.error(str(exc)) from None


def parse_model(node):
    node.mapping()
    catalog = node.get("catalog", required=True).string(("levy", "diffusion"))
    try:
        if catalog == "levy":
            node.check_keys({"catalog", "drift", "gaussian", "jump_rate", "jump_law"})
            law = None
            rate = node.get("jump_rate", 0.0).number(0)
            if node.has("jump_law"):
                ln = node.child("jump_law")
                kind = ln.get("kind", required=True).string(("exponential", "fixed"))
                if kind == "exponential":
                    ln.check_keys({"kind", "mean"})
                    law = ExponentialJumps(ln.get("mean", required=True).number(0, True))
                else:
                    ln.check_keys({"kind", "size"})
                    law = FixedJumps(ln.get("size", required=True).number(0, True))
            return SNLPModel(drift=node.get("drift", required=True).number(),
                             gaussian=node.get("gaussian", 0.0).number(0),
                             jump_rate=rate, jump_law=law)
        node.check_keys({"catalog", "mu", "sigma", "interval", "reference",
                         "boundary_behavior"})
        interval = (-math.inf, math.inf)
        if node.has("interval"):
            iv = node.child("interval")
            items = iv.items()
            if len(items) != 2:
                raise iv.error("interval needs [left, right]")
            interval = (items[0].number(), items[1].number())
        return DiffusionModel(
            mu=_coefficient(node.get("mu", required=True)),
            sigma=_coefficient(node.get("sigma", required=True)),
            interval=interval,
            reference=node.get("reference", 0.0).number(),
            boundary_behavior=node.get("boundary_behavior", "natural").string(),
        )
    except ModelError as exc:
        raise node.error(str(exc)) from None


def parse_mc(node, seed):
    if node.value is None:
        return None
    node.check_keys({"paths", "step", "horizon", "band_halfwidth", "bridge_correction",
                     "workers"})
    eps = node.get("band_halfwidth")
    return MCConfig(
        paths=node.get("paths", required=True).integer(1),
        step=node.get("step", required=True).number(0, strict_min=True),
        horizon=node.get("horizon", required=True).number(0, strict_min=True),
        seed=seed,
        band_halfwidth=None if eps.value is None else eps.number(0, strict_min=True),
        bridge_correction=node.get("bridge_correction", True).boolean(),
        workers=node.get("workers", 1).integer(1),
    )


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

_TASK_FIELDS = {
    "psi-table": {"lam"},
    "scale-table": {"q", "x", "y"},
    "exit": {"q", "windows", "x", "points"},
    "resolvent": {"q", "windows", "x", "y", "kind", "points"},
    "verify-identities": {"q", "windows", "x", "y", "chain"},
    "verify-duality": {"q", "windows", "pairs", "symmetry_points", "symmetry_tolerance"},
    "laplace-check": {"q", "beta", "beta_offset", "tolerance"},
}


@dataclass
class Task:
    index: int
    type: str
    node: Node = field(repr=False)

    @property
    def verification(self):
        return self.type in VERIFY_TASKS

    @property
    def stem(self):
        return f"{self.index:02d}_{self.type}"


def windows(node):
    out = []
    for item in node.get("windows", required=True).items():
        pair = item.items()
        if len(pair) != 2:
            raise item.error("a window is [b, a]")
        b, a = pair[0].number(), pair[1].number()
        if not b < a:
            raise item.error(f"window needs b < a, got ({b}, {a})")
        out.append((b, a))
    return out


def _parse_task(i, node):
    node.mapping()
    kind = node.get("task", required=True).string(TASK_TYPES)
    node.check_keys({"task"} | _TASK_FIELDS[kind])
    if node.has("q"):
        node.child("q").numbers(minimum=0)
    free = kind == "resolvent" and node.get("kind", "killed").string(("killed", "free")) == "free"
    if kind in ("exit", "resolvent", "verify-identities", "verify-duality") and not free:
        windows(node)
    if kind in ("exit", "resolvent", "verify-identities") and not node.has("x"):
        raise node.error(f"task {kind!r} needs start points 'x'")
    return Task(i + 1, kind, node)


@dataclass
class RunConfig:
    """Validated configuration of one batch run."""

    model: object
    tasks: list
    output: Path
    seed: int
    step: float
    mc: MCConfig = None
    source: Path = None

    def require_mc(self, task):
        if self.mc is None:
            raise task.node.error(f"task {task.type!r} needs an 'mc' block")
        return self.mc


def load_config(path, seed=None, output=None):
    """Read and validate the config at ``path``.

    ``seed`` and ``output`` override the file's values.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", field=str(path)) from None
    return parse_config(text, base=path.parent, seed=seed, output=output, source=path)


def parse_config(text, base=Path("."), seed=None, output=None, source=None):
    root = parse_yaml(text).mapping()
    root.check_keys({"seed", "output", "model", "solver", "mc", "tasks"})
    if seed is None:
        seed = root.get("seed", 0).integer(0)
    if not 0 <= int(seed) < 2**64:
        raise root.get("seed").error("seed must fit in 64 unsigned bits")
    model = parse_model(root.get("model", required=True))
    solver = root.get("solver", {})
    solver.check_keys({"step"})
    step = solver.get("step", 1e-3).number(0, strict_min=True)
    mc = parse_mc(root.get("mc"), int(seed))
    tasks = [_parse_task(i, n) for i, n in enumerate(root.get("tasks", []).items())]
    if output is None:
        output = Path(base) / root.get("output", "scalekit-out").string()
    return RunConfig(model=model, tasks=tasks, output=Path(output), seed=int(seed), step=step,
                     mc=mc, source=source)


__all__ = ["Node", "Task", "RunConfig", "TASK_TYPES", "VERIFY_TASKS", "parse_yaml",
           "parse_model", "parse_config", "load_config", "windows"]
