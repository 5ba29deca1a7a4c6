"""Sweep configuration files and the small arithmetic grammar for δ rules.

A config is TOML with dotted keys, for example::

    experiment = "symmetric_rates"
    eps = [0.05]
    pinning.kind = "checkerboard2x2"
    pinning.values = [0.5, 1.5]
    pinning.symmetric = true
    pinning.delta_rule = ["eps^2", "eps^2/2", "eps^2/4"]
    resolution.nodes_per_delta = 33
"""

from __future__ import annotations

import ast
import math
import operator
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "EXPERIMENTS",
    "SweepConfig",
    "DeltaRule",
    "parse_delta_rule",
    "load_config",
    "config_from_dict",
]

EXPERIMENTS = (
    "cell_rates",
    "scalar_rates",
    "symmetric_rates",
    "random_birkhoff",
    "magnetic_equiv",
    "limits_table",
    "allen_cahn",
)

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _compile(node) -> Callable[[float], float]:
    if isinstance(node, ast.Expression):
        return _compile(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        v = float(node.value)
        return lambda eps: v
    if isinstance(node, ast.Name):
        if node.id != "eps":
            raise ValueError(f"unknown name {node.id!r}; only 'eps' is allowed")
        return lambda eps: eps
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lhs, rhs = _compile(node.left), _compile(node.right)
        return lambda eps: op(lhs(eps), rhs(eps))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        arg = _compile(node.operand)
        return lambda eps: op(arg(eps))
    raise ValueError(f"unsupported syntax in delta rule: {ast.dump(node)[:60]}")


@dataclass(frozen=True)
class DeltaRule:
    """``δ`` as a function of ``ε``; ``exponent`` is the measured power ``q``."""

    text: str
    func: Callable[[float], float] = field(repr=False, compare=False)
    exponent: float = math.nan

    def __call__(self, eps: float) -> float:
        return float(self.func(eps))


def parse_delta_rule(text: str) -> DeltaRule:
    """Numbers, ``eps``, ``+ - * / ^`` (also ``·`` and ``−``) and parentheses.

    >>> parse_delta_rule("eps^2/4")(0.1)
    0.0025000000000000005
    """
    src = str(text).replace("^", "**").replace("·", "*").replace("−", "-")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse delta rule {text!r}: {exc.msg}") from None
    func = _compile(tree)
    d1, d2 = func(1e-2), func(1e-3)
    q = math.log(d1 / d2) / math.log(10) if d1 > 0 and d2 > 0 else math.nan
    return DeltaRule(str(text), func, q)


@dataclass
class SweepConfig:
    experiment: str
    eps: list
    delta_rules: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0])
    pinning: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    output: str = "out"
    tol: float = 1e-10
    allow_underresolved: bool = False
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.eps:
            raise ValueError("eps grid must be nonempty")
        if self.experiment not in ("limits_table", "allen_cahn") and not self.delta_rules:
            raise ValueError("delta rule grid must be nonempty")
        if not self.seeds:
            raise ValueError("seed list must be nonempty")
        rules = []
        for r in self.delta_rules:
            rule = r if isinstance(r, DeltaRule) else parse_delta_rule(r)
            if rule.exponent < 1:
                msg = f"delta rule {rule.text!r} has exponent {rule.exponent:.3g} < 1: outside the delta << eps regime"
                warnings.warn(msg, stacklevel=2)
                self.warnings.append(msg)
            rules.append(rule)
        self.delta_rules = rules
        self.eps = [float(e) for e in self.eps]
        self.seeds = [int(s) for s in self.seeds]


def config_from_dict(d: dict) -> SweepConfig:
    d = dict(d)
    pin = dict(d.pop("pinning", {}))
    rules = pin.pop("delta_rule", d.pop("delta_rule", []))
    if not rules and "delta" in pin:
        # a fixed period is the constant rule
        rules = [repr(float(pin.pop("delta")))]
    if isinstance(rules, str):
        rules = [rules]
    seeds = d.pop("seeds", pin.pop("seed", [0]))
    if isinstance(seeds, int):
        seeds = [seeds]
    eps = d.pop("eps", [])
    if isinstance(eps, (int, float)):
        eps = [eps]
    known = {"experiment", "resolution", "domain", "params", "output", "tol", "allow_underresolved"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return SweepConfig(
        experiment=d.get("experiment", ""),
        eps=list(eps),
        delta_rules=list(rules),
        seeds=list(seeds),
        pinning=pin,
        resolution=dict(d.get("resolution", {})),
        domain=dict(d.get("domain", {})),
        params=dict(d.get("params", {})),
        output=d.get("output", "out"),
        tol=float(d.get("tol", 1e-10)),
        allow_underresolved=bool(d.get("allow_underresolved", False)),
    )


def load_config(path) -> SweepConfig:
    with open(Path(path), "rb") as fh:
        return config_from_dict(tomllib.load(fh))
