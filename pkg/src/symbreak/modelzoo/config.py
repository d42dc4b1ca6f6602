"""User-defined models from TOML files.

Layout::

    name = "my-model"

    [chart]
    dim = 4
    names = ["q1", "q2", "p1", "p2"]     # (q_1..q_N, p_1..p_N), canonical form
    domain = ["q1^2 + p1^2"]             # optional; valid iff every entry > 0
    periodic = []                        # optional; names of angle coordinates

    [torus]
    n = 2
    angles = ["t1", "t2"]                # optional; default theta1..thetan
    J = ["(q1^2 + p1^2)/2", "(q2^2 + p2^2)/2"]
    action = ["q1*cos(t1) + p1*sin(t1)", ...]   # image of each chart variable

    [hamiltonian]
    H = "..."                             # may use eps and any [params] name

    [params]
    c = 0.7

Expressions follow :mod:`symbreak.modelzoo.expr`.  First derivatives come
from dual-number evaluation; Hessians fall back to finite differences.
Validation failures do not stop construction: they are issued as
:class:`ModelValidationWarning` so that a broken model can be debugged.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..model import Model, validate
from ..numkernel import SymplecticStructure
from .expr import ExpressionError, evaluate, parse_expression, value_and_grad


class ModelConfigError(ValueError):
    pass


class ModelValidationWarning(UserWarning):
    pass


def _section(cfg, name):
    sec = cfg.get(name)
    if not isinstance(sec, dict):
        raise ModelConfigError(f"missing section [{name}]")
    return sec


def _compile(text, allowed, where):
    if not isinstance(text, str):
        raise ModelConfigError(f"{where}: expression must be a string")
    try:
        return parse_expression(text, allowed)
    except ExpressionError as err:
        raise type(err)(f"{where}: {err.message}", err.pos, text) from err


def parse_model(source: str, validate_model: bool = True, sample_count: int = 64) -> Model:
    """Build a :class:`Model` from TOML text."""
    try:
        cfg = tomllib.loads(source)
    except tomllib.TOMLDecodeError as err:
        raise ModelConfigError(f"invalid TOML: {err}") from err
    chart = _section(cfg, "chart")
    torus = _section(cfg, "torus")
    ham = _section(cfg, "hamiltonian")
    params = dict(cfg.get("params", {}))

    dim = int(chart.get("dim", 0))
    names = list(chart.get("names", []))
    if dim <= 0 or dim % 2 or len(names) != dim:
        raise ModelConfigError("chart.dim must be even and match len(chart.names)")
    n = int(torus.get("n", 0))
    angles = list(torus.get("angles", [f"theta{i + 1}" for i in range(n)]))
    if len(angles) != n:
        raise ModelConfigError("torus.angles must have n entries")
    reserved = set(names) | set(angles) | {"eps"}
    clash = reserved & set(params)
    if clash:
        raise ModelConfigError(f"parameter names clash with variables: {sorted(clash)}")
    for key, val in params.items():
        if not isinstance(val, (int, float)):
            raise ModelConfigError(f"parameter {key} must be numeric")
    consts = {k: float(v) for k, v in params.items()}

    base = set(names) | set(consts)
    h_ast = _compile(ham.get("H"), base | {"eps"}, "hamiltonian.H")
    j_src = list(torus.get("J", []))
    if len(j_src) != n:
        raise ModelConfigError("torus.J must have n entries")
    j_ast = [_compile(t, base, f"torus.J[{i}]") for i, t in enumerate(j_src)]
    a_src = list(torus.get("action", []))
    if len(a_src) != dim:
        raise ModelConfigError("torus.action must have one expression per chart variable")
    a_ast = [_compile(t, base | set(angles), f"torus.action[{i}]") for i, t in enumerate(a_src)]
    d_ast = [_compile(t, base, f"chart.domain[{i}]")
             for i, t in enumerate(chart.get("domain", []))]
    periodic = tuple(names.index(p) for p in chart.get("periodic", []))

    def env(x, eps=None, theta=None):
        e = dict(consts)
        e.update(zip(names, (float(v) for v in x)))
        if eps is not None:
            e["eps"] = float(eps)
        if theta is not None:
            e.update(zip(angles, (float(t) for t in theta)))
        return e

    def H(eps, x):
        return float(evaluate(h_ast, env(x, eps)))

    def dH(eps, x):
        return value_and_grad(h_ast, names, x, dict(consts, eps=float(eps)))[1]

    def J(x):
        e = env(x)
        return np.array([evaluate(a, e) for a in j_ast], dtype=float)

    def dJ(x):
        return np.array([value_and_grad(a, names, x, consts)[1] for a in j_ast]).reshape(n, dim)

    def action(theta, x):
        e = env(x, theta=theta)
        return np.array([evaluate(a, e) for a in a_ast], dtype=float)

    def action_jac(theta, x):
        extra = dict(consts)
        extra.update(zip(angles, (float(t) for t in theta)))
        return np.array([value_and_grad(a, names, x, extra)[1] for a in a_ast])

    def domain(x):
        if not d_ast:
            return True
        e = env(x)
        try:
            return all(evaluate(a, e) > 0 for a in d_ast)
        except (ValueError, ZeroDivisionError):
            return False

    model = Model(
        name=str(cfg.get("name", "custom")), chart=SymplecticStructure(dim), n=n,
        hamiltonian=H, momentum=J, action=action, hamiltonian_grad=dH,
        momentum_jacobian=dJ, action_jacobian=action_jac, domain=domain,
        periodic=periodic, coord_names=tuple(names), params=consts)
    if validate_model:
        report = validate(model, sample_count=sample_count)
        for chk in report.failures():
            warnings.warn(f"{model.name}: {chk.name} failed (worst {chk.worst:.3e})",
                          ModelValidationWarning, stacklevel=2)
    return model


def load_model(path) -> Model:
    return parse_model(Path(path).read_text())
