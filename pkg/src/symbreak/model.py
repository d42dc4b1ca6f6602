"""Phase-space models: Hamiltonian family, torus action and momentum map.

Sign conventions are fixed here once for the whole package: Hamiltonian
vector fields are ``X_f = P grad f`` with ``P = -omega^{-1}`` and the
Poisson bracket is ``{f, g} = grad f @ P @ grad g``, so that ``{q, p} = 1``
and ``H = p`` flows with ``dq/dt = 1`` on the canonical chart.

Angular chart coordinates are stored as real lifts; ``Model.periodic``
lists them so that distances can be taken modulo 2 pi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .numkernel import (DomainError, SymplecticStructure, fd_gradient, fd_hessian,
                        fd_jacobian)

TWO_PI = 2.0 * np.pi


def _default_sampler(dim):
    def sample(rng):
        return rng.standard_normal(dim)
    return sample


@dataclass(frozen=True)
class Model:
    """A Hamiltonian family ``H(eps, x)`` with a free torus action.

    ``momentum(x)`` returns the n components of the momentum map and
    ``action(theta, x)`` the closed-form action of ``theta`` in R^n (mod 2 pi).
    Optional analytic derivatives are used when present, otherwise finite
    differences take over.
    """

    name: str
    chart: SymplecticStructure
    n: int
    hamiltonian: Callable[[float, np.ndarray], float]
    momentum: Callable[[np.ndarray], np.ndarray]
    action: Callable[[np.ndarray, np.ndarray], np.ndarray]
    hamiltonian_grad: Optional[Callable] = None
    hamiltonian_hess: Optional[Callable] = None
    momentum_jacobian: Optional[Callable] = None
    action_jacobian: Optional[Callable] = None
    domain: Optional[Callable[[np.ndarray], bool]] = None
    periodic: tuple = ()
    sampler: Optional[Callable] = None
    coord_names: tuple = ()
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.chart.dim

    # -- evaluation -----------------------------------------------------

    def in_domain(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        return True if self.domain is None else bool(self.domain(x))

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.in_domain(x):
            raise DomainError(f"{self.name}: point {x} is outside the chart domain")
        return x

    def energy(self, eps: float, x) -> float:
        return float(self.hamiltonian(eps, self.check(x)))

    def grad(self, eps: float, x) -> np.ndarray:
        x = self.check(x)
        if self.hamiltonian_grad is not None:
            return np.asarray(self.hamiltonian_grad(eps, x), dtype=float)
        return fd_gradient(lambda y: self.hamiltonian(eps, y), x)

    def hess(self, eps: float, x) -> np.ndarray:
        x = self.check(x)
        if self.hamiltonian_hess is not None:
            h = np.asarray(self.hamiltonian_hess(eps, x), dtype=float)
        elif self.hamiltonian_grad is not None:
            h = fd_jacobian(lambda y: self.hamiltonian_grad(eps, y), x, 1e-5)
        else:
            return fd_hessian(lambda y: self.hamiltonian(eps, y), x)
        return 0.5 * (h + h.T)

    def evaluate(self, eps: float, x, what: str = "value"):
        if what == "value":
            return self.energy(eps, x)
        if what == "gradient":
            return self.grad(eps, x)
        if what == "hessian":
            return self.hess(eps, x)
        raise ValueError(f"unknown quantity {what!r}")

    def momentum_value(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.momentum(self.check(x)), dtype=float))

    def momentum_jac(self, x) -> np.ndarray:
        """``n x 2N`` Jacobian of the momentum map (rows are grad J_i)."""
        x = self.check(x)
        if self.momentum_jacobian is not None:
            return np.asarray(self.momentum_jacobian(x), dtype=float).reshape(self.n, self.dim)
        return fd_jacobian(lambda y: np.atleast_1d(self.momentum(y)), x, 1e-6).reshape(
            self.n, self.dim)

    def act(self, theta, x) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.n,):
            raise ValueError(f"torus element must have {self.n} components")
        x = self.check(x)
        if not np.any(theta):
            return x.copy()
        y = np.asarray(self.action(theta, x), dtype=float)
        if not self.in_domain(y):
            raise DomainError(f"{self.name}: action left the chart domain")
        return y

    def act_jacobian(self, theta, x) -> np.ndarray:
        """Differential of ``x -> act(theta, x)``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        x = self.check(x)
        if self.action_jacobian is not None:
            return np.asarray(self.action_jacobian(theta, x), dtype=float)
        return fd_jacobian(lambda y: np.asarray(self.action(theta, y), dtype=float), x, 1e-6)

    def generator(self, xi, x) -> np.ndarray:
        """Infinitesimal generator ``P grad(sum xi_i J_i)`` at x.

        With an analytic momentum Jacobian this is defined off the domain too
        (e.g. where the action stops being free).
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.momentum_jacobian is not None:
            dj = np.asarray(self.momentum_jacobian(np.asarray(x, dtype=float)), dtype=float)
            dj = dj.reshape(self.n, self.dim)
        else:
            dj = self.momentum_jac(x)
        return self.chart.poisson @ (dj.T @ xi)

    def vector_field(self, eps: float, x) -> np.ndarray:
        return self.chart.poisson @ self.grad(eps, x)

    def poisson_bracket(self, grad_f: np.ndarray, grad_g: np.ndarray) -> float:
        return float(np.asarray(grad_f) @ self.chart.poisson @ np.asarray(grad_g))

    def difference(self, x, y) -> np.ndarray:
        """``x - y`` with periodic coordinates reduced to (-pi, pi]."""
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if self.periodic:
            idx = list(self.periodic)
            d[idx] = -(np.mod(-d[idx] + np.pi, TWO_PI) - np.pi)
        return d

    def distance(self, x, y) -> float:
        return float(np.linalg.norm(self.difference(x, y)))

    def sample(self, rng: np.random.Generator, max_tries: int = 1000) -> np.ndarray:
        draw = self.sampler or _default_sampler(self.dim)
        for _ in range(max_tries):
            x = np.asarray(draw(rng), dtype=float)
            if self.in_domain(x):
                return x
        raise RuntimeError(f"{self.name}: sampler failed to hit the domain")


def poisson_bracket(model: Model, f: Callable, g: Callable, x) -> float:
    """``{f, g}(x)`` for scalar fields given as callables (gradients by finite differences)."""
    x = model.check(x)
    return model.poisson_bracket(fd_gradient(f, x), fd_gradient(g, x))


def generator(model: Model, xi, x) -> np.ndarray:
    return model.generator(xi, x)


def act(model: Model, theta, x) -> np.ndarray:
    return model.act(theta, x)


def evaluate(model: Model, eps: float, x, what: str = "value"):
    return model.evaluate(eps, x, what)


# ---------------------------------------------------------------------------
# subtori


@dataclass(frozen=True)
class SubtorusInclusion:
    """Integer lattice map ``i: t^r -> t^n`` given by an ``n x r`` matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim == 1:
            m = m.reshape(-1, 1)
        if m.ndim != 2:
            raise ValueError("inclusion matrix must be 2-d")
        if m.size and not np.all(np.equal(np.round(m), m)):
            raise ValueError("inclusion matrix must be integer")
        m = m.astype(int)
        n, r = m.shape
        if r > n:
            raise ValueError("subtorus rank exceeds torus rank")
        if r and np.linalg.matrix_rank(m.astype(float)) != r:
            raise ValueError("inclusion columns are linearly dependent")
        for j in range(r):
            if np.gcd.reduce(np.abs(m[:, j])) != 1:
                raise ValueError(f"column {j} of the inclusion is not primitive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def r(self) -> int:
        return self.matrix.shape[1]

    def embed(self, theta_r) -> np.ndarray:
        """Torus element ``i(theta_r)`` in R^n."""
        return self.matrix @ np.atleast_1d(np.asarray(theta_r, dtype=float)).reshape(self.r)

    def restrict(self, mu) -> np.ndarray:
        """Dual map ``i^*`` on momentum covectors."""
        return self.matrix.T @ np.asarray(mu, dtype=float)

    @classmethod
    def trivial(cls, n: int) -> "SubtorusInclusion":
        return cls(np.zeros((n, 0), dtype=int))

    @classmethod
    def full(cls, n: int) -> "SubtorusInclusion":
        return cls(np.eye(n, dtype=int))

    @classmethod
    def parse(cls, text: str, n: int) -> "SubtorusInclusion":
        """Columns separated by ``;``, entries by ``,``; empty text is r = 0."""
        text = (text or "").strip()
        if not text or text in ("0", "none", "trivial"):
            return cls.trivial(n)
        cols = [[int(v) for v in c.split(",")] for c in text.split(";") if c.strip()]
        for c in cols:
            if len(c) != n:
                raise ValueError(f"subtorus column {c} must have {n} entries")
        return cls(np.array(cols, dtype=int).T)


def momentum(model: Model, x) -> np.ndarray:
    return model.momentum_value(x)


def restricted_momentum(model: Model, sub: SubtorusInclusion, x) -> np.ndarray:
    return sub.restrict(model.momentum_value(x))


# ---------------------------------------------------------------------------
# validation


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    expected_failure: bool = False
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.passed or self.expected_failure


@dataclass
class ValidationReport:
    model: str
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> list:
        return [c for c in self.checks if not c.ok]

    def summary(self) -> str:
        lines = [f"validation of {self.model}:"]
        for c in self.checks:
            status = "pass" if c.passed else ("broken as intended" if c.expected_failure else "FAIL")
            extra = f" ({c.note})" if c.note else ""
            lines.append(f"  {c.name:28s} {status:20s} worst={c.worst:.3e} tol={c.tol:.1e}{extra}")
        return "\n".join(lines)


def validate(model: Model, sub: Optional[SubtorusInclusion] = None, sample_count: int = 128,
             seed: int = 0, eps: float = 0.1, tol: float = 1e-8) -> ValidationReport:
    """Sample-based check of the structural hypotheses of a model.

    Failures are returned as report entries; nothing is raised.
    """
    if sub is None:
        sub = SubtorusInclusion.trivial(model.n)
    rng = np.random.default_rng(seed)
    omega = model.chart.omega
    worst = dict(commute=0.0, inv0=0.0, inv_sub=0.0, broken=0.0, sympl=0.0, gen=0.0, law=0.0)
    comp = _complement_directions(sub)
    for _ in range(sample_count):
        x = model.sample(rng)
        dj = model.momentum_jac(x)
        px = model.chart.poisson
        brackets = dj @ px @ dj.T
        worst["commute"] = max(worst["commute"], float(np.max(np.abs(brackets), initial=0.0)))
        g0 = model.grad(0.0, x)
        worst["inv0"] = max(worst["inv0"], float(np.max(np.abs(dj @ px @ g0), initial=0.0)))
        ge = model.grad(eps, x)
        bj = dj @ px @ ge  # {J_i, H_eps}
        if sub.r:
            worst["inv_sub"] = max(worst["inv_sub"], float(np.max(np.abs(sub.matrix.T @ bj))))
        if comp.shape[1]:
            worst["broken"] = max(worst["broken"], float(np.max(np.abs(comp.T @ bj))))
        theta = rng.uniform(0, 2 * np.pi, model.n)
        try:
            dphi = model.act_jacobian(theta, x)
            worst["sympl"] = max(worst["sympl"], float(np.max(np.abs(dphi.T @ omega @ dphi - omega))))
            h = 1e-5
            for i in range(model.n):
                e = np.zeros(model.n)
                e[i] = h
                deriv = model.difference(model.action(e, x), model.action(-e, x)) / (2 * h)
                gen = model.generator(np.eye(model.n)[i], x)
                worst["gen"] = max(worst["gen"], float(np.max(np.abs(deriv - gen))))
            t2 = rng.uniform(0, 2 * np.pi, model.n)
            lhs = model.act(theta, model.act(t2, x))
            rhs = model.act(theta + t2, x)
            worst["law"] = max(worst["law"], model.distance(lhs, rhs))
        except DomainError:
            continue
    checks = [
        CheckResult("commuting momenta", worst["commute"] <= tol, worst["commute"], tol),
        CheckResult("full invariance at eps=0", worst["inv0"] <= tol, worst["inv0"], tol),
        CheckResult("subtorus invariance", worst["inv_sub"] <= tol, worst["inv_sub"], tol,
                    note=f"eps={eps}, r={sub.r}"),
    ]
    if comp.shape[1]:
        preserved = worst["broken"] <= tol
        checks.append(CheckResult(
            "full invariance at eps!=0", preserved, worst["broken"], tol,
            expected_failure=not preserved,
            note=(f"eps={eps}: broken directions accidentally preserved" if preserved
                  else f"eps={eps}")))
    checks += [
        CheckResult("symplectic action", worst["sympl"] <= tol, worst["sympl"], tol),
        CheckResult("generator consistency", worst["gen"] <= 1e-6, worst["gen"], 1e-6),
        CheckResult("group law", worst["law"] <= 1e-10, worst["law"], 1e-10),
    ]
    return ValidationReport(model.name, checks)


def _complement_directions(sub: SubtorusInclusion) -> np.ndarray:
    """Orthonormal directions of t^n orthogonal to the subtorus algebra."""
    n = sub.n
    if sub.r == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(sub.matrix.astype(float), mode="complete")
    return q[:, sub.r:]
