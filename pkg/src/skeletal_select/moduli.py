"""Moduli δ: (0, ∞) -> (0, ∞), their iterates and the derived η/λ/γ chains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ModulusError(ValueError):
    pass


@dataclass(frozen=True)
class Modulus:
    """``linear``: δ(ε) = c ε with 0 < c <= 1; ``table``: log-linear interpolation of knots.

    Tabulated values are capped by ``ε`` so that δ(ε) <= ε always holds.
    """

    kind: str = "linear"
    c: float = 0.5
    table: tuple = ()

    def __post_init__(self):
        if self.kind == "linear":
            if not (0 < self.c <= 1):
                raise ModulusError("linear modulus needs 0 < c <= 1")
        elif self.kind == "table":
            t = np.asarray(self.table, dtype=float)
            if t.ndim != 2 or t.shape[1] != 2 or len(t) < 1:
                raise ModulusError("table modulus needs [[eps, delta], ...]")
            if np.any(t <= 0):
                raise ModulusError("table entries must be positive")
            if np.any(np.diff(t[:, 0]) <= 0) or np.any(np.diff(t[:, 1]) < 0):
                raise ModulusError("table must be increasing in eps and nondecreasing in delta")
        else:
            raise ModulusError(f"unknown modulus form {self.kind!r}")

    @classmethod
    def linear(cls, c: float) -> Modulus:
        return cls("linear", float(c))

    @classmethod
    def tabulated(cls, knots) -> Modulus:
        return cls("table", 1.0, tuple((float(a), float(b)) for a, b in knots))

    @classmethod
    def from_dict(cls, d: dict) -> Modulus:
        if "linear" in d:
            return cls.linear(d["linear"]["c"])
        if "table" in d:
            return cls.tabulated(d["table"])
        raise ModulusError("modulus needs 'linear' or 'table'")

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"linear": {"c": self.c}}
        return {"table": [list(r) for r in self.table]}

    def __call__(self, eps: float) -> float:
        if eps <= 0:
            raise ModulusError("modulus argument must be positive")
        if self.kind == "linear":
            return self.c * eps
        t = np.asarray(self.table)
        le, ld = np.log(t[:, 0]), np.log(t[:, 1])
        x = math.log(eps)
        if len(t) == 1:
            val = t[0, 1] * eps / t[0, 0]
        elif x <= le[0]:
            val = math.exp(ld[0] + (x - le[0]))  # proportional below the first knot
        elif x >= le[-1]:
            val = t[-1, 1]
        else:
            val = math.exp(float(np.interp(x, le, ld)))
        return min(val, eps)


def iterate(delta, n: int, eps: float) -> float:
    """δ_n(ε): δ_0(ε) = ε and δ_{j+1}(ε) = δ(δ_j(ε))."""
    if n < 0:
        raise ModulusError("iterate needs n >= 0")
    if eps <= 0:
        raise ModulusError("eps must be positive")
    v = eps
    for _ in range(n):
        v = delta(v)
    return v


def eta_lambda(delta, k: int):
    """η(ε) = δ(ε)/2 and λ(ε, μ) = δ_k(min(η(ε), μ))."""
    if k < 0:
        raise ModulusError("k must be >= 0")

    def eta(eps: float) -> float:
        return delta(eps) / 2

    def lam(eps: float, mu: float) -> float:
        return iterate(delta, k, min(eta(eps), mu))

    return eta, lam


@dataclass(frozen=True)
class Chain53:
    """Downward chains η_k, λ_k (0 <= k <= n+1) and γ(ε) = η_0(ε/2).

    λ uses the level-``n`` iterate δ_n, the smallest scale any level needs.
    """

    delta: object
    n: int

    def eta(self, k: int, eps: float) -> float:
        self._check(k)
        eta, _ = eta_lambda(self.delta, self.n)
        v = eps
        for _ in range(self.n + 1 - k):
            v = eta(v)
        return v

    def lam(self, k: int, eps: float, mu: float) -> float:
        self._check(k)
        _, lam = eta_lambda(self.delta, self.n)
        v = mu
        for j in range(self.n, k - 1, -1):
            v = lam(self.eta(j + 1, eps), v)
        return v

    def gamma(self, eps: float) -> float:
        return self.eta(0, eps / 2)

    def _check(self, k: int):
        if not 0 <= k <= self.n + 1:
            raise ModulusError(f"level {k} outside 0..{self.n + 1}")


def chain_53(delta, n: int) -> Chain53:
    if n < 0:
        raise ModulusError("n must be >= 0")
    return Chain53(delta, n)


@dataclass(frozen=True)
class Chain54:
    """γ_{n+1}(ε) = ε and γ_k(ε) = δ_k(γ_{k+1}(ε)) for per-level moduli δ_0..δ_n."""

    deltas: tuple
    n: int

    def gamma(self, k: int, eps: float) -> float:
        if not 0 <= k <= self.n + 1:
            raise ModulusError(f"level {k} outside 0..{self.n + 1}")
        v = eps
        for j in range(self.n, k - 1, -1):
            v = self.deltas[j](v)
        return v


def chain_54(deltas, n: int) -> Chain54:
    deltas = tuple(deltas)
    if len(deltas) != n + 1:
        raise ModulusError("chain_54 needs one modulus per level 0..n")
    return Chain54(deltas, n)


def iterated_levels(delta, n: int) -> tuple:
    """Per-level moduli ε -> δ_k(ε), k = 0..n (used when every level carries the same family)."""
    return tuple((lambda eps, k=k: iterate(delta, k, eps)) for k in range(n + 1))


def stage_count(eps: float, tol: float) -> int:
    if tol <= 0 or eps <= 0:
        raise ModulusError("eps and tol must be positive")
    return max(0, math.ceil(math.log2(eps / tol)))
