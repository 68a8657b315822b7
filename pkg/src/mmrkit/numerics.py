"""Scalar numerics: Gaussian functions, bracketed roots, 1-D maximization, and
a counter-based uniform stream.

The Gaussian functions accept floats or numpy arrays and return the same kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special

from .errors import BracketError, ConvergenceError, DomainError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"bracket endpoints must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise DomainError(f"bracket requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Tolerances:
    abs_x: float = 1e-10
    abs_f: float = 1e-12
    max_iter: int = 200

    def __post_init__(self):
        if not (self.abs_x > 0 and self.abs_f > 0):
            raise DomainError("tolerances must be strictly positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be at least 1")

    @classmethod
    def default_for(cls, lo: float, hi: float) -> "Tolerances":
        return cls(abs_x=1e-10 * max(1.0, abs(hi - lo)))


def _check_finite(z, name: str = "z"):
    if np.ndim(z) == 0:
        if not math.isfinite(z):
            raise DomainError(f"{name} must be finite, got {z!r}")
        return float(z)
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def std_normal_cdf(z):
    """Standard normal c.d.f. via the complementary error function.

    ``erfc`` keeps relative accuracy deep in the lower tail, which matters
    once ``k*/sigma`` reaches 10 or more.
    """
    z = _check_finite(z)
    out = 0.5 * special.erfc(-z / _SQRT2)
    if np.ndim(out) == 0:
        return min(1.0, max(0.0, float(out)))
    return np.clip(out, 0.0, 1.0)


def std_normal_pdf(z):
    z = _check_finite(z)
    out = _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))
    return float(out) if np.ndim(out) == 0 else out


def find_root(
    f: Callable[[float], float],
    bracket: Bracket,
    tol: Tolerances | None = None,
) -> float:
    """Root of ``f`` inside ``bracket`` by Brent's method (bisection fallback).

    Raises BracketError when the endpoint values do not differ in sign and
    ConvergenceError, carrying the best iterate, when ``max_iter`` runs out.
    """
    if tol is None:
        tol = Tolerances.default_for(bracket.lo, bracket.hi)
    flo, fhi = f(bracket.lo), f(bracket.hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)):
        raise DomainError("f is not finite at the bracket endpoints")
    if flo == 0.0:
        return bracket.lo
    if fhi == 0.0:
        return bracket.hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(
            f"no sign change on [{bracket.lo}, {bracket.hi}]: f(lo)={flo:.3e}, f(hi)={fhi:.3e}"
        )
    root, info = optimize.brentq(
        f,
        bracket.lo,
        bracket.hi,
        xtol=tol.abs_x,
        rtol=4 * np.finfo(float).eps,
        maxiter=tol.max_iter,
        full_output=True,
        disp=False,
    )
    if not info.converged and abs(f(root)) > tol.abs_f:
        raise ConvergenceError(
            f"root finder did not converge in {tol.max_iter} iterations", best=root
        )
    return float(root)


def _golden_max(f, a: float, b: float, tol: Tolerances) -> tuple[float, float]:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(tol.max_iter):
        if b - a <= tol.abs_x:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_1d(
    f: Callable,
    lo: float,
    hi: float,
    grid_n: int = 201,
    tol: Tolerances | None = None,
    *,
    vectorized: bool = False,
) -> tuple[float, float]:
    """Grid scan of ``grid_n`` points, then golden-section refinement between
    the neighbours of the best grid point.

    With ``vectorized=True`` the grid is evaluated by a single call of ``f``
    on an array. The returned maximum is never below the grid maximum; ties on
    the grid go to the smallest argument.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise DomainError(f"maximize_1d needs a finite interval with lo < hi, got [{lo}, {hi}]")
    if grid_n < 3:
        raise DomainError("grid_n must be at least 3")
    if tol is None:
        tol = Tolerances.default_for(lo, hi)
    grid = np.linspace(lo, hi, grid_n)
    if vectorized:
        values = np.asarray(f(grid), dtype=float)
    else:
        values = np.array([f(x) for x in grid], dtype=float)
    i = int(np.argmax(values))
    best_x, best_f = float(grid[i]), float(values[i])
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid_n - 1)]
    x, fx = _golden_max(lambda t: float(f(t)), float(a), float(b), tol)
    if fx > best_f:
        return x, fx
    return best_x, best_f


def uniform_draw(seed: int, index: int) -> float:
    """Uniform [0, 1) draw that depends only on ``(seed, index)``.

    Uses the Philox counter-based generator keyed by the seed with the index as
    the counter, so draws can be taken in any order and still agree.
    """
    key = int(seed) & 0xFFFFFFFFFFFFFFFF
    counter = int(index) % (1 << 256)
    bitgen = np.random.Philox(key=key, counter=counter)
    return float(np.random.Generator(bitgen).random())
