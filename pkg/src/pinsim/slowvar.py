"""Slowly varying functions and the universal critical-curve scale.

Implements the two families used throughout ("const" and "logpow"), an
empirical Potter-bound fitter, the de Bruijn conjugate by damped fixed-point
iteration, and the universal scale tilde_L_alpha built from it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SlowlyVarying",
    "const",
    "logpow",
    "eval_L",
    "PotterReport",
    "potter_report",
    "DeBruijnError",
    "de_bruijn_conjugate",
    "UniversalScale",
    "tilde_L_alpha",
]

_FAMILIES = ("const", "logpow")


@dataclass(frozen=True)
class SlowlyVarying:
    """L(n) from a named family, with an overall positive scale factor.

    const:  L(n) = scale * param
    logpow: L(n) = scale * (log(e + n))**param

    The e-shift keeps L finite and positive at n = 0; it changes nothing
    asymptotically.
    """

    family: str
    param: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown slowly varying family {self.family!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.family == "const" and self.param <= 0:
            raise ValueError("const family needs a positive value")

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        if np.any(n < 0):
            raise ValueError("L is defined for n >= 0")
        if self.family == "const":
            out = np.full_like(n, self.scale * self.param)
        else:
            out = self.scale * np.log(np.e + n) ** self.param
        return out if out.ndim else float(out)

    def rescaled(self, factor: float) -> "SlowlyVarying":
        return SlowlyVarying(self.family, self.param, self.scale * factor)

    @property
    def is_constant(self) -> bool:
        return self.family == "const"

    def label(self) -> str:
        if self.family == "const":
            return f"const({self.scale * self.param:g})"
        return f"logpow({self.param:g})x{self.scale:g}"


def const(c: float = 1.0) -> SlowlyVarying:
    return SlowlyVarying("const", c)


def logpow(b: float) -> SlowlyVarying:
    return SlowlyVarying("logpow", b)


def eval_L(L: SlowlyVarying, n):
    """L's value at n >= 0 (finite at 0 through the e-shift)."""
    return L(n)


@dataclass
class PotterReport:
    delta: float
    c_delta: float
    violations: int
    n_pairs: int


def potter_report(L, delta: float, n_grid, c_force: float | None = None) -> PotterReport:
    """Fit the smallest C with L(m)/L(l) <= C * max(r, 1/r)**delta over the grid,
    where r = (m+1)/(l+1).

    The fit is exact over all grid pairs: for m >= l the bound separates as
    [L(m)/(m+1)^d] * [(l+1)^d / L(l)], so running prefix maxima give the pair
    maximum in O(n log n).  Violations are counted against `c_force` when
    given, else against the fitted constant (then 0 by construction).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    n = np.asarray(sorted(set(float(x) for x in n_grid)))
    if n.size == 0:
        raise ValueError("empty grid")
    Lv = np.asarray(L(n), dtype=float)
    shift = (n + 1.0) ** delta

    a = Lv / shift           # m-side when m >= l
    b = shift / Lv           # l-side when m >= l
    c = Lv * shift           # m-side when m <= l
    d = 1.0 / (Lv * shift)   # l-side when m <= l
    best = 0.0
    run_b = -np.inf
    run_c = -np.inf
    for i in range(n.size):
        run_b = max(run_b, b[i])   # max over l <= i
        run_c = max(run_c, c[i])   # max over m <= i
        best = max(best, a[i] * run_b, d[i] * run_c)
    c_delta = best

    c_ref = c_force if c_force is not None else c_delta * (1 + 1e-12)
    violations = 0
    n_pairs = n.size * n.size
    # exact count in l-chunks; ratio(m, l) = Lv[m]/Lv[l] / max(r,1/r)^delta
    chunk = max(1, int(2e6 // max(1, n.size)))
    for lo in range(0, n.size, chunk):
        hi = min(n.size, lo + chunk)
        r = (n[None, lo:hi] + 1.0) / (n[:, None] + 1.0)
        np.maximum(r, 1.0 / r, out=r)
        ratio = (Lv[:, None] / Lv[None, lo:hi]) / r**delta
        violations += int(np.count_nonzero(ratio > c_ref))
    return PotterReport(delta=delta, c_delta=c_delta, violations=violations, n_pairs=n_pairs)


class DeBruijnError(RuntimeError):
    """Fixed-point iteration for the de Bruijn conjugate failed to settle."""

    def __init__(self, message, last_iterate, residual):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


def de_bruijn_conjugate(M, x: float, tol: float = 1e-10,
                        damping: float = 0.5, max_iter: int = 10_000) -> float:
    """Approximate M#(x) as the damped fixed point of y = 1/M(x/y).

    Stops when the relative change drops below tol; the returned y then
    satisfies |y * M(x/y) - 1| < 10*tol, which is checked before returning.
    """
    if x <= 0 or tol <= 0:
        raise ValueError("x and tol must be positive")
    y = 1.0 / float(M(x))
    for _ in range(max_iter):
        target = 1.0 / float(M(x / y))
        y_new = (1.0 - damping) * y + damping * target
        if abs(y_new / y - 1.0) < tol:
            y = y_new
            break
        y = y_new
    residual = abs(y * float(M(x / y)) - 1.0)
    if residual >= 10.0 * tol:
        raise DeBruijnError(
            f"de Bruijn iteration stalled at residual {residual:.3e} (tol {tol:.1e})",
            last_iterate=y, residual=residual)
    return y


@dataclass
class UniversalScale:
    """tilde_L_alpha(x) = M#(x)^(-1/(2a-1)) with M(x) = 1/L(x^(2/(2a-1)))."""

    alpha: float
    L: SlowlyVarying
    tol: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise ValueError("universal scale needs alpha in (1/2, 1)")

    def M(self, x):
        return 1.0 / self.L(np.power(x, 2.0 / (2.0 * self.alpha - 1.0)))

    def M_conjugate(self, x: float) -> float:
        key = (float(x), self.tol)
        if key not in self._cache:
            self._cache[key] = de_bruijn_conjugate(self.M, x, self.tol)
        return self._cache[key]

    def __call__(self, x: float) -> float:
        return self.M_conjugate(x) ** (-1.0 / (2.0 * self.alpha - 1.0))


def tilde_L_alpha(scale: UniversalScale, x: float) -> float:
    """Universal critical-curve scale M#(x)^(-1/(2a-1)) at x > 0."""
    return scale(x)
