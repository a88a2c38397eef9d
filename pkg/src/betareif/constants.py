"""Explicit constants for the quantitative estimates.

The proofs leave c1, c2, c3, c_B, c5 implicit; these are the values the
proof chains actually produce, hard-coded so every assertion in the
engine and in the tests uses a concrete number.  They are deliberately
generous: the point is reproducible assertions, not sharpness.
"""

from __future__ import annotations

import math

__all__ = [
    "c1", "c2", "c3", "c_packing_count", "c5", "overlap_bound",
    "stability_constant", "DEFAULT_TAU",
]

DEFAULT_TAU = 2.0 / 3.0


def c1(k: int, tau: float = DEFAULT_TAU) -> float:
    """Basis-equivalence constant of the general-position recursion:
    |lambda_i| <= (1 + 2/tau^2)^(k-i+1) ||v|| summed over i, against the
    trivial lower bound tau*sum|lambda_i| <= ... <= ||v||/tau."""
    if k == 0:
        return 1.0
    return max(1.0 / tau, k * (1.0 + 2.0 / tau**2) ** k)


def c2(k: int) -> float:
    """Packing constant for disjoint balls near a k-plane, via the
    Euclidean volume argument through the l^1-equivalence map."""
    return 12.0**k * c1(k) ** (2 * k)


def c3(k: int) -> float:
    """Almost-projection operator-norm constant from the Hahn-Banach
    construction over a 2/3-general-position basis."""
    return max(1.0, k * c1(k))


def c_packing_count(k: int) -> float:
    """c_B(k): count bound c_B * chi^(1-k) for 2*chi*r/5-separated sets near
    a (k-1)-plane inside a k-plane neighborhood."""
    return 20.0**k * c2(k)


def c5(k: int) -> float:
    """Covering-lemma packing constant: disjoint r/10 balls pulled back by
    the (1+c*delta^alpha)-bi-Lipschitz tau into B_3 of a k-plane."""
    return 30.0**k * c2(k)


def overlap_bound(k: int) -> float:
    """Gamma(k): overlap bound for {B_3r(x_i)} with 2r/5-separated centers
    near a k-plane."""
    return 40.0**k * c2(k)


def stability_constant(k: int, tau: float) -> float:
    """c(k,tau) in the general-position stability lemma: perturbing by eps
    keeps margin >= tau - c*eps."""
    return 1.0 + 2.0 * c1(k, tau) * (tau + 1.0 / tau)


def norm_equivalence(dim: int, p: float) -> float:
    """c with ||x||_2 / c <= ||x||_p <= c ||x||_2 on R^dim."""
    if p == math.inf:
        return dim**0.5
    return float(dim ** abs(0.5 - 1.0 / p))
