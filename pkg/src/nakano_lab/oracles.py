"""Exact reference answers, kept free of the numerical pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial, pi
from typing import Sequence

from .bundles import SplitClass


def fs_oracle(d: int, m: int = 1) -> list[int]:
    """Curvature of ``d * log(1 + |z|^2)`` at the origin, per base direction."""
    return [d] * m


@dataclass(frozen=True)
class EquivariantPrediction:
    k: int
    gram_diagonal: tuple[float, ...]  # at z = 0
    gram_exponent: int  # H(z) = H(0) * (1 + |z|^2)^(-gram_exponent)
    eigenvalues: tuple[int, ...]


def beta_gram(alpha: int, k: int) -> Fraction:
    """``int |zeta|^(2 alpha) (1 + |zeta|^2)^-(k+2) dA / pi = alpha!(k-alpha)!/(k+1)!``."""
    return Fraction(factorial(alpha) * factorial(k - alpha), factorial(k + 1))


def equivariant_oracle(k: int) -> EquivariantPrediction:
    """Prediction for ``E = O(1) + O(1)`` over P1: every eigenvalue is ``k + 2``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    diag = tuple(pi * float(beta_gram(a, k)) for a in range(k + 1))
    return EquivariantPrediction(k, diag, k + 2, (k + 2,) * (k + 1))


@dataclass(frozen=True)
class WeightVector:
    parts: tuple[int, ...]

    def __post_init__(self):
        p = tuple(int(x) for x in self.parts)
        if any(x < 0 for x in p) or any(a < b for a, b in zip(p, p[1:])):
            raise ValueError(f"weight {p} is not a decreasing sequence of naturals")
        object.__setattr__(self, "parts", p)

    @property
    def height(self) -> int:
        return sum(1 for x in self.parts if x > 0)


def gamma_decomposition_r2(lam: WeightVector | Sequence[int], degrees: tuple[int, int]) -> list[int]:
    """Line-bundle degrees of ``Gamma^lam E (x) (det E)^l`` for ``E = O(a) + O(b)``.

    For rank two ``Gamma^(l1, l2) E = S^(l1-l2) E (x) (det E)^l2``.
    """
    if not isinstance(lam, WeightVector):
        lam = WeightVector(tuple(lam))
    if len(lam.parts) != 2:
        raise ValueError("rank-2 decomposition needs a weight of length 2")
    a, b = degrees
    l1, l2 = lam.parts
    p = l1 - l2
    t = l2 + lam.height
    return [q * a + (p - q) * b + t * (a + b) for q in range(p + 1)]


def split_spectrum_oracle(degrees: Sequence[Sequence[int]], k: int) -> list[list[int]]:
    """Curvature of ``S^k E (x) det E`` at the origin, per summand and base direction.

    Summand ``alpha`` (the section ``zeta^alpha d zeta``) has degree
    ``(k + 1 - alpha) a_t + (alpha + 1) b_t`` in base direction ``t``.
    """
    (a, b) = degrees
    return [[(k + 1 - al) * at + (al + 1) * bt for at, bt in zip(a, b)] for al in range(k + 1)]


def _h0(e: int) -> int:
    return max(e + 1, 0)


def _h1(e: int) -> int:
    return max(-e - 1, 0)


@dataclass(frozen=True)
class CohomologyTable:
    entries: dict  # degree -> (h0, h1)
    h11: int

    @property
    def euler(self) -> dict:
        return {d: h0 - h1 for d, (h0, h1) in self.entries.items()}


def bott_p1(degrees: Sequence[int]) -> CohomologyTable:
    """``H^{1,1}(P1, sum O(d_q)) = sum_q h^1(O(d_q - 2))`` (``K_P1 = O(-2)``)."""
    entries = {int(d): (_h0(int(d)), _h1(int(d))) for d in degrees}
    return CohomologyTable(entries, sum(_h1(int(d) - 2) for d in degrees))


def cech_p1(e: int, window: int | None = None) -> tuple[int, int]:
    """``(h0, h1)`` of ``O(e)`` on P1 by counting Laurent monomials.

    On ``U0 = {z != inf}`` sections of ``O(e)`` are spanned by ``z^n, n >= 0``;
    on ``U1`` (coordinate ``1/z``, transition ``z^e``) by ``z^n, n <= e``.
    ``H^0`` is the intersection of the two spans and ``H^1`` the monomials of
    ``C[z, 1/z]`` reached by neither.
    """
    w = window if window is not None else abs(e) + 3
    ns = range(-w - abs(e), w + abs(e) + 1)
    from_u0 = {n for n in ns if n >= 0}
    from_u1 = {n for n in ns if n <= e}
    h0 = len(from_u0 & from_u1)
    h1 = len(set(ns) - from_u0 - from_u1)
    return h0, h1


def classify_split(degrees) -> SplitClass:
    flat = []
    for d in degrees:
        flat.extend(d if isinstance(d, (tuple, list)) else [d])
    if all(x > 0 for x in flat):
        return SplitClass.AMPLE
    if all(x >= 0 for x in flat):
        return SplitClass.NEF_NOT_AMPLE
    return SplitClass.NOT_NEF


def decreasing_weights(r: int, bound: int):
    """All decreasing ``lam`` of length ``r`` with ``lam_1 <= bound``."""
    def rec(prefix, cap, left):
        if left == 0:
            yield WeightVector(tuple(prefix))
            return
        for x in range(cap, -1, -1):
            yield from rec(prefix + [x], x, left - 1)

    yield from rec([], bound, r)


def section_count(k: int, r: int) -> int:
    return comb(k + r - 1, r - 1)
