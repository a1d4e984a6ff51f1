"""Exact exponent algebra for mixed Lebesgue spaces.

Every exponent is carried as its reciprocal, a :class:`fractions.Fraction`
in ``[0, 1]``; the value ``0`` stands for an infinite exponent.  Nothing in
this module touches floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

RationalLike = Union[Fraction, int, str]

DEFAULT_EPS = Fraction(1, 100)


class ExponentError(ValueError):
    """An exponent or parameter lies outside its admissible range."""


class OpenBoundaryError(ExponentError):
    """A parameter sits exactly on the boundary of an open interval."""


class NotSolvableError(ExponentError):
    """A triplet was required to belong to the solvable family but does not."""


def as_rational(value: RationalLike) -> Fraction:
    """Parse ``"2/5"``, ``"-1/2"``, ints and Fractions. Floats are refused."""
    if isinstance(value, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(value, float):
        raise TypeError(f"floating point value {value!r} refused; pass a rational string")
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in {"inf", "infinity", "∞"}:
            raise ExponentError("infinite value has no rational form; use reciprocal 0")
        return Fraction(text)
    return Fraction(value)


def rational_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def _check_open(name: str, x: Fraction, lo: Fraction | None, hi: Fraction | None) -> None:
    if (lo is not None and x == lo) or (hi is not None and x == hi):
        raise OpenBoundaryError(f"{name}={rational_str(x)} is on the boundary of an open interval")
    if (lo is not None and x < lo) or (hi is not None and x > hi):
        lo_s = "-inf" if lo is None else rational_str(lo)
        hi_s = "inf" if hi is None else rational_str(hi)
        raise ExponentError(f"{name}={rational_str(x)} outside ({lo_s}, {hi_s})")


def _check_dim(N: int) -> None:
    if N not in (2, 3):
        raise ExponentError(f"space dimension must be 2 or 3, got {N}")


@dataclass(frozen=True)
class Triplet:
    """Reciprocal exponents ``(1/q, 1/r, 1/p)`` for ``L^q_t L^r_x L^p_v``."""

    q_inv: Fraction
    r_inv: Fraction
    p_inv: Fraction

    def __post_init__(self):
        for name in ("q_inv", "r_inv", "p_inv"):
            val = as_rational(getattr(self, name))
            if not 0 <= val <= 1:
                raise ExponentError(f"{name}={rational_str(val)} not in [0, 1]")
            object.__setattr__(self, name, val)

    @classmethod
    def of(cls, q_inv: RationalLike, r_inv: RationalLike, p_inv: RationalLike) -> "Triplet":
        return cls(as_rational(q_inv), as_rational(r_inv), as_rational(p_inv))

    @classmethod
    def from_exponents(cls, q, r, p) -> "Triplet":
        """Build from the exponents themselves; ``"inf"`` maps to reciprocal 0."""

        def inv(e):
            if isinstance(e, str) and e.strip().lower() in {"inf", "infinity", "∞"}:
                return Fraction(0)
            return 1 / as_rational(e)

        return cls(inv(q), inv(r), inv(p))

    def dual(self) -> "Triplet":
        """Hölder conjugate of every component."""
        return Triplet(1 - self.q_inv, 1 - self.r_inv, 1 - self.p_inv)

    def as_strings(self) -> dict[str, str]:
        return {
            "q_inv": rational_str(self.q_inv),
            "r_inv": rational_str(self.r_inv),
            "p_inv": rational_str(self.p_inv),
        }

    def __iter__(self):
        return iter((self.q_inv, self.r_inv, self.p_inv))


def harmonic_mean(t: Triplet) -> Fraction:
    """Reciprocal ``1/a`` of ``a = HM(p, r)``."""
    return (t.p_inv + t.r_inv) / 2


def _star_bounds(a_inv: Fraction, N: int) -> tuple[Fraction, Fraction]:
    """Reciprocals ``(1/p*(a), 1/r*(a))`` of the exact bounds on p and r."""
    if a_inv <= Fraction(N, N + 1):  # a >= (N+1)/N, including a = inf
        return (N + 1) * a_inv / N, (N - 1) * a_inv / N
    return Fraction(1), 2 * a_inv - 1


def is_kt_admissible(t: Triplet, N: int = 3) -> bool:
    _check_dim(N)
    if t.q_inv != Fraction(N, 2) * (t.p_inv - t.r_inv):
        return False
    a_inv = harmonic_mean(t)
    if not 0 <= a_inv <= 1:
        return False
    p_star_inv, r_star_inv = _star_bounds(a_inv, N)
    # p*(a) <= p <= a <= r <= r*(a), written for reciprocals
    return p_star_inv >= t.p_inv >= a_inv >= t.r_inv >= r_star_inv


def is_endpoint(t: Triplet, N: int = 3) -> bool:
    """True for ``(a, r*(a), p*(a))`` with ``(N+1)/N <= a < inf``."""
    _check_dim(N)
    a_inv = harmonic_mean(t)
    if not 0 < a_inv <= Fraction(N, N + 1):
        return False
    p_star_inv, r_star_inv = _star_bounds(a_inv, N)
    return t.q_inv == a_inv and t.r_inv == r_star_inv and t.p_inv == p_star_inv


def solvable_triplet(p_inv: RationalLike, N: int = 3) -> Triplet:
    _check_dim(N)
    p_inv = as_rational(p_inv)
    _check_open("p_inv", p_inv, Fraction(1, N), Fraction(N + 1, N * N))
    return Triplet(N * p_inv - 1, Fraction(2, N) - p_inv, p_inv)


def is_solvable(t: Triplet, N: int = 3) -> bool:
    try:
        return solvable_triplet(t.p_inv, N) == t
    except ExponentError:
        return False


def _require_solvable(t: Triplet, N: int) -> None:
    if not is_solvable(t, N):
        raise NotSolvableError(f"{t.as_strings()} is not a solvable triplet for N={N}")


def conjugate_triplet(t: Triplet, N: int = 3) -> Triplet:
    """Source-space triplet ``(q~', r~', p~')`` paired with a solvable triplet.

    The kinetic exponent is pinned to ``gamma = 2 - N``.  The result shares the
    harmonic mean of ``t`` and its Hölder dual satisfies the KT scaling
    relation.  The dual also meets the bounds ``p*(a) <= p <= a <= r <= r*(a)``
    only on part of the solvable range (for N = 3, ``1/p >= 7/18``); check
    with :func:`is_kt_admissible` where that matters.
    """
    _check_dim(N)
    _require_solvable(t, N)
    gamma = Fraction(2 - N)
    conj = Triplet(2 * t.q_inv, 2 * t.r_inv, 2 * t.p_inv - 1 - gamma / N)
    assert harmonic_mean(conj) == harmonic_mean(t)
    assert kt_relation_holds(conj.dual(), N)
    return conj


def kt_relation_holds(t: Triplet, N: int = 3) -> bool:
    """Only the scaling part of KT-admissibility: ``1/q = (N/2)(1/p - 1/r) > 0``."""
    _check_dim(N)
    return t.q_inv == Fraction(N, 2) * (t.p_inv - t.r_inv) and t.q_inv > 0


Q2_INV = Fraction(1, 2)


def companion_triplets(gamma: RationalLike, t: Triplet) -> tuple[Triplet, Triplet]:
    """Auxiliary ``L^{15/8}`` triplet and its source triplet, N = 3.

    Returns ``((1/2, (12+g)/30, (20-g)/30), (1/2 + 1/q, 1/r + 1/r2, 1/p + 1/p2 - 2/3))``.
    Only the published combination is produced; use :func:`is_kt_admissible`
    and :func:`check_weighted_scaling` to explore others.  The first triplet
    satisfies ``1/q = (3/2)(1/p - 1/r)`` only at ``gamma = -1``; it is returned
    as published for every gamma and callers that need admissibility must check.
    """
    gamma = as_rational(gamma)
    if not -1 <= gamma < 0:
        if gamma == 0:
            raise OpenBoundaryError("gamma=0 excluded")
        raise ExponentError(f"gamma={rational_str(gamma)} outside [-1, 0)")
    _require_solvable(t, 3)
    t2 = Triplet(Q2_INV, (12 + gamma) / 30, (20 - gamma) / 30)
    src = Triplet(Q2_INV + t.q_inv, t.r_inv + t2.r_inv, t.p_inv + t2.p_inv - Fraction(2, 3))
    assert t2.p_inv + t2.r_inv == Fraction(16, 15)
    assert src.p_inv + src.r_inv == Fraction(16, 15)
    assert t.p_inv < src.p_inv < t2.p_inv
    return t2, src


def local_triplet(alpha: RationalLike, gamma: RationalLike, N: int = 3) -> tuple[Triplet, Fraction]:
    """Local-in-time triplet family and the time gain exponent ``beta``."""
    _check_dim(N)
    alpha, gamma = as_rational(alpha), as_rational(gamma)
    _check_open("alpha", alpha, Fraction(1, 2), Fraction(N + 1, 2 * N))
    _check_open("gamma", gamma, Fraction(-N), Fraction(2 - N))
    g = gamma + N
    t = Triplet((2 * alpha - 1) * g / 2, (1 - alpha) * g / N, alpha * g / N)
    beta = ((2 - N) - gamma) / 2
    assert is_kt_admissible(t, N) and beta > 0
    return t, beta


def check_weighted_scaling(
    p_m_inv: RationalLike,
    q_m_inv: RationalLike,
    m_inv: RationalLike,
    r_m_inv: RationalLike,
    gamma: RationalLike,
    N: int = 3,
    loss_variant: bool = False,
) -> bool:
    """Scaling relation with an extra weight exponent ``m`` plus size conditions.

    gain: ``1/p + 1/m < 1`` and ``1/q + 1/m < 1``;
    loss: ``1/p + 1/r' < 1`` (i.e. ``1/p < 1/r``) and ``1/q + 1/m < 1``.
    """
    _check_dim(N)
    p, q, m, r, gamma = (as_rational(x) for x in (p_m_inv, q_m_inv, m_inv, r_m_inv, gamma))
    for name, x in (("p_m_inv", p), ("q_m_inv", q), ("m_inv", m), ("r_m_inv", r)):
        if not 0 < x < 1:
            raise ExponentError(f"{name}={rational_str(x)} not in (0, 1)")
    if p + q + m != 1 + gamma / N + r:
        return False
    if q + m >= 1:
        return False
    if loss_variant:
        return p + (1 - r) < 1
    return p + m < 1


def weight_exponent(gamma: RationalLike, eps: RationalLike = DEFAULT_EPS) -> Fraction:
    """Velocity weight ``(1+gamma)^+ + eps``, and exactly 0 at ``gamma = -1``."""
    gamma, eps = as_rational(gamma), as_rational(eps)
    if not -1 <= gamma < 0:
        raise ExponentError(f"gamma={rational_str(gamma)} outside [-1, 0)")
    if eps <= 0:
        raise ExponentError("eps must be positive")
    if gamma == -1:
        return Fraction(0)
    ell = 1 + gamma + eps
    if ell >= Fraction(3, 2):
        raise ExponentError(f"weight {rational_str(ell)} violates ell < 3/2; reduce eps")
    return ell


def gain_scaling_holds(p_inv, q_inv, r_inv, gamma, N: int = 3) -> bool:
    """``1/p + 1/q = 1 + gamma/N + 1/r`` for the bilinear gain estimate."""
    p, q, r, gamma = (as_rational(x) for x in (p_inv, q_inv, r_inv, gamma))
    return p + q == 1 + gamma / N + r


def hls_relation_holds(a1_inv, a2_inv, gamma, N: int = 3) -> bool:
    a1, a2, gamma = (as_rational(x) for x in (a1_inv, a2_inv, gamma))
    return a1 + a2 == 2 + gamma / N
