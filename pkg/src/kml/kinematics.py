"""Binary collision geometry and the cutoff soft-potential kernel."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate

UNIT_TOL = 1e-12


class SingularityError(ArithmeticError):
    """Kernel evaluated at coincident velocities with a negative exponent."""


class DivergentCutoffError(ArithmeticError):
    """The angular function is not integrable on the hemisphere."""


def _check_unit(w: np.ndarray, name: str) -> None:
    norms = np.linalg.norm(w, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ValueError(f"{name} must be a unit vector (|{name}| = 1 within {UNIT_TOL})")


def post_collision_omega(v, v_star, omega):
    """``v' = v - [w.(v - v*)] w``,  ``v*' = v* + [w.(v - v*)] w``.

    Broadcasts over leading axes; the last axis has length 3.
    """
    v, v_star, omega = (np.asarray(a, dtype=float) for a in (v, v_star, omega))
    _check_unit(omega, "omega")
    proj = np.sum(omega * (v - v_star), axis=-1, keepdims=True) * omega
    return v - proj, v_star + proj


def post_collision_sigma(v, v_star, sigma):
    """sigma-parametrisation: ``u- = (u - |u| sigma)/2``, ``(v - u-, v* + u-)``."""
    v, v_star, sigma = (np.asarray(a, dtype=float) for a in (v, v_star, sigma))
    _check_unit(sigma, "sigma")
    u = v - v_star
    u_minus = 0.5 * (u - np.linalg.norm(u, axis=-1, keepdims=True) * sigma)
    return v - u_minus, v_star + u_minus


def sigma_from_omega(u, omega):
    """The sigma producing the same post-collision pair as ``omega``."""
    u, omega = np.asarray(u, dtype=float), np.asarray(omega, dtype=float)
    uhat = u / np.linalg.norm(u, axis=-1, keepdims=True)
    return uhat - 2.0 * np.sum(uhat * omega, axis=-1, keepdims=True) * omega


# -- angular functions ---------------------------------------------------------


@dataclass(frozen=True)
class Angular:
    """Angular factor ``b(cos theta)`` on ``[0, 1]`` with a round-trippable label."""

    label: str
    func: Callable[[np.ndarray], np.ndarray] = field(compare=False, repr=False)

    def __call__(self, c):
        return self.func(np.asarray(c, dtype=float))


def parse_angular(text: str) -> Angular:
    """``const:B0``, ``linear`` (b = c), ``power:K`` (b = c**K) or ``table:b0,b1,...``.

    Tables are linearly interpolated on equispaced points of ``[0, 1]``.
    """
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    if kind == "const":
        b0 = float(arg) if arg else 1.0
        if b0 < 0:
            raise ValueError("angular constant must be non-negative")
        return Angular(f"const:{arg or '1.0'}", lambda c: np.full_like(c, b0, dtype=float))
    if kind == "linear":
        return Angular("linear", lambda c: np.array(c, dtype=float))
    if kind == "power":
        k = float(arg)
        return Angular(f"power:{arg}", lambda c: np.power(c, k))
    if kind == "table":
        vals = np.array([float(s) for s in arg.split(",")])
        if vals.size < 2 or np.any(vals < 0):
            raise ValueError("angular table needs >= 2 non-negative entries")
        xs = np.linspace(0.0, 1.0, vals.size)
        return Angular(f"table:{arg}", lambda c: np.interp(c, xs, vals))
    raise ValueError(f"unknown angular function {text!r}")


@dataclass(frozen=True)
class KernelSpec:
    """``B(u, w) = |u|^gamma b(cos theta)`` restricted to ``0 <= theta <= pi/2``."""

    gamma: Fraction
    angular: Angular = field(default_factory=lambda: parse_angular("const:1.0"))

    def __post_init__(self):
        g = Fraction(self.gamma) if not isinstance(self.gamma, float) else None
        if g is None:
            raise TypeError("gamma must be rational")
        if not -3 < g <= 0:
            raise ValueError(f"gamma={g} outside (-3, 0]")
        object.__setattr__(self, "gamma", g)

    @classmethod
    def parse(cls, gamma: str, angular: str = "const:1.0") -> "KernelSpec":
        return cls(Fraction(gamma), parse_angular(angular))

    @property
    def gamma_f(self) -> float:
        return float(self.gamma)

    @property
    def cutoff_constant(self) -> float:
        return grad_constant(self)

    def to_config(self) -> dict[str, str]:
        g = self.gamma
        return {"gamma": f"{g.numerator}/{g.denominator}", "angular": self.angular.label}


def kernel_value(v, v_star, omega, k: KernelSpec):
    """``|v - v*|^gamma b(cos theta)``, zero where ``cos theta < 0``."""
    v, v_star, omega = (np.asarray(a, dtype=float) for a in (v, v_star, omega))
    _check_unit(omega, "omega")
    u = v - v_star
    r = np.linalg.norm(u, axis=-1)
    if np.any(r == 0.0):
        raise SingularityError("coincident velocities; exclude or regularise the diagonal")
    c = np.sum(omega * u, axis=-1) / r
    val = np.power(r, k.gamma_f) * k.angular(np.clip(c, 0.0, 1.0))
    out = np.where(c < 0.0, 0.0, val)
    return float(out) if out.ndim == 0 else out


_GRAD_CACHE: dict[str, float] = {}


def grad_constant(k: KernelSpec) -> float:
    """``int_{S^2, theta <= pi/2} b(cos theta) dw = 2 pi int_0^1 b(c) dc``."""
    key = k.angular.label
    if key in _GRAD_CACHE:
        return _GRAD_CACHE[key]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(lambda c: float(k.angular(c)), 0.0, 1.0,
                                      limit=200, epsabs=1e-13, epsrel=1e-13)
        except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
            raise DivergentCutoffError(f"angular function {key!r} violates the cutoff") from exc
    if not math.isfinite(val) or not math.isfinite(err) or err > 1e-9 * max(1.0, abs(val)):
        raise DivergentCutoffError(f"angular function {key!r} violates the cutoff")
    if val <= 0:
        raise DivergentCutoffError(f"angular function {key!r} has zero mass")
    _GRAD_CACHE[key] = 2.0 * math.pi * val
    return _GRAD_CACHE[key]
