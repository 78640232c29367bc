"""The boundary coefficient kappa(a) of the two-term counting law.

``kappa(a)`` multiplies ``vol'(dM) * lambda**(d-1)`` in the count of
semiclassical DtN eigenvalues below ``a``.  Three evaluation routes exist:
quadrature of the eta-integral (any ``d >= 2``), the ``d = 3`` closed form,
and the boundary-layer integral in :mod:`dtnlab.halfline`.

Circle coordinates follow ``exp(i*theta) = (a - i)/(a + i)``, which is
``a = -cot(theta/2)`` or ``theta = pi + 2*arctan(a)``.  Dirichlet
(``a = -inf``) sits at ``theta = 0``; ``a -> +inf`` runs into
``theta = 2*pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import Tolerance, adaptive_quadrature

KAPPA_TOL = Tolerance(rel=1e-12, abs=1e-15, max_depth=60)


class Method(str, Enum):
    QUADRATURE = "quadrature"
    CLOSED_FORM_D3 = "closed_form_d3"
    HALFLINE_ORACLE = "halfline_oracle"


def check_dimension(d) -> int:
    if isinstance(d, bool) or int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def unit_ball_volume(d: int) -> float:
    """Volume ``omega_d`` of the unit ball in R^d (``omega_1 = 2``)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def prefactor(d: int) -> float:
    """``omega_{d-1} / (2 pi)^(d-1)``."""
    d = check_dimension(d)
    return unit_ball_volume(d - 1) / (2 * math.pi) ** (d - 1)


def neumann_value(d: int) -> float:
    """``kappa(0)``."""
    return 0.25 * prefactor(d)


def dirichlet_value(d: int) -> float:
    """``kappa(-inf)``."""
    return -0.25 * prefactor(d)


# ---------------------------------------------------------------------------
# Cayley map
# ---------------------------------------------------------------------------

def cayley_a_to_theta(a: float) -> float:
    """Angle in ``(0, 2*pi)`` with ``exp(i*theta) = (a - i)/(a + i)``.

    ``a = -inf`` maps to the endpoint ``0``.
    """
    if math.isnan(a):
        raise ValueError("a is NaN")
    return math.pi + 2.0 * math.atan(a)


def cayley_theta_to_a(theta: float) -> float:
    """Inverse of :func:`cayley_a_to_theta`: ``a = -cot(theta/2)``."""
    if not 0.0 <= theta <= 2 * math.pi:
        raise ValueError(f"theta must lie in [0, 2*pi], got {theta}")
    if theta == 0.0:
        return -math.inf
    if theta == 2 * math.pi:
        return math.inf
    return math.tan(0.5 * (theta - math.pi))


@dataclass(frozen=True)
class CayleyPoint:
    a: float
    theta: float

    @classmethod
    def from_a(cls, a: float) -> "CayleyPoint":
        if a == math.inf:
            raise ValueError("a = +inf has no Cayley angle inside (0, 2*pi)")
        return cls(a, cayley_a_to_theta(a))

    @classmethod
    def from_theta(cls, theta: float) -> "CayleyPoint":
        if not 0.0 < theta < 2 * math.pi:
            raise ValueError("theta must lie in (0, 2*pi)")
        return cls(cayley_theta_to_a(theta), theta)


# ---------------------------------------------------------------------------
# kappa
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KappaValue:
    a: float
    d: int
    value: float
    method: Method

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class JumpDecomposition:
    """``kappa(a) = integral_term + constant_term + heaviside_term``.

    The integral term jumps by ``-prefactor`` across ``a = 0`` and the
    Heaviside term by ``+prefactor``; the sum is continuous.
    """

    a: float
    d: int
    integral_term: float
    constant_term: float
    heaviside_term: float

    @property
    def total(self) -> float:
        return self.integral_term + self.constant_term + self.heaviside_term


def eta_integral(a: float, d: int, tol: Tolerance = KAPPA_TOL) -> float:
    """``int_{-1}^{1} (1 - eta^2)^((d-1)/2) * a / (a^2 + eta^2) d eta`` for ``a != 0``.

    The ``a/(a^2 + eta^2)`` spike is integrated exactly
    (``2*arctan(1/a)``); only the remainder, which vanishes quadratically at
    ``eta = 0``, goes through quadrature.  ``eta = sin(phi)`` removes the
    endpoint branch point for even ``d``.
    """
    d = check_dimension(d)
    if a == 0 or math.isnan(a):
        raise ValueError("eta_integral needs a finite nonzero a")
    if math.isinf(a):
        return 0.0
    power = d - 1

    def remainder(phi):
        c = np.cos(phi)
        s = np.sin(phi)
        return (c**power - 1.0) * a / (a * a + s * s) * c

    rest = 2.0 * adaptive_quadrature(remainder, 0.0, 0.5 * math.pi, tol)
    return 2.0 * math.atan(1.0 / a) + rest


def kappa_jump_decomposition(a: float, d: int, tol: Tolerance = KAPPA_TOL) -> JumpDecomposition:
    d = check_dimension(d)
    if a == 0 or math.isinf(a):
        raise ValueError("decomposition is defined for finite nonzero a")
    pref = prefactor(d)
    integral = -pref / (2 * math.pi) * eta_integral(a, d, tol)
    heaviside = pref * (1.0 + a * a) ** (0.5 * (d - 1)) if a > 0 else 0.0
    return JumpDecomposition(a, d, integral, -0.25 * pref, heaviside)


def kappa_quadrature(a: float, d: int, tol: Tolerance = KAPPA_TOL) -> KappaValue:
    """kappa(a) from the eta-integral; ``a = 0`` takes the two-sided limit."""
    d = check_dimension(d)
    if math.isnan(a):
        raise ValueError("a is NaN")
    if a == -math.inf:
        return KappaValue(a, d, dirichlet_value(d), Method.QUADRATURE)
    if a == math.inf:
        return KappaValue(a, d, math.inf, Method.QUADRATURE)
    if a == 0:
        return KappaValue(0.0, d, neumann_value(d), Method.QUADRATURE)
    return KappaValue(a, d, kappa_jump_decomposition(a, d, tol).total, Method.QUADRATURE)


def _arctan_tail(u: float) -> float:
    """``(1 + 1/u^2) * arctan(u) - 1/u`` without cancellation for small ``u``."""
    if u == 0:
        return 0.0
    if u > 0.5:
        return (1.0 + 1.0 / (u * u)) * math.atan(u) - 1.0 / u
    total = 0.0
    u2 = u * u
    term = u
    for k in range(1, 40):
        total += (1 if k % 2 else -1) * 2.0 * term / ((2 * k - 1) * (2 * k + 1))
        term *= u2
        if term < 1e-18 * total:
            break
    return total


def kappa_closed_form_d3(a: float) -> KappaValue:
    """Closed form of kappa for ``d = 3`` (arccot valued in ``(0, pi)``).

    For ``a < 0`` the terms ``(1+a^2)(1 - arccot(a)/pi)`` and ``a/pi`` nearly
    cancel, so that branch is rewritten through ``u = -1/a``.
    """
    if math.isnan(a):
        raise ValueError("a is NaN")
    pref = 1.0 / (4.0 * math.pi)
    if a == math.inf:
        value = math.inf
    elif a < 0:
        value = pref * (-0.25 + _arctan_tail(-1.0 / a) / math.pi)
    else:
        arccot = 0.5 * math.pi - math.atan(a)
        one_a2 = 1.0 + a * a
        value = pref * (-0.25 - arccot * one_a2 / math.pi + one_a2 + a / math.pi)
    return KappaValue(a, 3, value, Method.CLOSED_FORM_D3)


def kappa(a: float, d: int, method: Method | str | None = None) -> float:
    """kappa(a) as a float.

    ``method=None`` uses the closed form for ``d = 3`` and quadrature
    otherwise.  The half-line route lives in :mod:`dtnlab.halfline`.
    """
    d = check_dimension(d)
    if method is None:
        method = Method.CLOSED_FORM_D3 if d == 3 else Method.QUADRATURE
    method = Method(method)
    if method is Method.CLOSED_FORM_D3:
        if d != 3:
            raise ValueError("closed form only exists for d = 3")
        return kappa_closed_form_d3(a).value
    if method is Method.QUADRATURE:
        return kappa_quadrature(a, d).value
    from .halfline import kappa_from_boundary_layer

    return kappa_from_boundary_layer(a, d)


def _theta_minus_sin_over_sin2(theta: float) -> float:
    """``(theta - sin(theta)) / sin(theta/2)^2`` with a series near 0."""
    if theta < 1e-2:
        t2 = theta * theta
        num = theta**3 / 6.0 * (1.0 - t2 / 20.0 + t2 * t2 / 840.0)
        s = math.sin(0.5 * theta)
        return num / (s * s)
    s = math.sin(0.5 * theta)
    return (theta - math.sin(theta)) / (s * s)


def kappa_tilde(theta: float, d: int) -> float:
    """kappa in the angle variable, ``kappa(-cot(theta/2))``."""
    d = check_dimension(d)
    if not 0.0 < theta < 2 * math.pi:
        if theta == 0.0:
            return dirichlet_value(d)
        raise ValueError("theta must lie in (0, 2*pi)")
    if d == 3:
        return (1.0 / (4 * math.pi)) * (
            -0.25 + _theta_minus_sin_over_sin2(theta) / (2 * math.pi)
        )
    return kappa(cayley_theta_to_a(theta), d)
