"""Half-line model operator ``T_a = -h^2 d^2/dx^2`` with ``(h d/dx + a) u(0) = 0``.

This is the frozen-coefficient picture of the boundary: resolvent kernel,
spectral measure, the bound state that appears for ``a > 0``, the diagonal
of the half-space spectral projector, and an evaluation of ``kappa(a)`` by
integrating that diagonal (minus its bulk value) across the boundary layer.

The boundary-layer integral is only conditionally convergent, so it is
damped by ``exp(-eps * x1/h)`` and extrapolated to ``eps -> 0``.  Because the
t-integral is done numerically, this route shares no formula with
:mod:`dtnlab.kappa` beyond the spectral projector itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .kappa import check_dimension, unit_ball_volume

POLE_GUARD = 1e-8


class ResolventPoleError(ValueError):
    """``i*eta +- a`` vanishes: the spectral parameter hits the bound state."""


class ExtrapolationError(RuntimeError):
    """The eps -> 0 extrapolation did not settle."""

    def __init__(self, message: str, estimates: tuple[float, ...]):
        super().__init__(message)
        self.estimates = estimates


@dataclass(frozen=True)
class HalflineParams:
    """Robin parameter, semiclassical parameter and spectral variable.

    ``eta`` is the square root of ``sigma - |xi'|^2``; upper half-plane
    ``eta`` pairs with ``Im sigma > 0``.
    """

    a: float
    h: float
    eta: complex = 1.0
    xi_prime_sq: float = 0.0

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.xi_prime_sq < 0:
            raise ValueError("|xi'|^2 must be nonnegative")

    @property
    def sigma(self) -> complex:
        return complex(self.eta) ** 2 + self.xi_prime_sq


def reflection(a: float, eta):
    """``(i*eta - a) / (i*eta + a)``; unimodular for real ``eta``."""
    eta = np.asarray(eta)
    return (1j * eta - a) / (1j * eta + a)


def resolvent_kernel(p: HalflineParams, x, y):
    """Schwartz kernel of ``(T_a - eta^2)^{-1}`` at ``(x, y)``.

    Uses the outgoing form for ``Im eta > 0`` and its mirror for
    ``Im eta < 0``; the two are complex conjugates of each other under
    ``eta -> conj(eta)``.
    """
    eta = complex(p.eta)
    a, h = p.a, p.h
    if eta.imag == 0:
        raise ValueError("resolvent needs Im eta != 0")
    if eta.real < 0:
        raise ValueError("resolvent needs Re eta >= 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("half-line coordinates must be nonnegative")
    dist = np.abs(x - y)
    if eta.imag > 0:
        if abs(1j * eta + a) < POLE_GUARD:
            raise ResolventPoleError(f"eta = {eta} is the bound state pole")
        ratio = (1j * eta - a) / (1j * eta + a)
        out = (1j / (2 * h * eta)) * (
            np.exp(1j * eta * dist / h) + ratio * np.exp(1j * eta * (x + y) / h)
        )
    else:
        if abs(1j * eta - a) < POLE_GUARD:
            raise ResolventPoleError(f"eta = {eta} is the bound state pole")
        ratio = (1j * eta + a) / (1j * eta - a)
        out = (-1j / (2 * h * eta)) * (
            np.exp(-1j * eta * dist / h) + ratio * np.exp(-1j * eta * (x + y) / h)
        )
    return out[()] if out.ndim == 0 else out


def spectral_measure_density(p: HalflineParams, x, y):
    """Density of ``dE_{T_a}`` with respect to ``d eta`` for real ``eta > 0``."""
    eta = complex(p.eta)
    if eta.imag != 0 or not eta.real > 0:
        raise ValueError("spectral density needs real eta > 0")
    eta = eta.real
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rho = reflection(p.a, eta)
    val = (
        2.0 * np.cos(eta * (x - y) / p.h)
        + 2.0 * np.real(rho * np.exp(1j * eta * (x + y) / p.h))
    ) / (2 * math.pi * p.h)
    return val[()] if val.ndim == 0 else val


def stone_density(p: HalflineParams, x, y, delta: float = 1e-6):
    """Spectral density rebuilt from the resolvent jump across the real axis.

    ``(R(eta^2 + i0) - R(eta^2 - i0)) / (2 pi i) * 2 eta``, with the
    limit taken by one Richardson step in the offset ``delta``.
    """
    eta = float(np.real(p.eta))

    def jump(dl):
        up = resolvent_kernel(HalflineParams(p.a, p.h, eta + 1j * dl), x, y)
        down = resolvent_kernel(HalflineParams(p.a, p.h, eta - 1j * dl), x, y)
        return np.real((up - down) / (2j * math.pi) * 2 * eta)

    return 2.0 * jump(0.5 * delta) - jump(delta)


@dataclass(frozen=True)
class BoundState:
    energy: float
    a: float
    h: float

    @property
    def peak(self) -> float:
        return math.sqrt(2 * self.a / self.h)

    def profile(self, x):
        return self.peak * np.exp(-self.a * np.asarray(x, dtype=float) / self.h)


def bound_state(p: HalflineParams) -> BoundState | None:
    """Negative eigenvalue ``-a^2`` with normalised profile; ``None`` for ``a <= 0``."""
    if p.a <= 0:
        return None
    return BoundState(-p.a * p.a, p.a, p.h)


# ---------------------------------------------------------------------------
# Diagonal of the half-space spectral projector
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _gegenbauer_rule(n: int, power2: int):
    # weight (1 - eta^2)^(power2 / 2) on [-1, 1]
    alpha = 0.5 * power2
    nodes, weights = roots_jacobi(n, alpha, alpha)
    return nodes, weights


def _eta_nodes(t_max: float, a: float) -> int:
    # oscillation exp(2i eta t) plus the reflection pole at eta = i*a
    pole = 40.0 / abs(a) if a != 0 else 0.0
    return int(min(64 + 2.2 * t_max + pole, 40000))


@dataclass(frozen=True)
class ProjectorDiagonal:
    """``e(x1, x1)`` split into bulk, boundary-reflected and bound-state parts."""

    bulk: float
    reflected: float
    bound: float

    @property
    def continuum(self) -> float:
        return self.bulk + self.reflected

    @property
    def total(self) -> float:
        return self.bulk + self.reflected + self.bound


def _reflected_profile(a: float, d: int, t: np.ndarray) -> np.ndarray:
    """``int_{-1}^{1} (1-eta^2)^p Re[rho(eta) exp(2i eta t)] d eta`` for each ``t``.

    Equals twice the integral over ``[0, 1]`` because the integrand is even.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    # blocks of similar t share one rule
    order = np.argsort(t)
    ts = t[order]
    # upper block edges; the last one lies strictly above max(t)
    edges = 64.0 * np.arange(1, int(ts[-1] // 64.0) + 2)
    start = 0
    for hi in edges:
        stop = np.searchsorted(ts, hi, side="left")
        if stop > start:
            block = ts[start:stop]
            nodes, weights = _gegenbauer_rule(_eta_nodes(block[-1], a), d - 1)
            rho = reflection(a, nodes)
            phase = np.exp(2j * np.outer(block, nodes))
            out[order[start:stop]] = np.real(phase @ (weights * rho))
            start = stop
    return out


def projector_diagonal_parts(a: float, h: float, d: int, x1) -> ProjectorDiagonal | list:
    d = check_dimension(d)
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.atleast_1d(np.asarray(x1, dtype=float))
    if np.any(x < 0):
        raise ValueError("x1 must be nonnegative")
    om = unit_ball_volume(d - 1)
    scale = om / (2 * math.pi * h) ** d
    bulk = unit_ball_volume(d) / (2 * math.pi * h) ** d
    reflected = scale * _reflected_profile(a, d, x / h)
    if a > 0:
        # closed form of the sigma-integral: (1 + a^2)^((d-1)/2) * 2/(d-1)
        bound = (
            2 * om / (2 * math.pi * h) ** (d - 1) * (a / h)
            * np.exp(-2 * a * x / h) * (1 + a * a) ** (0.5 * (d - 1))
        )
    else:
        bound = np.zeros_like(x)
    parts = [ProjectorDiagonal(bulk, float(r), float(b)) for r, b in zip(reflected, bound)]
    return parts[0] if np.ndim(x1) == 0 else parts


def projector_diagonal(a: float, h: float, d: int, x1: float) -> float:
    """Diagonal value ``e(0, x1; 0, x1; 1)`` of the half-space projector ``E(1)``."""
    return projector_diagonal_parts(a, h, d, x1).total


# ---------------------------------------------------------------------------
# kappa from the boundary layer
# ---------------------------------------------------------------------------

def _gauss_panels(t_end: float, width: float = 2.0, order: int = 24):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    lefts = np.arange(0.0, t_end, width)
    t = (lefts[:, None] + 0.5 * width * (nodes[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * width * weights, lefts.size)
    return t, w


def boundary_layer_density(a: float, d: int, h: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """``x1 -> e(0, x1; 0, x1; 1) - (2 pi h)^(-d) omega_d`` as a vectorised function."""

    def density(x1):
        parts = projector_diagonal_parts(a, h, d, np.atleast_1d(x1))
        return np.array([p.total - p.bulk for p in parts])

    return density


def damped_layer_integral(a: float, d: int, eps: float, h: float = 1.0) -> float:
    """``h^(d-1) * int_0^inf exp(-eps x1/h) (e(x1) - bulk) dx1``."""
    t_end = max(40.0, 12.0 / eps)
    t, w = _gauss_panels(t_end)
    density = boundary_layer_density(a, d, h)
    vals = density(h * t)
    return h ** (d - 1) * float(np.sum(w * np.exp(-eps * t) * vals)) * h


def kappa_from_boundary_layer(
    a: float, d: int, eps: float = 0.1, *, h: float = 1.0, rtol: float = 1e-3
) -> float:
    """kappa(a) by integrating the projector diagonal across the boundary layer.

    Evaluates the damped integral at ``eps, eps/2, eps/4`` and removes the
    ``O(eps)`` and ``O(eps^2)`` terms by Richardson extrapolation.

    Raises
    ------
    ExtrapolationError
        If the last two extrapolants differ by more than ``10 * rtol``
        relative to the result.
    """
    d = check_dimension(d)
    if a == 0 or not math.isfinite(a):
        raise ValueError("boundary-layer route needs finite a != 0")
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    i1, i2, i4 = (damped_layer_integral(a, d, e, h) for e in (eps, eps / 2, eps / 4))
    r_a = 2 * i2 - i1
    r_b = 2 * i4 - i2
    result = (4 * r_b - r_a) / 3
    if abs(result - r_b) > 10 * rtol * abs(result):
        raise ExtrapolationError(
            f"eps-extrapolation unsettled for a={a}, d={d}", (i1, i2, i4, r_a, r_b, result)
        )
    return result
