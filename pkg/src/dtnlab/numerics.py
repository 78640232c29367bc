"""Special functions, quadrature and root scanning used throughout dtnlab.

Bessel values come from Miller's backward recurrence normalised by a sum
rule; logarithmic derivatives come from the backward ratio recurrence
(equivalently, the continued fraction), which stays accurate next to the
zeros of the function.  Everything is float64.

Log-derivative helpers return ``None`` when the argument sits on a zero of
the function (a "pole" of the ratio).  The pole test is
``|f_n(x)| < POLE_TOL * |f_{n+1}(x)|``, i.e. ``x`` within about ``POLE_TOL``
of a zero.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

POLE_TOL = 1e-10
MAX_ORDER = 20000

_RESCALE_AT = 1e100
_RESCALE_BY = 1e-100


class OrderOverflowError(ValueError):
    """Requested Bessel order exceeds :data:`MAX_ORDER`."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of subdivisions.

    The best available estimate and its error bound are kept on the
    exception so callers can decide whether they are good enough.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RootScanError(RuntimeError):
    """Root refinement budget exceeded."""


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-10
    abs: float = 1e-13
    max_depth: int = 50

    def __post_init__(self):
        if not self.rel > 0:
            raise ValueError(f"rel must be > 0, got {self.rel}")
        if not self.abs >= 0:
            raise ValueError(f"abs must be >= 0, got {self.abs}")
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise ValueError(f"max_depth must be a positive integer, got {self.max_depth}")


@dataclass(frozen=True)
class BracketedRoot:
    lo: float
    hi: float
    f_lo: float
    f_hi: float
    root: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket needs lo < hi")
        if not self.f_lo * self.f_hi < 0:
            raise ValueError("bracket endpoints must have opposite signs")
        if not self.lo <= self.root <= self.hi:
            raise ValueError("root lies outside its bracket")


@dataclass
class RootScan:
    count: int
    roots: list[BracketedRoot] = field(default_factory=list)


def _check_order(n: int) -> int:
    if n < 0 or int(n) != n:
        raise ValueError(f"order must be a nonnegative integer, got {n}")
    if n > MAX_ORDER:
        raise OrderOverflowError(f"order {n} exceeds supported maximum {MAX_ORDER}")
    return int(n)


def _start_order(nmax: int, xmax: float) -> int:
    # past max(n, x) the minimal solution decays like exp(-c*k**1.5/sqrt(x));
    # 10*x**(1/3) extra terms push the start error below 1e-16
    return int(max(nmax, math.ceil(xmax)) + math.ceil(10.0 * xmax ** (1.0 / 3.0)) + 30)


def _as_positive_array(x) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError("arguments must be finite and nonnegative")
    return arr


# ---------------------------------------------------------------------------
# Miller backward recurrence (values)
# ---------------------------------------------------------------------------

def bessel_j_orders(nmax: int, x) -> np.ndarray:
    """``J_0 .. J_nmax`` at each point of ``x``; shape ``(nmax + 1, len(x))``."""
    nmax = _check_order(nmax)
    x = _as_positive_array(x)
    out = np.zeros((nmax + 1, x.size))
    zero = x == 0
    out[0, zero] = 1.0
    if np.all(zero):
        return out
    xp = x[~zero]
    top = max(nmax, _start_order(0, float(xp.max())))
    f = _miller_full(top, xp, sign=1.0, shift=0.0)
    # J_0 + 2 * sum J_{2k} = 1
    norm = f[0] + 2.0 * f[2::2].sum(axis=0)
    out[:, ~zero] = f[: nmax + 1] / norm
    return out


def _miller_full(nmax: int, x: np.ndarray, sign: float, shift: float) -> np.ndarray:
    """Backward recurrence keeping every order up to the starting index.

    The rows above ``nmax`` requested by callers are needed for the
    normalisation sums, so the whole stack is returned.
    """
    start = _start_order(nmax, float(x.max()))
    out = np.zeros((start + 2, x.size))
    out[start] = 1e-30
    for n in range(start, 0, -1):
        out[n - 1] = ((2.0 * n + shift) / x) * out[n] - sign * out[n + 1]
        big = np.abs(out[n - 1]) > _RESCALE_AT
        if np.any(big):
            out[n - 1 :, big] *= _RESCALE_BY
    return out


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for ``x >= 0``."""
    n = _check_order(n)
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(bessel_j_orders(n, [x])[n, 0])


def bessel_i_orders(nmax: int, x) -> np.ndarray:
    """``I_0 .. I_nmax`` at each point of ``x``."""
    nmax = _check_order(nmax)
    x = _as_positive_array(x)
    out = np.zeros((nmax + 1, x.size))
    zero = x == 0
    out[0, zero] = 1.0
    if np.all(zero):
        return out
    xp = x[~zero]
    top = max(nmax, _start_order(0, float(xp.max())))
    f = _miller_full(top, xp, sign=-1.0, shift=0.0)
    # I_0 + 2 * sum I_k = exp(x)
    norm = f[0] + 2.0 * f[1:].sum(axis=0)
    with np.errstate(over="ignore"):
        out[:, ~zero] = f[: nmax + 1] * (np.exp(xp) / norm)
    return out


def bessel_i(n: int, x: float) -> float:
    """Modified Bessel function ``I_n(x)`` for ``x >= 0``."""
    n = _check_order(n)
    if x < 0:
        raise ValueError("x must be nonnegative")
    return float(bessel_i_orders(n, [x])[n, 0])


def spherical_bessel_j_orders(lmax: int, x) -> np.ndarray:
    """``j_0 .. j_lmax`` at each (positive) point of ``x``."""
    lmax = _check_order(lmax)
    x = _as_positive_array(x)
    if np.any(x == 0):
        raise ValueError("spherical Bessel functions need x > 0")
    top = max(lmax, 1, _start_order(0, float(x.max())))
    f = _miller_full(top, x, sign=1.0, shift=1.0)
    ell = np.arange(f.shape[0])[:, None]
    # sum (2l+1) j_l^2 = 1 fixes the magnitude; the sign comes from whichever
    # of the closed forms j_0, j_1 is larger at x
    norm = np.sqrt(((2 * ell + 1) * f * f).sum(axis=0))
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x**2 - np.cos(x) / x
    use0 = np.abs(j0) >= np.abs(j1)
    ref = np.where(use0, j0, j1)
    got = np.where(use0, f[0], f[1])
    sgn = np.where(ref * got >= 0, 1.0, -1.0)
    return f[: lmax + 1] * (sgn / norm)


def spherical_bessel_j(l: int, x: float) -> float:
    """Spherical Bessel function ``j_l(x)`` for ``x > 0``."""
    l = _check_order(l)
    if not x > 0:
        raise ValueError("x must be positive")
    return float(spherical_bessel_j_orders(l, [x])[l, 0])


# ---------------------------------------------------------------------------
# Ratio recurrences (logarithmic derivatives)
# ---------------------------------------------------------------------------

def _ratios(nmax: int, x: np.ndarray, shift: float, sign: float, full: bool = False) -> np.ndarray:
    """Backward ratio recurrence ``r_k = f_k / f_{k-1}``.

    ``r_k = x / (2k + shift - sign * x * r_{k+1})``.  Row ``k`` of the result
    holds ``r_k`` for ``k = 1 .. nmax + 1`` (row 0 is unused).  With
    ``full=True`` rows run up to the starting index.
    """
    start = _start_order(nmax + 1, float(x.max()))
    rows = start + 1 if full else nmax + 2
    out = np.zeros((rows, x.size))
    r = np.zeros_like(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(start, 0, -1):
            r = x / (2.0 * k + shift - sign * x * r)
            if k < rows:
                out[k] = r
    return out


def bessel_j_log_derivatives(nmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``J_n'(x)/J_n(x)`` for ``n = 0..nmax`` at a single ``x > 0``.

    Returns ``(values, pole_mask)``; entries flagged in ``pole_mask`` are
    set to NaN.
    """
    nmax = _check_order(nmax)
    if not x > 0:
        raise ValueError("x must be positive")
    r = _ratios(nmax, np.array([float(x)]), shift=0.0, sign=1.0)[:, 0]
    n = np.arange(nmax + 1)
    nxt = r[1 : nmax + 2]
    pole = ~(np.abs(nxt) <= 1.0 / POLE_TOL)
    beta = n / x - nxt
    beta[pole] = np.nan
    return beta, pole


def bessel_j_log_derivative_ratio(n: int, x: float) -> float | None:
    """``J_n'(x)/J_n(x)``, or ``None`` when ``x`` sits on a zero of ``J_n``."""
    n = _check_order(n)
    beta, pole = bessel_j_log_derivatives(n, x)
    return None if pole[n] else float(beta[n])


def spherical_bessel_j_log_derivatives(lmax: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """``j_l'(x)/j_l(x)`` for ``l = 0..lmax``; see :func:`bessel_j_log_derivatives`."""
    lmax = _check_order(lmax)
    if not x > 0:
        raise ValueError("x must be positive")
    r = _ratios(lmax, np.array([float(x)]), shift=1.0, sign=1.0)[:, 0]
    ell = np.arange(lmax + 1)
    nxt = r[1 : lmax + 2]
    pole = ~(np.abs(nxt) <= 1.0 / POLE_TOL)
    beta = ell / x - nxt
    beta[pole] = np.nan
    return beta, pole


def spherical_bessel_j_log_derivative_ratio(l: int, x: float) -> float | None:
    """``j_l'(x)/j_l(x)``, or ``None`` at a zero of ``j_l``."""
    l = _check_order(l)
    beta, pole = spherical_bessel_j_log_derivatives(l, x)
    return None if pole[l] else float(beta[l])


def bessel_i_log_derivative_ratio(n: int, x) -> np.ndarray | float:
    """``I_n'(x)/I_n(x)`` (never singular for ``x > 0``); vectorised in ``x``."""
    n = _check_order(n)
    xa = _as_positive_array(x)
    if np.any(xa == 0):
        raise ValueError("x must be positive")
    r = _ratios(n, xa, shift=0.0, sign=-1.0)
    val = n / xa + r[n + 1]
    return float(val[0]) if np.ndim(x) == 0 else val


def modified_spherical_log_derivative_ratio(l: int, x) -> np.ndarray | float:
    """``i_l'(x)/i_l(x)`` for the modified spherical Bessel function."""
    l = _check_order(l)
    xa = _as_positive_array(x)
    if np.any(xa == 0):
        raise ValueError("x must be positive")
    r = _ratios(l, xa, shift=1.0, sign=-1.0)
    val = l / xa + r[l + 1]
    return float(val[0]) if np.ndim(x) == 0 else val


def bessel_j_signs(nmax: int, x) -> np.ndarray:
    """Signs of ``J_0 .. J_nmax`` on a grid, computed without underflow.

    Magnitudes of high orders at small ``x`` underflow long before their
    signs stop being meaningful, so signs are propagated through the ratio
    recurrence instead of read off the values.
    """
    nmax = _check_order(nmax)
    x = _as_positive_array(x)
    if np.any(x == 0):
        raise ValueError("x must be positive")
    r = _ratios(nmax, x, shift=0.0, sign=1.0, full=True)
    with np.errstate(over="ignore", invalid="ignore"):
        prod = np.cumprod(r[1:], axis=0)
        # J_0 = 1 / (1 + 2 * sum_k J_{2k}/J_0)
        s = 1.0 + 2.0 * np.nansum(prod[1::2], axis=0)
    sign0 = np.sign(s)
    ratio_sign = np.sign(r[1 : nmax + 1])
    out = np.empty((nmax + 1, x.size))
    out[0] = sign0
    if nmax:
        out[1:] = sign0 * np.cumprod(ratio_sign, axis=0)
    return out


def spherical_bessel_j_signs(lmax: int, x) -> np.ndarray:
    """Signs of ``j_0 .. j_lmax`` on a grid (see :func:`bessel_j_signs`)."""
    lmax = _check_order(lmax)
    x = _as_positive_array(x)
    r = _ratios(lmax, x, shift=1.0, sign=1.0)
    out = np.empty((lmax + 1, x.size))
    out[0] = np.sign(np.sin(x))
    if lmax:
        out[1:] = out[0] * np.cumprod(np.sign(r[1 : lmax + 1]), axis=0)
    return out


def bessel_j_log_derivative_grid(nmax: int, x) -> np.ndarray:
    """``x * J_n'(x)/J_n(x)`` for all orders on a grid; shape ``(nmax+1, len(x))``."""
    x = _as_positive_array(x)
    r = _ratios(nmax, x, shift=0.0, sign=1.0)
    n = np.arange(nmax + 1)[:, None]
    return n - x * r[1 : nmax + 2]


def spherical_bessel_j_log_derivative_grid(lmax: int, x) -> np.ndarray:
    """``x * j_l'(x)/j_l(x)`` for all orders on a grid."""
    x = _as_positive_array(x)
    r = _ratios(lmax, x, shift=1.0, sign=1.0)
    ell = np.arange(lmax + 1)[:, None]
    return ell - x * r[1 : lmax + 2]


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[7] = _WG[3]
_GW[[9, 11, 13]] = _WG[2::-1]


def _gk15(f, lo: float, hi: float) -> tuple[float, float]:
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    vals = np.asarray(f(mid + half * _NODES), dtype=float)
    if vals.shape != _NODES.shape:
        vals = np.broadcast_to(vals, _NODES.shape)
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"integrand not finite on [{lo}, {hi}]")
    kron = half * float(_KW @ vals)
    gauss = half * float(_GW @ vals)
    return kron, abs(kron - gauss)


def adaptive_quadrature(f: Callable, lo: float, hi: float, tol: Tolerance = Tolerance()) -> float:
    """Integrate ``f`` over ``[lo, hi]`` with globally adaptive GK15.

    ``f`` is called with a NumPy array of 15 nodes and must return an array
    of the same shape.  The interval with the largest error estimate is
    bisected until the summed error drops below
    ``max(tol.abs, tol.rel * |I|)``.

    Raises
    ------
    QuadratureError
        If an interval would have to be split more than ``tol.max_depth``
        times.  The exception carries the best estimate.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    val, err = _gk15(f, lo, hi)
    heap = [(-err, lo, hi, val, 0)]
    total, total_err = val, err
    while total_err > max(tol.abs, tol.rel * abs(total)):
        neg_err, a, b, v, depth = heapq.heappop(heap)
        if depth >= tol.max_depth:
            raise QuadratureError(
                f"no convergence after depth {tol.max_depth}", total, total_err
            )
        m = 0.5 * (a + b)
        v1, e1 = _gk15(f, a, m)
        v2, e2 = _gk15(f, m, b)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, a, m, v1, depth + 1))
        heapq.heappush(heap, (-e2, m, b, v2, depth + 1))
    # resum to shed the drift of the running updates
    return float(math.fsum(item[3] for item in heap))


# ---------------------------------------------------------------------------
# Root scanning
# ---------------------------------------------------------------------------

def _vector_call(f, x: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(f(x), dtype=float)
        if out.shape == x.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(f(float(t))) for t in x])


def count_sign_changes(
    f: Callable,
    lo: float,
    hi: float,
    initial_grid: int = 64,
    *,
    rtol: float = 1e-12,
    max_refinements: int = 12,
    refine_factor: int = 8,
) -> RootScan:
    """Count and refine the sign changes of a continuous ``f`` on ``(lo, hi)``.

    The grid is refined wherever ``|f|`` has a local minimum without a sign
    change in the neighbouring cells, since that is where a close pair of
    roots can hide.  Each bracket is then polished with Brent's method to
    relative tolerance ``rtol``.

    Raises
    ------
    RootScanError
        If suspicious cells are still present after ``max_refinements``
        rounds.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")
    if initial_grid < 1:
        raise ValueError("initial_grid must be positive")
    x = np.linspace(lo, hi, initial_grid + 1)
    y = _vector_call(f, x)

    for _ in range(max_refinements):
        suspects = _suspect_cells(x, y)
        if not suspects.size:
            break
        new_x = []
        for i in suspects:
            new_x.append(np.linspace(x[i], x[i + 1], refine_factor + 1)[1:-1])
        new_x = np.concatenate(new_x)
        new_y = _vector_call(f, new_x)
        x = np.concatenate([x, new_x])
        y = np.concatenate([y, new_y])
        order = np.argsort(x, kind="stable")
        x, y = x[order], y[order]
    else:
        if _suspect_cells(x, y).size:
            raise RootScanError("refinement budget exceeded")

    def _scalar(t):
        return float(np.ravel(f(t))[0])

    roots: list[BracketedRoot] = []
    count = 0
    # exact zeros on grid nodes count once
    sgn = np.sign(y)
    i = 0
    while i < len(x) - 1:
        if sgn[i] == 0:
            if 0 < i and x[i] < hi:
                count += 1
                roots.append(BracketedRoot(
                    float(np.nextafter(x[i], lo)), float(np.nextafter(x[i], hi)),
                    -1.0, 1.0, float(x[i])))
            i += 1
            continue
        if sgn[i] * sgn[i + 1] < 0:
            r = brentq(_scalar, x[i], x[i + 1], xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps))
            roots.append(BracketedRoot(float(x[i]), float(x[i + 1]), float(y[i]), float(y[i + 1]), float(r)))
            count += 1
        i += 1
    return RootScan(count, roots)


def _suspect_cells(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cells flanking a local minimum of ``|f|`` that shows no sign change."""
    if len(y) < 3:
        return np.empty(0, dtype=int)
    ay = np.abs(y)
    interior = np.arange(1, len(y) - 1)
    is_min = (ay[interior] < ay[interior - 1]) & (ay[interior] < ay[interior + 1])
    same = (np.sign(y[interior - 1]) == np.sign(y[interior])) & (
        np.sign(y[interior + 1]) == np.sign(y[interior])
    )
    # a dip is only suspicious if it heads towards zero faster than the
    # cell width would allow for a smooth nonvanishing function
    left = ay[interior - 1] - ay[interior]
    right = ay[interior + 1] - ay[interior]
    steep = ay[interior] < np.maximum(left, right)
    width_ok = (x[interior + 1] - x[interior - 1]) > 1e-9 * max(1.0, abs(x[-1] - x[0]))
    idx = interior[is_min & same & steep & width_ok]
    cells = np.unique(np.concatenate([idx - 1, idx]))
    return cells
