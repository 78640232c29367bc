"""Separable model domains: DtN branches and Robin eigenvalue counts.

Conventions
-----------
The normal derivative in ``(h d_nu + a) u = 0`` is taken along the interior
normal.  On the disk ``u = J_n(lambda r) e^{i n phi}`` and the interior
normal is ``-d_r``, so the semiclassical DtN eigenvalue
``lambda^{-1} (-d_nu u)/u`` on the circle ``r = R`` is

    beta_n(lambda) = J_n'(lambda R) / J_n(lambda R).

It vanishes at zeros of ``J_n'``, i.e. at Neumann frequencies, and blows up
at Dirichlet frequencies.  The ball uses spherical Bessel functions with
multiplicity ``2l + 1``.

The Robin problem ``-h^2 Lap u = (1 + mu) u`` with ``mu < 0`` separates into
``h k J_n'(kR) = a J_n(kR)`` for ``0 < k < 1/h``, plus, when
``aR/h >= n``, one trapped mode built from ``I_n``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from . import numerics as nm

GRID_STEP = 0.05
POLE_SHIFT = 1e-9


class DirichletPoleWarning(UserWarning):
    """``lambda`` sat on a Dirichlet frequency and was nudged."""


class UnsupportedDomainError(ValueError):
    pass


class Kind(str, Enum):
    DISK = "disk"
    BALL = "ball"
    RECTANGLE = "rect"
    HEMISPHERE = "hemisphere"
    INTERVAL = "interval"


@dataclass(frozen=True)
class ModelDomain:
    """A model domain with its dimension and volumes.

    ``size`` holds ``(R,)`` for disk/ball, ``(L1, L2)`` for rectangles,
    ``(L,)`` for intervals and ``()`` for the unit hemisphere.
    """

    kind: Kind
    size: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        want = {Kind.DISK: 1, Kind.BALL: 1, Kind.RECTANGLE: 2, Kind.HEMISPHERE: 0, Kind.INTERVAL: 1}
        if len(self.size) != want[self.kind]:
            raise ValueError(f"{self.kind.value} takes {want[self.kind]} size parameter(s)")
        if any(not (s > 0 and math.isfinite(s)) for s in self.size):
            raise ValueError("sizes must be positive and finite")

    @classmethod
    def disk(cls, R: float = 1.0) -> "ModelDomain":
        return cls(Kind.DISK, (float(R),))

    @classmethod
    def ball(cls, R: float = 1.0) -> "ModelDomain":
        return cls(Kind.BALL, (float(R),))

    @classmethod
    def rectangle(cls, L1: float = 1.0, L2: float = 1.0) -> "ModelDomain":
        return cls(Kind.RECTANGLE, (float(L1), float(L2)))

    @classmethod
    def hemisphere(cls) -> "ModelDomain":
        return cls(Kind.HEMISPHERE, ())

    @classmethod
    def interval(cls, L: float = 1.0) -> "ModelDomain":
        return cls(Kind.INTERVAL, (float(L),))

    @property
    def radius(self) -> float:
        if self.kind not in (Kind.DISK, Kind.BALL):
            raise AttributeError("only disks and balls have a radius")
        return self.size[0]

    @property
    def d(self) -> int:
        return {Kind.DISK: 2, Kind.BALL: 3, Kind.RECTANGLE: 2, Kind.HEMISPHERE: 2, Kind.INTERVAL: 1}[self.kind]

    @property
    def vol(self) -> float:
        k, s = self.kind, self.size
        if k is Kind.DISK:
            return math.pi * s[0] ** 2
        if k is Kind.BALL:
            return 4.0 / 3.0 * math.pi * s[0] ** 3
        if k is Kind.RECTANGLE:
            return s[0] * s[1]
        if k is Kind.HEMISPHERE:
            return 2 * math.pi
        return s[0]

    @property
    def vol_boundary(self) -> float:
        k, s = self.kind, self.size
        if k is Kind.DISK:
            return 2 * math.pi * s[0]
        if k is Kind.BALL:
            return 4 * math.pi * s[0] ** 2
        if k is Kind.RECTANGLE:
            return 2 * (s[0] + s[1])
        if k is Kind.HEMISPHERE:
            return 2 * math.pi
        return 2.0


@dataclass(frozen=True)
class DtnBranch:
    """One angular branch of the semiclassical DtN spectrum.

    ``beta`` is ``None`` when ``lambda`` is a Dirichlet frequency of the branch.
    """

    index: int
    multiplicity: int
    beta: float | None

    @property
    def is_pole(self) -> bool:
        return self.beta is None


def _require(domain: ModelDomain, *kinds: Kind):
    if domain.kind not in kinds:
        names = ", ".join(k.value for k in kinds)
        raise UnsupportedDomainError(f"{domain.kind.value} not supported here (need {names})")


def _check_lambda(lam: float) -> float:
    if not (lam > 0 and math.isfinite(lam)):
        raise ValueError(f"lambda must be positive and finite, got {lam}")
    return float(lam)


def dtn_disk_branch(R: float, lam: float, n: int) -> DtnBranch:
    lam = _check_lambda(lam)
    beta = nm.bessel_j_log_derivative_ratio(n, lam * R)
    return DtnBranch(n, 1 if n == 0 else 2, beta)


def dtn_ball_branch(R: float, lam: float, l: int) -> DtnBranch:
    lam = _check_lambda(lam)
    beta = nm.spherical_bessel_j_log_derivative_ratio(l, lam * R)
    return DtnBranch(l, 2 * l + 1, beta)


def multiplicities(domain: ModelDomain, nmax: int) -> np.ndarray:
    idx = np.arange(nmax + 1)
    if domain.kind is Kind.DISK:
        return np.where(idx == 0, 1, 2)
    _require(domain, Kind.DISK, Kind.BALL)
    return 2 * idx + 1


def dtn_branch_values(domain: ModelDomain, lam: float, nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """``beta`` for indices ``0..nmax`` and the Dirichlet-pole mask."""
    _require(domain, Kind.DISK, Kind.BALL)
    lam = _check_lambda(lam)
    x = lam * domain.radius
    if domain.kind is Kind.DISK:
        return nm.bessel_j_log_derivatives(nmax, x)
    return nm.spherical_bessel_j_log_derivatives(nmax, x)


@dataclass(frozen=True)
class DtnWindowResult:
    branches: tuple[DtnBranch, ...]
    lam: float
    n_max: int
    pole_warnings: tuple[str, ...] = ()

    @property
    def count(self) -> int:
        return sum(b.multiplicity for b in self.branches)


def index_cutoff(lam: float, R: float, a1: float, a2: float) -> int:
    """Initial branch cutoff; the window query extends it while needed."""
    amax = max(abs(v) for v in (a1, a2) if math.isfinite(v)) if any(
        math.isfinite(v) for v in (a1, a2)) else 0.0
    return math.ceil(lam * R * (1.0 + amax)) + 20


def _branches_resolving_poles(domain: ModelDomain, lam: float, nmax: int):
    notes = []
    for _ in range(8):
        beta, pole = dtn_branch_values(domain, lam, nmax)
        if not pole.any():
            return lam, beta, notes
        idx = np.flatnonzero(pole)
        msg = f"lambda={lam!r} is a Dirichlet frequency on branch(es) {idx.tolist()}; shifted by {POLE_SHIFT:g}*lambda"
        warnings.warn(msg, DirichletPoleWarning, stacklevel=3)
        notes.append(msg)
        lam = lam * (1.0 + POLE_SHIFT)
    raise nm.RootScanError(f"could not step off Dirichlet poles near lambda={lam}")


def dtn_spectrum_window(domain: ModelDomain, lam: float, a1: float, a2: float) -> DtnWindowResult:
    """Branches with ``a1 <= beta < a2``.

    Branches are enumerated up to :func:`index_cutoff` and then further
    until five consecutive branches lie at or above ``a2``.  Past
    ``lambda R + 5`` the tail must be positive and increasing; a violation
    raises rather than silently truncating.
    """
    _require(domain, Kind.DISK, Kind.BALL)
    lam = _check_lambda(lam)
    if math.isnan(a1) or not a1 < a2 or not math.isfinite(a2):
        raise ValueError(f"window needs a1 < a2 < inf, got [{a1}, {a2})")
    R = domain.radius
    nmax = index_cutoff(lam, R, a1, a2)
    while True:
        lam_used, beta, notes = _branches_resolving_poles(domain, lam, nmax)
        tail = beta[-5:]
        if np.all(tail >= a2):
            break
        if nmax >= nm.MAX_ORDER:
            raise nm.OrderOverflowError("branch cutoff exceeded MAX_ORDER")
        nmax = min(2 * nmax, nm.MAX_ORDER)
    _check_tail(beta, lam_used * R)
    mult = multiplicities(domain, nmax)
    inside = (beta >= a1) & (beta < a2)
    branches = tuple(DtnBranch(int(i), int(mult[i]), float(beta[i])) for i in np.flatnonzero(inside))
    return DtnWindowResult(branches, lam_used, nmax, tuple(notes))


def _check_tail(beta: np.ndarray, x: float):
    start = int(math.floor(x + 5)) + 1
    tail = beta[start:]
    if tail.size and (np.any(tail <= 0) or np.any(np.diff(tail) <= 0)):
        raise nm.RootScanError(f"DtN tail is not positive and increasing beyond index {start}")


def dtn_all_branches(domain: ModelDomain, lam: float, a_max: float) -> tuple[np.ndarray, np.ndarray, float]:
    """``(beta, multiplicity, lambda_used)`` for every branch with ``beta < a_max``.

    Poles are stepped off as in :func:`dtn_spectrum_window`.
    """
    res = dtn_spectrum_window(domain, lam, -math.inf, a_max)
    beta = np.array([b.beta for b in res.branches])
    mult = np.array([b.multiplicity for b in res.branches], dtype=int)
    return beta, mult, res.lam


# ---------------------------------------------------------------------------
# 1D Robin problem on [0, L]
# ---------------------------------------------------------------------------
#
# With y = kL/2 and b = aL/(2h), even modes cos(k(x - L/2)) need
# y sin y + b cos y = 0 and odd modes sin(k(x - L/2)) need
# y cos y - b sin y = 0.  Each has exactly one root in every bracket
# [m pi - pi/2, m pi + pi/2] (even, m >= 1) and [m pi, (m+1) pi] (odd, m >= 1);
# the first brackets hold a root only when b < 0 (even) or b < 1 (odd).
# Trapped modes cosh/sinh exist for b > 0 (even) and b > 1 (odd).

def _even(y, b):
    return y * np.sin(y) + b * np.cos(y)


def _odd(y, b):
    return y * np.cos(y) - b * np.sin(y)


@dataclass(frozen=True)
class RobinSpectrum1D:
    """Eigenvalues ``mu`` of ``-h^2 u''`` on ``[0, L]`` below a cap, sorted."""

    a: float
    h: float
    L: float
    roots: np.ndarray
    trapped_count: int

    def count_below(self, tau: float) -> int:
        return int(np.searchsorted(self.roots, tau, side="left"))


def _oscillatory_brackets(b: float, y_max: float):
    """Brackets ``(lo, hi, parity)`` with ``lo < y_max`` in increasing order."""
    out = []
    if b < 0:
        out.append((0.0, 0.5 * math.pi, "even"))
    if b < 1:
        out.append((0.0, math.pi, "odd"))
    m = 1
    while True:
        lo_e = m * math.pi - 0.5 * math.pi
        lo_o = m * math.pi
        if lo_e >= y_max:
            break
        out.append((lo_e, lo_e + math.pi, "even"))
        if lo_o < y_max:
            out.append((lo_o, lo_o + math.pi, "odd"))
        m += 1
    return out


def _root_below(f, lo: float, hi: float, y_max: float, b: float) -> bool:
    if hi <= y_max:
        return True
    f_lo = f(lo, b) if lo > 0 else _first_sign(f, b)
    f_cap = f(y_max, b)
    return f_lo * f_cap < 0


def _first_sign(f, b: float) -> float:
    # sign just right of y = 0, taken from the leading Taylor terms
    if f is _even:
        return b if b != 0 else 1.0
    return 1.0 - b if b != 1 else 1.0


def _solve(f, lo: float, hi: float, b: float) -> float:
    lo_eff = lo
    if lo <= 0:
        # the first root can sit arbitrarily close to 0 (it scales like
        # sqrt(|b|) or sqrt(1 - b)); walk the left end down until it brackets
        f_hi = f(hi, b)
        lo_eff = 1e-12 * hi
        while f(lo_eff, b) * f_hi > 0 and lo_eff > 1e-300:
            # the previous left end has the sign of f(hi): keep the bracket tight
            hi, lo_eff = lo_eff, lo_eff * 1e-8
        if f(lo_eff, b) * f_hi >= 0:
            return lo_eff
    if f(lo_eff, b) == 0:
        return lo_eff
    return brentq(f, lo_eff, hi, args=(b,), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)


def _trapped_1d(b: float) -> list[float]:
    """Values ``z = kappa L / 2`` of trapped modes, ``mu = -h^2 (2 z / L)^2``."""
    out = []
    if b > 0:
        # z tanh z = b
        hi = max(b, 1.0) + 1.0
        out.append(brentq(lambda z: z * math.tanh(z) - b, 0.0, hi, xtol=1e-15))
    if b > 1:
        # z / tanh z = b; z = b is a valid upper bracket
        out.append(brentq(lambda z: z - b * math.tanh(z), 1e-12, b + 1.0, xtol=1e-15))
    return out


def robin_1d_spectrum(a: float, h: float, L: float, tau_max: float) -> RobinSpectrum1D:
    """All eigenvalues ``mu < tau_max`` of the 1D Robin problem."""
    if not (h > 0 and L > 0):
        raise ValueError("h and L must be positive")
    b = a * L / (2 * h)
    mus = [-(h * 2 * z / L) ** 2 for z in _trapped_1d(b)]
    trapped = len(mus)
    if (a == 0 or b == 1) and tau_max > 0:
        mus.append(0.0)
    if tau_max > 0:
        y_max = math.sqrt(tau_max) * L / (2 * h)
        for lo, hi, parity in _oscillatory_brackets(b, y_max):
            f = _even if parity == "even" else _odd
            if not _root_below(f, lo, hi, y_max, b):
                continue
            y = _solve(f, lo, hi, b)
            mu = (h * 2 * y / L) ** 2
            if mu < tau_max:
                mus.append(mu)
    roots = np.sort(np.array([m for m in mus if m < tau_max], dtype=float))
    return RobinSpectrum1D(a, h, L, roots, trapped)


def robin_1d_count(a: float, h: float, L: float, tau: float) -> int:
    """Number of 1D Robin eigenvalues strictly below ``tau``.

    The bracket structure decides membership from signs alone, so no root
    refinement enters the count.
    """
    if not (h > 0 and L > 0):
        raise ValueError("h and L must be positive")
    b = a * L / (2 * h)
    total = sum(1 for z in _trapped_1d(b) if -(h * 2 * z / L) ** 2 < tau)
    if tau <= 0:
        return total
    if a == 0 or b == 1:
        total += 1
    y_max = math.sqrt(tau) * L / (2 * h)
    for lo, hi, parity in _oscillatory_brackets(b, y_max):
        f = _even if parity == "even" else _odd
        total += _root_below(f, lo, hi, y_max, b)
    return total


def _lowest_1d(a: float, h: float, L: float) -> float:
    # lower bound for the 1D spectrum: the deepest trapped mode, else 0
    z = _trapped_1d(a * L / (2 * h))
    return -(h * 2 * max(z) / L) ** 2 if z else 0.0


def robin_count_rectangle(a: float, h: float, L1: float, L2: float) -> int:
    """``#{mu1 + mu2 < 1}`` over products of 1D Robin modes."""
    if not (h > 0 and L1 > 0 and L2 > 0):
        raise ValueError("positive parameters required")
    s1 = robin_1d_spectrum(a, h, L1, 1.0 - _lowest_1d(a, h, L2)).roots
    s2 = robin_1d_spectrum(a, h, L2, 1.0 - _lowest_1d(a, h, L1)).roots
    return int(np.searchsorted(s2, 1.0 - s1, side="left").sum())


# ---------------------------------------------------------------------------
# Disk and ball Robin counts
# ---------------------------------------------------------------------------

def _grid(X: float) -> np.ndarray:
    m = max(int(math.ceil(X / GRID_STEP)), 16)
    return X * np.arange(1, m + 1) / m


def _robin_branch_counts(X: float, c: float, nmax: int, spherical: bool) -> np.ndarray:
    """Roots of ``x f_n'(x) - c f_n(x)`` in ``(0, X)`` for each index ``n``.

    ``f_n`` is ``J_n`` or ``j_n``.  The sign is ``sign(f_n) * sign(g_n - c)``
    with ``g_n = x f_n'/f_n``; near ``x = 0`` ``g_n -> n`` from below.
    """
    x = _grid(X)
    if spherical:
        g = nm.spherical_bessel_j_log_derivative_grid(nmax, x)
        s = nm.spherical_bessel_j_signs(nmax, x)
    else:
        g = nm.bessel_j_log_derivative_grid(nmax, x)
        s = nm.bessel_j_signs(nmax, x)
    with np.errstate(invalid="ignore"):
        sign = s * np.sign(g - c)
    n = np.arange(nmax + 1)
    first = np.where(c < n, 1.0, -1.0)[:, None]
    sign = np.concatenate([first, sign], axis=1)
    counts = np.empty(nmax + 1, dtype=int)
    for i in range(nmax + 1):
        row = sign[i][sign[i] != 0]
        counts[i] = int(np.count_nonzero(row[1:] != row[:-1]))
    return counts


def _robin_index_cutoff(X: float, a: float) -> int:
    # past n = X every branch has beta > 0, and past X sqrt(1 + a^2) beta > a
    if a <= 0:
        return int(math.ceil(X)) + 20
    return int(math.ceil(X * math.sqrt(1.0 + a * a))) + 20


@dataclass(frozen=True)
class TrappedMode:
    index: int
    kappa: float


def trapped_modes(domain: ModelDomain, a: float, h: float) -> list[TrappedMode]:
    """Trapped modes ``x I_n'(x)/I_n(x) = aR/h`` with ``x = kappa R``.

    The left side increases from ``n`` to infinity, so each index
    ``n <= aR/h`` has exactly one root; equality is the harmonic ``r^n``.
    """
    _require(domain, Kind.DISK, Kind.BALL)
    if a < 0:
        return []
    R = domain.radius
    c = a * R / h
    ratio = nm.bessel_i_log_derivative_ratio if domain.kind is Kind.DISK else nm.modified_spherical_log_derivative_ratio
    out = []
    for n in range(int(math.floor(c)) + 1):
        if c == n:
            out.append(TrappedMode(n, 0.0))
            continue

        def f(x, n=n):
            return x * ratio(n, x) - c

        hi = max(c, 1.0)
        while f(hi) <= 0:
            hi *= 2.0
        x = brentq(f, min(1e-8, hi / 2), hi, xtol=1e-14)
        out.append(TrappedMode(n, x / R))
    return out


def robin_branch_counts(domain: ModelDomain, a: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-index Robin counts (oscillatory + trapped) and multiplicities."""
    _require(domain, Kind.DISK, Kind.BALL)
    if not h > 0:
        raise ValueError("h must be positive")
    R = domain.radius
    X = R / h
    c = a * R / h
    nmax = _robin_index_cutoff(X, a)
    osc = _robin_branch_counts(X, c, nmax, domain.kind is Kind.BALL)
    # x I_n'/I_n - c runs from n - c to +inf monotonically: one root iff c >= n
    trapped = (np.arange(nmax + 1) <= c).astype(int)
    if np.any(osc[-5:] + trapped[-5:]):
        raise nm.RootScanError("Robin branch cutoff too small")
    return osc + trapped, multiplicities(domain, nmax)


def robin_count_disk(a: float, h: float, R: float = 1.0) -> int:
    counts, mult = robin_branch_counts(ModelDomain.disk(R), a, h)
    return int(np.dot(counts, mult))


def robin_count_ball(a: float, h: float, R: float = 1.0) -> int:
    counts, mult = robin_branch_counts(ModelDomain.ball(R), a, h)
    return int(np.dot(counts, mult))


# ---------------------------------------------------------------------------
# Dirichlet counts and the hemisphere
# ---------------------------------------------------------------------------

def dirichlet_branch_counts(domain: ModelDomain, k_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Number of zeros of ``J_n(kR)`` (or ``j_n``) with ``0 < k < k_max``, per index."""
    _require(domain, Kind.DISK, Kind.BALL)
    X = k_max * domain.radius
    nmax = int(math.ceil(X)) + 2
    x = _grid(X)
    if domain.kind is Kind.DISK:
        s = nm.bessel_j_signs(nmax, x)
    else:
        s = nm.spherical_bessel_j_signs(nmax, x)
    counts = np.array([np.count_nonzero(np.diff(row[row != 0]) != 0) for row in s])
    return counts, multiplicities(domain, nmax)


def dirichlet_count(domain: ModelDomain, h: float) -> int:
    """Dirichlet eigenvalues ``k^2`` of ``-Lap`` with ``k < 1/h``."""
    if domain.kind is Kind.RECTANGLE:
        L1, L2 = domain.size
        m1 = np.arange(1, int(L1 / (math.pi * h)) + 2)
        m2 = np.arange(1, int(L2 / (math.pi * h)) + 2)
        e = (math.pi * m1[:, None] / L1) ** 2 + (math.pi * m2[None, :] / L2) ** 2
        return int(np.count_nonzero(e < 1.0 / h**2))
    counts, mult = dirichlet_branch_counts(domain, 1.0 / h)
    return int(np.dot(counts, mult))


def robin_count_domain(domain: ModelDomain, a: float, h: float) -> int:
    """``N_h^-(a)`` for a disk, ball or rectangle."""
    if domain.kind is Kind.DISK:
        return robin_count_disk(a, h, domain.radius)
    if domain.kind is Kind.BALL:
        return robin_count_ball(a, h, domain.radius)
    if domain.kind is Kind.RECTANGLE:
        return robin_count_rectangle(a, h, *domain.size)
    raise UnsupportedDomainError(f"no Robin count for {domain.kind.value}")


def hemisphere_zero_mode_multiplicity(n: int) -> int:
    """Harmonics ``Y_n^m`` with ``n + m`` even, i.e. zero Neumann data on the equator."""
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return int(n) + 1
