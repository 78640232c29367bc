"""Counting functions for DtN and Robin spectra on model domains.

All windows are half-open, ``a1 <= beta < a2``.  Integer identities are
checked exactly; asymptotic statements are compared against kappa with
explicit tolerances by the callers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import numerics as nm
from .domains import (
    Kind,
    ModelDomain,
    UnsupportedDomainError,
    dirichlet_count,
    dtn_all_branches,
    dtn_spectrum_window,
    robin_branch_counts,
    robin_count_domain,
)
from .kappa import cayley_a_to_theta, cayley_theta_to_a, kappa, kappa_tilde, unit_ball_volume

ROBIN_AVERAGE_SAMPLES = 101
ROBIN_AVERAGE_HALF_WIDTH = 0.05
DIRICHLET_PROXY = -1e6


class IdentityViolation(AssertionError):
    """An exact integer identity failed; carries the per-branch report."""

    def __init__(self, message: str, details):
        super().__init__(message)
        self.details = details


class MonotonicityError(AssertionError):
    def __init__(self, message: str, triple):
        super().__init__(message)
        self.triple = triple


def thread_count() -> int:
    raw = os.environ.get("DTNLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DTNLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn: Callable, items: Iterable) -> list:
    """``list(map(fn, items))``, threaded up to ``DTNLAB_THREADS``; order kept."""
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Windows and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralWindow:
    """Half-open window ``[a1, a2)`` with Cayley angles ``theta1 < theta2``."""

    a1: float
    a2: float

    def __post_init__(self):
        if math.isnan(self.a1) or math.isnan(self.a2):
            raise ValueError("window endpoints must not be NaN")
        if not self.a1 < self.a2:
            raise ValueError(f"window needs a1 < a2, got [{self.a1}, {self.a2})")

    @classmethod
    def from_theta(cls, theta1: float, theta2: float) -> "SpectralWindow":
        if not 0.0 < theta1 < theta2 < 2 * math.pi:
            raise ValueError("need 0 < theta1 < theta2 < 2*pi")
        return cls(cayley_theta_to_a(theta1), cayley_theta_to_a(theta2))

    @property
    def theta1(self) -> float:
        return cayley_a_to_theta(self.a1)

    @property
    def theta2(self) -> float:
        return cayley_a_to_theta(self.a2)

    @property
    def finite(self) -> bool:
        return math.isfinite(self.a1) and math.isfinite(self.a2)


def _kappa_ext(a: float, d: int) -> float:
    return kappa(a, d)


def weyl_prediction(domain: ModelDomain, lam: float, window: SpectralWindow) -> float:
    """``(kappa(a2) - kappa(a1)) * vol'(dM) * lambda^(d-1)``."""
    d = domain.d
    return (_kappa_ext(window.a2, d) - _kappa_ext(window.a1, d)) * domain.vol_boundary * lam ** (d - 1)


@dataclass(frozen=True)
class CountReport:
    lam: float
    domain: ModelDomain
    window: SpectralWindow
    count: int
    weyl_prediction: float
    rel_discrepancy: float
    pole_warnings: tuple[str, ...] = ()


def count_dtn(domain: ModelDomain, lam: float, window: SpectralWindow) -> CountReport:
    """``N(lambda; a1, a2)``, the number of DtN eigenvalues in the window."""
    if not window.finite:
        raise ValueError("count_dtn needs a finite window")
    res = dtn_spectrum_window(domain, lam, window.a1, window.a2)
    pred = weyl_prediction(domain, lam, window)
    rel = (res.count - pred) / pred if pred else math.inf
    return CountReport(lam, domain, window, res.count, pred, rel, res.pole_warnings)


def count_cayley(domain: ModelDomain, lam: float, theta1: float, theta2: float) -> CountReport:
    """``N~(lambda; theta1, theta2)``: Cayley angles in ``[theta1, theta2)``."""
    return count_dtn(domain, lam, SpectralWindow.from_theta(theta1, theta2))


def robin_count(domain: ModelDomain, a: float, h: float) -> int:
    """``N_h^-(a)``: negative eigenvalues of ``-h^2 Lap - 1`` with Robin data ``a``."""
    return robin_count_domain(domain, a, h)


# ---------------------------------------------------------------------------
# Birman-Schwinger identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchDiscrepancy:
    index: int
    dtn: int
    robin: int


@dataclass(frozen=True)
class BirmanSchwingerResult:
    lhs: int
    rhs: int
    lam: float
    discrepancies: tuple[BranchDiscrepancy, ...] = ()
    pole_warnings: tuple[str, ...] = ()

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs


def birman_schwinger_check(
    domain: ModelDomain, lam: float, window: SpectralWindow, *, strict: bool = False
) -> BirmanSchwingerResult:
    """Compare ``N(lambda; a1, a2)`` with ``N_h^-(a2) - N_h^-(a1)`` at ``h = 1/lambda``.

    The two sides come from different computations: DtN values at a single
    point ``lambda R`` versus sign scans of the Robin secular functions over
    ``(0, R/h)``.  Mismatches are broken down by angular index.
    """
    if domain.kind not in (Kind.DISK, Kind.BALL):
        raise UnsupportedDomainError(f"no DtN spectrum implemented for {domain.kind.value}")
    if not window.finite:
        raise ValueError("identity check needs a finite window")
    res = dtn_spectrum_window(domain, lam, window.a1, window.a2)
    h = 1.0 / res.lam
    hi, mult_hi = robin_branch_counts(domain, window.a2, h)
    lo, mult_lo = robin_branch_counts(domain, window.a1, h)
    size = max(hi.size, lo.size, res.n_max + 1)
    per_robin = np.zeros(size, dtype=int)
    per_robin[: hi.size] += hi
    per_robin[: lo.size] -= lo
    per_dtn = np.zeros(size, dtype=int)
    for b in res.branches:
        per_dtn[b.index] += 1
    mult = (np.where(np.arange(size) == 0, 1, 2) if domain.kind is Kind.DISK
            else 2 * np.arange(size) + 1)
    lhs = int(np.dot(per_dtn, mult))
    rhs = int(np.dot(per_robin, mult))
    bad = tuple(
        BranchDiscrepancy(int(i), int(per_dtn[i]), int(per_robin[i]))
        for i in np.flatnonzero(per_dtn != per_robin)
    )
    out = BirmanSchwingerResult(lhs, rhs, res.lam, bad, res.pole_warnings)
    if strict and not out.equal:
        raise IdentityViolation(f"lhs={lhs} rhs={rhs} at lambda={res.lam}", out)
    return out


# ---------------------------------------------------------------------------
# Branch flow in lambda
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BranchSegment:
    lam: np.ndarray
    beta: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return np.pi + 2.0 * np.arctan(self.beta)


def branch_flow(domain: ModelDomain, index: int, lam_grid: Sequence[float]) -> list[BranchSegment]:
    """Sample one branch on a grid, split at Dirichlet poles.

    Poles are located from sign changes of ``J_n(lambda R)`` (``j_l`` on the
    ball) between consecutive samples, independently of the sampled values,
    so a non-monotone sample is reported instead of mistaken for a pole.

    Raises
    ------
    MonotonicityError
        With ``(lambda_i, beta_i, beta_{i+1})`` when a segment fails to
        decrease strictly.
    """
    if domain.kind not in (Kind.DISK, Kind.BALL):
        raise UnsupportedDomainError(f"no DtN branches for {domain.kind.value}")
    lam = np.asarray(lam_grid, dtype=float)
    if lam.ndim != 1 or lam.size < 2 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda grid must be positive and strictly increasing")
    x = lam * domain.radius
    if domain.kind is Kind.DISK:
        sign = nm.bessel_j_signs(index, x)[index]
        beta = np.array([nm.bessel_j_log_derivative_ratio(index, xi) for xi in x], dtype=float)
    else:
        sign = nm.spherical_bessel_j_signs(index, x)[index]
        beta = np.array([nm.spherical_bessel_j_log_derivative_ratio(index, xi) for xi in x], dtype=float)
    usable = ~np.isnan(beta) & (sign != 0)
    segments, current = [], []
    prev_sign = None
    for i in np.flatnonzero(usable):
        if prev_sign is not None and sign[i] != prev_sign and current:
            segments.append(current)
            current = []
        current.append(i)
        prev_sign = sign[i]
    if current:
        segments.append(current)
    out = []
    for seg in segments:
        b = beta[seg]
        bad = np.flatnonzero(np.diff(b) >= 0)
        if bad.size:
            k = seg[bad[0]]
            triple = (float(lam[k]), float(beta[k]), float(beta[seg[bad[0] + 1]]))
            raise MonotonicityError(f"branch {index} not decreasing near lambda={lam[k]}", triple)
        out.append(BranchSegment(lam[seg], b))
    return out


# ---------------------------------------------------------------------------
# Weyl fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeylFit:
    """Log-log least squares of ``N(lambda)``.

    ``coefficient`` is fitted with the power pinned at ``d - 1``;
    ``coefficient_free`` is the intercept of the free fit.
    """

    lams: tuple[float, ...]
    counts: tuple[int, ...]
    power: float
    coefficient_free: float
    coefficient: float
    reference_power: int
    reference_coefficient: float

    @property
    def discrepancies(self) -> tuple[float, ...]:
        """``|N / lambda^(d-1) - reference|`` along the ladder."""
        p = self.reference_power
        return tuple(abs(n / l**p - self.reference_coefficient) for l, n in zip(self.lams, self.counts))


def weyl_fit(domain: ModelDomain, window: SpectralWindow, lams: Sequence[float]) -> WeylFit:
    lams = [float(l) for l in lams]
    if len(lams) < 3 or max(lams) / min(lams) < 4:
        raise ValueError("need at least 3 lambda values spanning a factor >= 4")
    counts = parallel_map(lambda l: count_dtn(domain, l, window).count, lams)
    if min(counts) <= 0:
        raise ValueError("nonpositive count in Weyl fit")
    d = domain.d
    lx = np.log(lams)
    ly = np.log(counts)
    power, intercept = np.polyfit(lx, ly, 1)
    pinned = float(np.exp(np.mean(ly - (d - 1) * lx)))
    ref = (kappa(window.a2, d) - kappa(window.a1, d)) * domain.vol_boundary
    return WeylFit(tuple(lams), tuple(int(c) for c in counts), float(power),
                   float(np.exp(intercept)), pinned, d - 1, ref)


def bulk_term(domain: ModelDomain, h: float) -> float:
    """``(2 pi h)^(-d) omega_d vol(M)``."""
    d = domain.d
    return unit_ball_volume(d) * domain.vol / (2 * math.pi * h) ** d


@dataclass(frozen=True)
class RobinSecondTerm:
    a: float
    lam: float
    samples: np.ndarray
    values: np.ndarray
    reference: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def rel_error(self) -> float:
        return (self.mean - self.reference) / abs(self.reference)


def robin_second_term(
    domain: ModelDomain,
    a: float,
    lam: float,
    *,
    samples: int = ROBIN_AVERAGE_SAMPLES,
    half_width: float = ROBIN_AVERAGE_HALF_WIDTH,
) -> RobinSecondTerm:
    """Window average of ``(N_h^-(a) - bulk) h^(d-1)`` over ``lambda (1 +- half_width)``.

    Lattice counts oscillate at the scale of the second term, so single
    values of ``lambda`` are not meaningful; the average is compared with
    ``kappa(a) vol'(dM)``.
    """
    if samples < 1 or not 0 <= half_width < 1:
        raise ValueError("bad averaging window")
    grid = lam * np.linspace(1 - half_width, 1 + half_width, samples)
    d = domain.d

    def one(l):
        h = 1.0 / l
        return (robin_count(domain, a, h) - bulk_term(domain, h)) * h ** (d - 1)

    vals = np.array(parallel_map(one, grid))
    return RobinSecondTerm(a, lam, grid, vals, kappa(a, d) * domain.vol_boundary)


# ---------------------------------------------------------------------------
# Limiting measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureHistogram:
    edges: np.ndarray
    masses: np.ndarray
    reference: np.ndarray
    lam: float

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])


def cayley_angles(domain: ModelDomain, lam: float, theta_max: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Angles ``theta < theta_max`` of all DtN eigenvalues, with multiplicities."""
    beta, mult, lam_used = dtn_all_branches(domain, lam, cayley_theta_to_a(theta_max))
    return np.pi + 2.0 * np.arctan(beta), mult, lam_used


def limiting_measure_histogram(
    domain: ModelDomain,
    lam: float,
    bins: int = 32,
    theta_lo: float = 0.3,
    theta_hi: float = 2 * math.pi - 0.3,
) -> MeasureHistogram:
    """Histogram of ``(2 pi h)^(d-1) sum delta_theta`` against its kappa reference.

    The reference mass of a bin is
    ``(2 pi)^(d-1) vol'(dM) (kappa~(hi) - kappa~(lo))``.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    if not 0 < theta_lo < theta_hi < 2 * math.pi:
        raise ValueError("need 0 < theta_lo < theta_hi < 2*pi")
    d = domain.d
    theta, mult, lam_used = cayley_angles(domain, lam, theta_hi)
    edges = np.linspace(theta_lo, theta_hi, bins + 1)
    counts, _ = np.histogram(theta, bins=edges, weights=mult)
    # np.histogram closes the last bin; keep every bin half-open
    counts[-1] -= int(np.sum(mult[theta == theta_hi]))
    h = 1.0 / lam_used
    masses = counts * (2 * math.pi * h) ** (d - 1)
    kt = np.array([kappa_tilde(t, d) for t in edges])
    reference = (2 * math.pi) ** (d - 1) * domain.vol_boundary * np.diff(kt)
    return MeasureHistogram(edges, masses, reference, lam_used)


# ---------------------------------------------------------------------------
# Dirichlet limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirichletLimit:
    h: float
    robin_at_proxy: int
    dirichlet_count: int
    near_threshold: bool = False

    @property
    def equal(self) -> bool:
        return self.robin_at_proxy == self.dirichlet_count


def dirichlet_limit_check(domain: ModelDomain, h: float, proxy: float = DIRICHLET_PROXY) -> DirichletLimit:
    """Robin count at a very negative ``a`` against the Dirichlet count."""
    if not h > 0:
        raise ValueError("h must be positive")
    robin = robin_count(domain, proxy, h)
    exact = dirichlet_count(domain, h)
    # a Dirichlet eigenvalue within 1e-6 of 1/h^2 makes the comparison fragile
    near = dirichlet_count(domain, h * (1 + 1e-6)) != dirichlet_count(domain, h * (1 - 1e-6))
    return DirichletLimit(h, robin, exact, near)
