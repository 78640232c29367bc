from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy import special

import oracles
from dtnlab import counting as ct
from dtnlab import domains as dm
from dtnlab import kappa as kp
from dtnlab import numerics as nm

PI = math.pi
DISK = dm.ModelDomain.disk(1.0)
BALL = dm.ModelDomain.ball(1.0)
SQUARE = dm.ModelDomain.rectangle(1.0, 1.0)


# --- windows ---------------------------------------------------------------------

def test_window_from_theta():
    w = ct.SpectralWindow.from_theta(PI / 2, 1.5 * PI)
    assert w.a1 == pytest.approx(-1.0, rel=1e-15) and w.a2 == pytest.approx(1.0, rel=1e-15)
    assert w.theta1 == pytest.approx(PI / 2) and w.theta2 == pytest.approx(1.5 * PI)
    assert ct.SpectralWindow(-math.inf, 0.0).theta1 == 0.0


@pytest.mark.parametrize("a1,a2", [(1.0, 1.0), (2.0, 1.0), (math.nan, 1.0)])
def test_window_rejects_degenerate(a1, a2):
    with pytest.raises(ValueError):
        ct.SpectralWindow(a1, a2)


@pytest.mark.parametrize("t1,t2", [(0.0, 1.0), (1.0, 1.0), (1.0, 2 * PI)])
def test_window_rejects_bad_angles(t1, t2):
    with pytest.raises(ValueError):
        ct.SpectralWindow.from_theta(t1, t2)


# --- DtN counts ------------------------------------------------------------------

def test_count_dtn_small():
    r = ct.count_dtn(DISK, 1.0, ct.SpectralWindow(-1.0, 1.0))
    assert r.count == 3
    assert r.weyl_prediction == pytest.approx((oracles.kappa_d2(1.0) - oracles.kappa_d2(-1.0)) * 2 * PI, rel=1e-10)


def test_count_dtn_weyl_scale():
    r = ct.count_dtn(DISK, 100.0, ct.SpectralWindow(-1.0, 1.0))
    ref = (oracles.kappa_d2(1.0) - oracles.kappa_d2(-1.0)) * 2 * PI
    assert r.count / 100.0 == pytest.approx(ref, rel=0.1)
    assert r.rel_discrepancy == pytest.approx((r.count - r.weyl_prediction) / r.weyl_prediction, rel=1e-12)


def test_count_dtn_needs_finite_window():
    with pytest.raises(ValueError):
        ct.count_dtn(DISK, 1.0, ct.SpectralWindow(-math.inf, 0.0))


def test_cayley_matches_dtn():
    assert ct.count_cayley(DISK, 1.0, PI / 2, 1.5 * PI).count == 3
    for lam in (7.3, 33.0):
        a = ct.count_cayley(DISK, lam, PI / 2, 1.5 * PI).count
        b = ct.count_dtn(DISK, lam, ct.SpectralWindow(-1.0, 1.0)).count
        assert a == b


def test_cayley_split_at_pi():
    for lam in (5.0, 41.7):
        whole = ct.count_cayley(DISK, lam, 1.0, 4.0).count
        left = ct.count_cayley(DISK, lam, 1.0, PI).count
        right = ct.count_cayley(DISK, lam, PI, 4.0).count
        assert whole == left + right


def test_window_additivity():
    for dom, lam in [(DISK, 23.4), (BALL, 9.1)]:
        ab = ct.count_dtn(dom, lam, ct.SpectralWindow(-3.0, 0.2)).count
        bc = ct.count_dtn(dom, lam, ct.SpectralWindow(0.2, 2.5)).count
        ac = ct.count_dtn(dom, lam, ct.SpectralWindow(-3.0, 2.5)).count
        assert ab + bc == ac


# --- Robin counts ----------------------------------------------------------------

def test_robin_count_examples():
    assert ct.robin_count(SQUARE, 0.0, 0.1) == oracles.neumann_rectangle_count(0.1, 1.0, 1.0)
    assert ct.robin_count(DISK, 0.0, 0.2) == oracles.disk_neumann_count(5.0)


@pytest.mark.parametrize("dom", [DISK, BALL, SQUARE])
def test_robin_count_monotone_in_a(dom):
    h = 0.06 if dom is not BALL else 0.1
    counts = [ct.robin_count(dom, a, h) for a in np.linspace(-6, 6, 25)]
    assert all(x <= y for x, y in zip(counts, counts[1:]))


def test_bulk_sanity():
    # at h = 0.05 the boundary term is still ~10% of the count, so the
    # leading-term ratio is checked at h = 0.005 and the two-term sum at 0.05
    h = 0.005
    ratio = ct.robin_count(DISK, 0.0, h) * (2 * PI * h) ** 2 / (kp.unit_ball_volume(2) * PI)
    assert ratio == pytest.approx(1.0, abs=0.05)
    h = 0.05
    two_term = ct.bulk_term(DISK, h) + kp.kappa(0.0, 2) * DISK.vol_boundary / h
    assert ct.robin_count(DISK, 0.0, h) == pytest.approx(two_term, rel=0.05)
    assert ct.bulk_term(DISK, h) == pytest.approx(PI * PI / (2 * PI * h) ** 2, rel=1e-14)


# --- Birman-Schwinger ------------------------------------------------------------

@pytest.mark.parametrize("lam,a1,a2", [(1.0, -1.0, 1.0), (40.3, -1.0, 1.0), (12.5, -4.0, 0.0), (27.1, 0.5, 6.0)])
def test_birman_schwinger_disk(lam, a1, a2):
    res = ct.birman_schwinger_check(DISK, lam, ct.SpectralWindow(a1, a2), strict=True)
    assert res.equal and not res.discrepancies


def test_birman_schwinger_small_case_value():
    res = ct.birman_schwinger_check(DISK, 1.0, ct.SpectralWindow(-1.0, 1.0))
    assert (res.lhs, res.rhs) == (3, 3)


@pytest.mark.parametrize("lam,a1,a2", [(3.3, -1.0, 1.0), (17.0, -2.0, 3.0)])
def test_birman_schwinger_ball(lam, a1, a2):
    assert ct.birman_schwinger_check(BALL, lam, ct.SpectralWindow(a1, a2), strict=True).equal


def test_birman_schwinger_at_pole():
    j = float(special.jn_zeros(2, 3)[-1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", dm.DirichletPoleWarning)
        res = ct.birman_schwinger_check(DISK, j, ct.SpectralWindow(-1.0, 1.0), strict=True)
    assert res.equal and res.pole_warnings and res.lam != j


def test_birman_schwinger_rejects_rectangle():
    with pytest.raises(dm.UnsupportedDomainError):
        ct.birman_schwinger_check(SQUARE, 10.0, ct.SpectralWindow(-1.0, 1.0))


def test_birman_schwinger_reports_branch(monkeypatch):
    real = ct.robin_branch_counts

    def shifted(domain, a, h):
        counts, mult = real(domain, a, h)
        if a > 0:
            counts = counts.copy()
            counts[3] += 1
        return counts, mult

    monkeypatch.setattr(ct, "robin_branch_counts", shifted)
    res = ct.birman_schwinger_check(DISK, 20.0, ct.SpectralWindow(-1.0, 1.0))
    assert not res.equal and res.rhs == res.lhs + 2
    assert [d.index for d in res.discrepancies] == [3]
    with pytest.raises(ct.IdentityViolation) as info:
        ct.birman_schwinger_check(DISK, 20.0, ct.SpectralWindow(-1.0, 1.0), strict=True)
    assert info.value.details.discrepancies[0].robin == info.value.details.discrepancies[0].dtn + 1


# --- branch flow -----------------------------------------------------------------

def test_branch_flow_disk_n0():
    segs = ct.branch_flow(DISK, 0, np.linspace(0.5, 2.3, 100))
    assert len(segs) == 1 and np.all(np.diff(segs[0].beta) < 0)
    assert np.all(np.diff(segs[0].theta) < 0)


def test_branch_flow_through_pole():
    j01 = float(special.jn_zeros(0, 1)[0])
    segs = ct.branch_flow(DISK, 0, np.linspace(2.0, 3.0, 101))
    assert len(segs) == 2
    assert segs[0].lam[-1] < j01 < segs[1].lam[0]
    assert segs[0].beta[-1] < -5 and segs[1].beta[0] > 5


def test_branch_flow_ball_closed_form():
    lam = np.linspace(1.0, 3.0, 200)
    segs = ct.branch_flow(BALL, 0, lam)
    assert len(segs) == 1
    beta = segs[0].beta
    assert beta == pytest.approx(1 / np.tan(lam) - 1 / lam, rel=1e-12)
    # derivative -csc^2 + 1/lambda^2 < 0
    assert np.all(-1 / np.sin(lam) ** 2 + 1 / lam**2 < 0)
    assert np.all(np.diff(beta) < 0)


def test_branch_flow_reports_violation(monkeypatch):
    real = nm.bessel_j_log_derivative_ratio

    def bumped(n, x):
        v = real(n, x)
        return v + 1.0 if abs(x - 1.0) < 0.02 else v

    monkeypatch.setattr(nm, "bessel_j_log_derivative_ratio", bumped)
    with pytest.raises(ct.MonotonicityError) as info:
        ct.branch_flow(DISK, 0, np.linspace(0.5, 2.0, 76))
    lam, b0, b1 = info.value.triple
    assert b1 >= b0 and 0.9 < lam < 1.1


def test_branch_flow_validation():
    with pytest.raises(ValueError):
        ct.branch_flow(DISK, 0, [1.0, 0.5])
    with pytest.raises(dm.UnsupportedDomainError):
        ct.branch_flow(SQUARE, 0, [1.0, 2.0])


# --- Weyl fits -------------------------------------------------------------------

def test_weyl_fit_disk_trend():
    fit = ct.weyl_fit(DISK, ct.SpectralWindow(-1.0, 1.0), [50.0, 100.0, 200.0])
    assert fit.power == pytest.approx(1.0, abs=0.1)
    disc = fit.discrepancies
    assert all(x >= y for x, y in zip(disc, disc[1:])) and disc[0] > disc[-1]


def test_weyl_fit_validation():
    with pytest.raises(ValueError):
        ct.weyl_fit(DISK, ct.SpectralWindow(-1.0, 1.0), [10.0, 20.0])
    with pytest.raises(ValueError):
        ct.weyl_fit(DISK, ct.SpectralWindow(-1.0, 1.0), [10.0, 20.0, 30.0])


def test_weyl_fit_rejects_empty_counts(monkeypatch):
    real = ct.count_dtn

    def empty(domain, lam, window):
        return ct.CountReport(lam, domain, window, 0, 1.0, -1.0) if lam < 2 else real(domain, lam, window)

    monkeypatch.setattr(ct, "count_dtn", empty)
    with pytest.raises(ValueError):
        ct.weyl_fit(DISK, ct.SpectralWindow(-1.0, 1.0), [1.0, 2.0, 4.0])


# --- measure histogram -----------------------------------------------------------

def test_histogram_total_in_middle():
    hist = ct.limiting_measure_histogram(DISK, 100.0, bins=8, theta_lo=PI / 2, theta_hi=1.5 * PI)
    ref = 2 * PI * DISK.vol_boundary * (oracles.kappa_d2(1.0) - oracles.kappa_d2(-1.0))
    assert hist.masses.sum() == pytest.approx(ref, rel=0.1)
    assert hist.reference.sum() == pytest.approx(ref, rel=1e-10)
    assert np.all(hist.masses >= 0) and np.all(hist.reference > 0)


def test_histogram_near_zero_angle_ball():
    masses = []
    for lam in (20.0, 40.0):
        hist = ct.limiting_measure_histogram(BALL, lam, bins=1, theta_lo=0.1, theta_hi=0.2)
        masses.append(hist.masses[0])
    full = ct.limiting_measure_histogram(BALL, 40.0, bins=1, theta_lo=0.1, theta_hi=2 * PI - 0.1).masses[0]
    assert masses[1] <= masses[0] and masses[1] < 1e-3 * full


def test_histogram_accumulates_near_two_pi():
    hist = ct.limiting_measure_histogram(DISK, 60.0, bins=16, theta_lo=PI, theta_hi=2 * PI - 0.3)
    assert np.all(np.diff(hist.reference) > 0)
    assert hist.masses[-1] > hist.masses[0]


def test_histogram_validation():
    with pytest.raises(ValueError):
        ct.limiting_measure_histogram(DISK, 10.0, bins=0)
    with pytest.raises(ValueError):
        ct.limiting_measure_histogram(DISK, 10.0, theta_lo=0.0)


# --- Dirichlet limit -------------------------------------------------------------

@pytest.mark.parametrize("dom,h", [(DISK, 0.35), (DISK, 0.2), (SQUARE, 0.3), (SQUARE, 0.15)])
def test_dirichlet_limit(dom, h):
    res = ct.dirichlet_limit_check(dom, h)
    assert res.equal and not res.near_threshold


def test_dirichlet_limit_rectangle_lattice():
    assert ct.dirichlet_limit_check(SQUARE, 0.3).dirichlet_count == oracles.dirichlet_rectangle_count(0.3, 1, 1)
    assert ct.dirichlet_limit_check(DISK, 0.35).dirichlet_count == oracles.disk_dirichlet_count(1 / 0.35)


@pytest.mark.parametrize("dom", [DISK, SQUARE])
def test_dirichlet_monotone_approach(dom):
    h = 0.07
    counts = [ct.robin_count(dom, a, h) for a in (-1e2, -1e4, -1e6)]
    assert counts[0] >= counts[1] >= counts[2]
    assert counts[2] == dm.dirichlet_count(dom, h)


# --- hemisphere ------------------------------------------------------------------

def test_hemisphere_growth_linear():
    m = [dm.hemisphere_zero_mode_multiplicity(n) for n in range(1, 51)]
    assert np.all(np.diff(m) == 1)


# --- threads ---------------------------------------------------------------------

def test_parallel_map_deterministic(monkeypatch):
    monkeypatch.setenv("DTNLAB_THREADS", "4")
    out = ct.parallel_map(lambda l: ct.count_dtn(DISK, l, ct.SpectralWindow(-1, 1)).count, [5.0, 10.0, 20.0, 40.0])
    monkeypatch.setenv("DTNLAB_THREADS", "1")
    ref = ct.parallel_map(lambda l: ct.count_dtn(DISK, l, ct.SpectralWindow(-1, 1)).count, [5.0, 10.0, 20.0, 40.0])
    assert out == ref


def test_thread_count_validation(monkeypatch):
    monkeypatch.setenv("DTNLAB_THREADS", "many")
    with pytest.raises(ValueError):
        ct.thread_count()
