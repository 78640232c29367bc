from __future__ import annotations

import math

import numpy as np
import pytest

import oracles
from dtnlab import kappa as kp

PI = math.pi


# --- Cayley map ------------------------------------------------------------------

def test_cayley_examples():
    assert kp.cayley_a_to_theta(0.0) == pytest.approx(PI, abs=1e-15)
    assert kp.cayley_a_to_theta(1.0) == pytest.approx(1.5 * PI, rel=1e-15)
    assert kp.cayley_a_to_theta(-1.0) == pytest.approx(0.5 * PI, rel=1e-15)
    assert kp.cayley_a_to_theta(-math.inf) == 0.0
    assert kp.cayley_theta_to_a(PI) == 0.0
    assert kp.cayley_theta_to_a(2 * PI) == math.inf


def test_cayley_round_trip():
    for a in np.concatenate([np.linspace(-50, 50, 401), [-1e6, 1e6, 1e-9]]):
        assert kp.cayley_theta_to_a(kp.cayley_a_to_theta(a)) == pytest.approx(a, rel=1e-9, abs=1e-14)
    for t in np.linspace(0.01, 2 * PI - 0.01, 301):
        assert kp.cayley_a_to_theta(kp.cayley_theta_to_a(t)) == pytest.approx(t, rel=1e-14)


def test_cayley_point_limits():
    # very negative a approaches theta = 0 from above
    p = kp.CayleyPoint.from_a(-1e12)
    assert 0 < p.theta < 1e-11
    assert kp.CayleyPoint.from_a(-math.inf).theta == 0.0
    with pytest.raises(ValueError):
        kp.CayleyPoint.from_a(math.inf)
    with pytest.raises(ValueError):
        kp.CayleyPoint.from_theta(2 * PI)
    q = kp.CayleyPoint.from_theta(1.5 * PI)
    assert q.a == pytest.approx(1.0, rel=1e-15)


# --- values ----------------------------------------------------------------------

def test_neumann_value_d3():
    assert kp.kappa_quadrature(0.0, 3).value == pytest.approx(1 / (16 * PI), rel=1e-15)
    assert kp.kappa_closed_form_d3(0.0).value == pytest.approx(1 / (16 * PI), rel=1e-14)


def test_kappa_at_one_d3():
    want = (1 / (4 * PI)) * (1.25 + 1 / PI)
    assert kp.kappa_closed_form_d3(1.0).value == pytest.approx(want, rel=1e-14)
    assert kp.kappa_quadrature(1.0, 3).value == pytest.approx(want, rel=1e-11)


def test_dirichlet_endpoint_d3():
    assert kp.kappa_closed_form_d3(-math.inf).value == pytest.approx(-1 / (16 * PI), rel=1e-15)
    assert kp.kappa_quadrature(-math.inf, 3).value == pytest.approx(-1 / (16 * PI), rel=1e-15)
    assert kp.kappa_closed_form_d3(-1e8).value == pytest.approx(-1 / (16 * PI), rel=1e-7)


@pytest.mark.parametrize("a", [-40.0, -3.0, -0.2, 0.2, 3.0, 40.0])
def test_d2_against_oracle(a):
    assert kp.kappa_quadrature(a, 2).value == pytest.approx(oracles.kappa_d2(a), rel=1e-10, abs=1e-13)


@pytest.mark.parametrize("a", [-7.0, -1.0, -0.1, 0.1, 1.0, 7.0])
def test_d5_against_partial_fractions(a):
    assert kp.kappa_quadrature(a, 5).value == pytest.approx(oracles.kappa_d5(a), rel=1e-10)


def test_large_a_two_ways():
    assert kp.kappa_quadrature(10.0, 3).value == pytest.approx(kp.kappa_closed_form_d3(10.0).value, rel=1e-10)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_endpoint_difference(d):
    pref = kp.prefactor(d)
    assert kp.neumann_value(d) - kp.dirichlet_value(d) == pytest.approx(pref / 2, rel=1e-14)
    assert kp.kappa_quadrature(0.0, d).value == pytest.approx(pref / 4, rel=1e-14)


def test_prefactor():
    assert kp.prefactor(2) == pytest.approx(2 / (2 * PI), rel=1e-15)
    assert kp.prefactor(3) == pytest.approx(PI / (2 * PI) ** 2, rel=1e-15)
    assert kp.unit_ball_volume(3) == pytest.approx(4 * PI / 3, rel=1e-15)


# --- jump structure --------------------------------------------------------------

@pytest.mark.parametrize("d", [2, 3, 4])
def test_jump_decomposition(d):
    pref = kp.prefactor(d)
    plus = kp.kappa_jump_decomposition(1e-3, d)
    minus = kp.kappa_jump_decomposition(-1e-3, d)
    assert plus.integral_term == pytest.approx(-pref / 2, rel=2e-3)
    assert minus.integral_term == pytest.approx(pref / 2, rel=2e-3)
    assert minus.heaviside_term == 0.0
    assert plus.heaviside_term == pytest.approx(pref, rel=1e-5)
    assert plus.total == pytest.approx(minus.total, rel=1e-2)
    with pytest.raises(ValueError):
        kp.kappa_jump_decomposition(0.0, d)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_monotone_on_grid(d):
    grid = np.linspace(-50, 50, 201)
    vals = [kp.kappa(a, d) for a in grid]
    assert np.all(np.diff(vals) > 0)


@pytest.mark.parametrize("d", [2, 3])
def test_local_continuity(d):
    # derivative bound grows like (1 + a^2)^((d-1)/2)
    for a in (-20.0, -1.0, 0.5, 5.0):
        delta = 1e-4
        jump = abs(kp.kappa(a + delta, d) - kp.kappa(a, d))
        assert jump <= 2 * kp.prefactor(d) * delta * (1 + a * a) ** ((d - 1) / 2)


# --- angle variable --------------------------------------------------------------

def test_kappa_tilde_points():
    assert kp.kappa_tilde(PI, 3) == pytest.approx(1 / (16 * PI), rel=1e-14)
    assert kp.kappa_tilde(1e-9, 3) == pytest.approx(-1 / (16 * PI), rel=1e-9)
    assert kp.kappa_tilde(0.0, 3) == pytest.approx(-1 / (16 * PI), rel=1e-15)
    assert kp.kappa_tilde(0.5 * PI, 3) == pytest.approx(kp.kappa(-1.0, 3), rel=1e-13)
    assert kp.kappa_tilde(0.5 * PI, 2) == pytest.approx(oracles.kappa_d2(-1.0), rel=1e-10)


def test_kappa_tilde_matches_composition_d3():
    for t in np.linspace(0.05, 2 * PI - 0.05, 61):
        a = kp.cayley_theta_to_a(t)
        assert kp.kappa_tilde(t, 3) == pytest.approx(kp.kappa_closed_form_d3(a).value, rel=1e-10)


def test_kappa_tilde_grows_toward_two_pi():
    assert kp.kappa_tilde(2 * PI - 1e-3, 3) > 1e4 * kp.kappa_tilde(PI, 3)


# --- argument checks -------------------------------------------------------------

@pytest.mark.parametrize("d", [1, 0, 2.5, "3"])
def test_dimension_rejected(d):
    with pytest.raises(ValueError):
        kp.kappa(0.5, d)


def test_nan_rejected():
    with pytest.raises(ValueError):
        kp.kappa_quadrature(math.nan, 3)
    with pytest.raises(ValueError):
        kp.kappa_closed_form_d3(math.nan)


def test_closed_form_needs_d3():
    with pytest.raises(ValueError):
        kp.kappa(1.0, 2, method="closed_form_d3")
