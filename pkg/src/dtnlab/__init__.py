"""Semiclassical Dirichlet-to-Neumann spectra and Robin counts on model domains."""

from __future__ import annotations

from .counting import (
    SpectralWindow,
    birman_schwinger_check,
    branch_flow,
    count_cayley,
    count_dtn,
    dirichlet_limit_check,
    limiting_measure_histogram,
    robin_count,
    robin_second_term,
    weyl_fit,
)
from .domains import ModelDomain, hemisphere_zero_mode_multiplicity
from .kappa import kappa_closed_form_d3, kappa_quadrature, kappa_tilde

__version__ = "0.1.0"

__all__ = [
    "ModelDomain",
    "SpectralWindow",
    "birman_schwinger_check",
    "branch_flow",
    "count_cayley",
    "count_dtn",
    "dirichlet_limit_check",
    "hemisphere_zero_mode_multiplicity",
    "kappa_closed_form_d3",
    "kappa_quadrature",
    "kappa_tilde",
    "limiting_measure_histogram",
    "robin_count",
    "robin_second_term",
    "weyl_fit",
]
