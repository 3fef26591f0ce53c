"""Scaling fits, sum rules and small diagnostics on top of the geometry layer."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .geometry import EffectiveField
from .models import MovingWellModel
from .spectral import as_point, check_gap


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    stderr: float
    prefactor: float
    n_samples: int
    decades: float

    def within(self, target: float, tol: float) -> bool:
        return abs(self.exponent - target) <= tol


def _positive(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError(f"{what} must be finite and positive")
    return arr


def fit_power_law(r: Sequence[float], values: Sequence[float], min_samples: int = 8,
                  min_decades: float = 1.0) -> PowerLawFit:
    """Least-squares slope of ``log value`` against ``log r``.

    Needs at least ``min_samples`` points spread over ``min_decades`` decades
    of ``r``. The standard error is the usual OLS slope error (zero for
    exact data).
    """
    x = np.log(_positive(r, "radii"))
    y = np.log(_positive(values, "values"))
    if x.size != y.size:
        raise ValidationError("r and values differ in length")
    if x.size < min_samples:
        raise ValidationError(f"need at least {min_samples} samples, got {x.size}")
    decades = float((x.max() - x.min()) / math.log(10))
    if decades < min_decades - 1e-12:
        raise ValidationError(f"samples span {decades:.3g} decades, need {min_decades}")
    design = np.column_stack((x, np.ones_like(x)))
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    dof = max(x.size - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return PowerLawFit(float(coef[0]), stderr, math.exp(coef[1]), int(x.size), decades)


@dataclass(frozen=True)
class ExponentPair:
    """``log|y| = a log V + b log T + c`` fitted over a (V, T) design."""

    speed_exponent: float
    period_exponent: float
    intercept: float
    max_residual: float


def fit_speed_period(speeds, periods, values) -> ExponentPair:
    v = np.log(_positive(speeds, "speeds"))
    t = np.log(_positive(periods, "periods"))
    y = np.log(_positive(np.abs(np.asarray(values, dtype=float)), "|values|"))
    if not (v.size == t.size == y.size) or v.size < 3:
        raise ValidationError("need at least three matching (V, T, value) samples")
    design = np.column_stack((v, t, np.ones_like(v)))
    if np.linalg.matrix_rank(design) < 3:
        raise ValidationError("speeds and periods must vary independently")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return ExponentPair(float(coef[0]), float(coef[1]), float(coef[2]), float(np.max(np.abs(resid))))


def log_linearity(x, y) -> float:
    """Pearson correlation of ``log y`` with ``x``."""
    ly = np.log(_positive(y, "values"))
    x = np.asarray(x, dtype=float)
    if x.size < 3:
        raise ValidationError("need at least three points for a correlation")
    return float(np.corrcoef(x, ly)[0, 1])


def landau_zener(gap_coupling: float, sweep_rate: float, hbar: float = 1.0) -> float:
    """Diabatic jump probability ``exp(-pi D^2 / (hbar v))`` for ``H = D sx + v t sz``."""
    if sweep_rate <= 0:
        raise ValidationError("sweep rate must be positive")
    return math.exp(-math.pi * gap_coupling**2 / (hbar * sweep_rate))


def trk_sum(model: MovingWellModel, n: int = 0, point=(0.0,)) -> float:
    """Energy-weighted dipole sum ``(2 m / hbar^2) sum_k |<n|x|k>|^2 (E_k - E_n)``.

    Equals one for a single particle in the continuum; on a grid the
    deviation measures discretisation error.
    """
    x = as_point(point)
    sd = model.spectrum(x)
    check_gap(sd.energies, n)
    dip = sd.states.conj().T @ (model.x * sd.state(n))
    s = float(np.sum(np.abs(dip) ** 2 * (sd.energies - sd.energies[n])))
    return 2.0 * model.mass * s / model.hbar**2


def smallness_ratio(field: EffectiveField) -> float:
    """``||I_ind|| / ||I_prim||`` in the spectral norm.

    Values of order one or more mean the induced inertia dominates.
    """
    ind = np.atleast_2d(field.induced_inertia)
    prim = np.atleast_2d(field.total_inertia) - ind
    den = np.linalg.norm(prim, 2)
    if den == 0:
        raise ValidationError("primitive inertia is zero")
    return float(np.linalg.norm(ind, 2) / den)


def reduction_factors(errors: Sequence[float]) -> np.ndarray:
    """Successive ratios ``e_k / e_{k+1}`` of a refinement sequence."""
    e = np.abs(np.asarray(errors, dtype=float))
    return e[:-1] / e[1:]
