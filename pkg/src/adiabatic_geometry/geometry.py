"""Induced vector potential, metric, curvature, inertia and the effective field.

All quantities refer to one nondegenerate level ``n`` of a :class:`FastModel`
and are built from the sum-over-states couplings ``<m|d_i n>``:

* connection ``A_i = i hbar <n|d_i n>`` (gauge dependent)
* metric ``g_ij = Re T_ij`` and curvature ``F_ij = -2 hbar Im T_ij`` with
  ``T_ij = sum_{m != n} <d_i n|m><m|d_j n>``, so that ``F = dA``
* induced inertia ``I_ij = 2 hbar^2 Re sum_{m != n} <d_i n|m><m|d_j n> / (E_m - E_n)``
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegeneracyError, GaugeError, InertiaError, ValidationError
from .models import FastModel
from .spectral import (
    DEFAULT_GAP_RTOL,
    CouplingMatrix,
    SpectralData,
    as_point,
    couplings_from_gradients,
    derivative_couplings,
    diagonal_connection,
    eigensystem,
)

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class GeometricTensors:
    point: np.ndarray
    level: int
    energy: float
    connection: np.ndarray
    metric: np.ndarray
    curvature: np.ndarray
    induced_inertia: np.ndarray
    scalar_potential: float
    hbar: float


@dataclass(frozen=True)
class EffectiveField:
    """Ingredients of ``V_BO + (P - A) Q (P - A) / 2 + hbar^2 g:Q / 2`` with ``Q = (I_prim + I_ind)^-1``.

    ``phi_primitive`` keeps the scalar potential built from the primitive
    inverse inertia alone, for comparison with ``phi_total``.
    """

    point: np.ndarray
    level: int
    v_bo: float
    connection: np.ndarray
    total_inertia: np.ndarray
    inverse_inertia: np.ndarray
    phi_total: float
    phi_primitive: float
    curvature: np.ndarray
    metric: np.ndarray
    induced_inertia: np.ndarray


def _qgt(cm: CouplingMatrix) -> np.ndarray:
    c = cm.entries
    return c.conj() @ c.T


def metric_and_curvature(cm: CouplingMatrix, hbar: float) -> tuple[np.ndarray, np.ndarray]:
    t = _qgt(cm)
    g = t.real
    f = -2.0 * hbar * t.imag
    return 0.5 * (g + g.T), 0.5 * (f - f.T)


def inertia_from_couplings(cm: CouplingMatrix, hbar: float) -> np.ndarray:
    gaps = cm.gaps.copy()
    n = cm.level
    gaps[n] = 1.0
    c = cm.entries
    w = c / gaps
    raw = 2.0 * hbar**2 * (c.conj() @ w.T).real
    asym = np.max(np.abs(raw - raw.T), initial=0.0)
    scale = max(np.max(np.abs(raw), initial=0.0), 1e-300)
    if asym > SYMMETRY_TOL * max(scale, 1.0):
        raise ArithmeticError(f"induced inertia has antisymmetric part {asym:.3e}")
    return 0.5 * (raw + raw.T)


def _spd_inverse(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    sym = 0.5 * (mat + mat.T)
    try:
        chol = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        evals = np.linalg.eigvalsh(sym)
        raise InertiaError(f"{what} is not positive definite (eigenvalues {evals})") from None
    inv_chol = np.linalg.inv(chol)
    return inv_chol.T @ inv_chol


def berry_connection(model: FastModel, point, n: int, gap_rtol: float = DEFAULT_GAP_RTOL) -> np.ndarray:
    """``A_i = i hbar <n|d_i n>`` in the largest-component-real gauge."""
    cm = derivative_couplings(model, point, n, gap_rtol)
    return -model.hbar * diagonal_connection(cm)


def quantum_geometric_tensor(model: FastModel, point, n: int,
                             gap_rtol: float = DEFAULT_GAP_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Metric ``g`` (real symmetric) and curvature ``F`` (real antisymmetric) of level ``n``."""
    cm = derivative_couplings(model, point, n, gap_rtol)
    return metric_and_curvature(cm, model.hbar)


def induced_inertia(model: FastModel, point, n: int, gap_rtol: float = DEFAULT_GAP_RTOL) -> np.ndarray:
    cm = derivative_couplings(model, point, n, gap_rtol)
    return inertia_from_couplings(cm, model.hbar)


def scalar_potential(metric, inverse_inertia, hbar: float) -> float:
    """``hbar^2 Q_ij g_ij / 2``; ``Q`` must be symmetric positive definite."""
    q = np.atleast_2d(np.asarray(inverse_inertia, dtype=float))
    g = np.atleast_2d(np.asarray(metric, dtype=float))
    if q.shape != g.shape:
        raise ValidationError(f"metric {g.shape} and inverse inertia {q.shape} differ in shape")
    _spd_inverse(q, "inverse inertia")
    return float(hbar**2 * np.sum(q * g) / 2.0)


def total_inertia(primitive, induced) -> tuple[np.ndarray, np.ndarray]:
    """``I_total = I_prim + I_ind`` and its inverse; raises :class:`InertiaError` unless positive definite."""
    tot = np.atleast_2d(np.asarray(primitive, dtype=float)) + np.atleast_2d(np.asarray(induced, dtype=float))
    tot = 0.5 * (tot + tot.T)
    return tot, _spd_inverse(tot, "total inertia")


def primitive_inertia(value, n_params: int) -> np.ndarray:
    """Promote a scalar mass, a diagonal vector or a full matrix to a D x D inertia."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return float(arr) * np.eye(n_params)
    if arr.ndim == 1:
        return np.diag(arr)
    return arr


def tensors_from_spectrum(sd: SpectralData, gradients: Sequence[np.ndarray], n: int, hbar: float,
                          primitive=None, with_connection: bool = True,
                          gap_rtol: float = DEFAULT_GAP_RTOL) -> GeometricTensors:
    """All per-point tensors from one eigendecomposition.

    ``primitive`` (inertia) sets the ``Q`` used for the scalar potential;
    without it the potential is NaN. ``with_connection=False`` skips the
    gauge-dependent connection (NaN), e.g. for arbitrarily rephased input.
    """
    cm = couplings_from_gradients(sd, gradients, n, gap_rtol)
    g, f = metric_and_curvature(cm, hbar)
    inertia = inertia_from_couplings(cm, hbar)
    d = len(gradients)
    conn = -hbar * diagonal_connection(cm) if with_connection else np.full(d, np.nan)
    if primitive is None:
        phi = math.nan
    else:
        q = _spd_inverse(primitive_inertia(primitive, d), "primitive inertia")
        phi = scalar_potential(g, q, hbar)
    return GeometricTensors(point=sd.point, level=n, energy=float(sd.energies[n]), connection=conn, metric=g,
                            curvature=f, induced_inertia=inertia, scalar_potential=phi, hbar=hbar)


def geometric_tensors(model: FastModel, point, n: int, primitive=None,
                      gap_rtol: float = DEFAULT_GAP_RTOL) -> GeometricTensors:
    x = as_point(point)
    sd = eigensystem(model.hamiltonian(x), x)
    return tensors_from_spectrum(sd, model.gradients(x), n, model.hbar, primitive, gap_rtol=gap_rtol)


def field_from_tensors(gt: GeometricTensors, primitive) -> EffectiveField:
    d = gt.metric.shape[0]
    prim = primitive_inertia(primitive, d)
    tot, q_tot = total_inertia(prim, gt.induced_inertia)
    q_prim = _spd_inverse(prim, "primitive inertia")
    return EffectiveField(
        point=gt.point, level=gt.level, v_bo=gt.energy, connection=gt.connection,
        total_inertia=tot, inverse_inertia=q_tot,
        phi_total=scalar_potential(gt.metric, q_tot, gt.hbar),
        phi_primitive=scalar_potential(gt.metric, q_prim, gt.hbar),
        curvature=gt.curvature, metric=gt.metric, induced_inertia=gt.induced_inertia,
    )


def effective_field(model: FastModel, point, n: int, primitive, gap_rtol: float = DEFAULT_GAP_RTOL) -> EffectiveField:
    """Effective-Hamiltonian ingredients with the primitive inertia replaced by the total."""
    return field_from_tensors(geometric_tensors(model, point, n, primitive, gap_rtol), primitive)


@dataclass
class GridRecord:
    index: int
    point: np.ndarray
    tensors: GeometricTensors | None = None
    field: EffectiveField | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class GridResult:
    records: list[GridRecord] = field(default_factory=list)

    @property
    def failures(self) -> list[GridRecord]:
        return [r for r in self.records if not r.ok]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, k):
        return self.records[k]


def geometry_grid(model: FastModel, grid: Sequence, n: int, primitive, workers: int = 1,
                  stop_on_error: bool = False, gap_rtol: float = DEFAULT_GAP_RTOL) -> GridResult:
    """Evaluate tensors and effective fields at every grid point, in input order.

    Per-point numerical failures (degeneracy, gauge, indefinite inertia) are
    recorded on the record unless ``stop_on_error`` is set.
    """
    points = [as_point(p) for p in grid]

    def one(k: int) -> GridRecord:
        x = points[k]
        try:
            gt = geometric_tensors(model, x, n, primitive, gap_rtol)
            return GridRecord(k, x, gt, field_from_tensors(gt, primitive))
        except (DegeneracyError, GaugeError, InertiaError) as exc:
            if stop_on_error:
                raise
            return GridRecord(k, x, error=f"{type(exc).__name__}: {exc}")

    if workers <= 1 or len(points) < 2:
        records = [one(k) for k in range(len(points))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, range(len(points))))
    return GridResult(records)


def loop_berry_phase(spectra: Sequence[SpectralData], n: int) -> float:
    """Discrete Wilson-loop phase ``-sum_k arg <n_k|n_k+1>`` around a closed path.

    ``spectra`` lists the path points once; the loop closes back onto the
    first point. Independent of eigenvector phases; equals the loop integral
    of ``A / hbar`` modulo ``2 pi`` in the continuum limit.
    """
    vecs = [sd.state(n) for sd in spectra]
    total = 0.0
    for a, b in zip(vecs, vecs[1:] + vecs[:1]):
        total -= np.angle(np.vdot(a, b))
    return float(total)


def connection_line_integral(model: FastModel, path: Sequence, n: int) -> float:
    """Trapezoidal ``sum A . dX`` along a polygon.

    For a loop, pass the closing point explicitly (it may differ in
    coordinates from the start, e.g. ``phi = 0`` and ``phi = 2 pi``).
    """
    pts = [as_point(p) for p in path]
    conns = [berry_connection(model, p, n) for p in pts]
    total = 0.0
    for k in range(len(pts) - 1):
        total += 0.5 * (conns[k] + conns[k + 1]) @ (pts[k + 1] - pts[k])
    return float(total)
