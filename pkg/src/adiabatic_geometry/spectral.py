"""Hermitian eigendecomposition, gauge fixing and derivative couplings."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegeneracyError, GaugeError, PathTooCoarseError, ValidationError

if TYPE_CHECKING:
    from .models import FastModel

HERMITIAN_RTOL = 1e-12
DEFAULT_GAP_RTOL = 1e-8
GAUGE_LARGEST_REAL = "largest-component-real"
GAUGE_TRANSPORTED = "parallel-transport"


def as_point(point) -> np.ndarray:
    """Return ``point`` as a finite 1-D float array (a parameter point)."""
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if x.ndim != 1 or x.size < 1:
        raise ValidationError(f"parameter point must be a non-empty vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"parameter point has non-finite entries: {x}")
    return x


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues (ascending) and phase-fixed eigenvectors at one point.

    ``states[:, k]`` is the eigenvector of level ``k``.
    """

    energies: np.ndarray
    states: np.ndarray
    point: np.ndarray
    gauge_tag: str = GAUGE_LARGEST_REAL

    @property
    def dim(self) -> int:
        return self.energies.size

    def state(self, n: int) -> np.ndarray:
        return self.states[:, n]

    def reconstruct(self) -> np.ndarray:
        return (self.states * self.energies) @ self.states.conj().T


@dataclass(frozen=True)
class CouplingMatrix:
    """Off-diagonal derivative couplings of one level.

    ``entries[i, m] = <m|d_i n>`` for ``m != n``; ``entries[i, n] == 0``.
    """

    level: int
    entries: np.ndarray
    spectrum: SpectralData

    @property
    def gaps(self) -> np.ndarray:
        """``E_m - E_n`` for every level ``m`` (zero at ``m = n``)."""
        return self.spectrum.energies - self.spectrum.energies[self.level]


def check_hermitian(h: np.ndarray, rtol: float = HERMITIAN_RTOL) -> None:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValidationError(f"Hamiltonian must be square, got shape {h.shape}")
    scale = max(np.linalg.norm(h), 1.0)
    defect = np.linalg.norm(h - h.conj().T)
    if defect > rtol * scale:
        raise ValidationError(
            f"matrix is not Hermitian: ||H - H^dagger||_F = {defect:.3e} "
            f"exceeds {rtol:.1e} * {scale:.3e}"
        )


def fix_phases(states: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-modulus component is real positive.

    Ties are broken toward the lowest index, which keeps the choice
    deterministic but makes the gauge discontinuous where two components
    have equal modulus.
    """
    idx = np.argmax(np.abs(states), axis=0)
    pivots = states[idx, np.arange(states.shape[1])]
    return states * (np.abs(pivots) / pivots)


def eigensystem(h: np.ndarray, point=None) -> SpectralData:
    """Diagonalize a Hermitian matrix and apply the deterministic phase fix."""
    h = np.asarray(h)
    check_hermitian(h)
    if h.shape[0] < 2:
        raise ValidationError("fast Hilbert space must have dimension >= 2")
    try:
        energies, states = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ArithmeticError(f"eigensolver did not converge: {exc}") from exc
    states = fix_phases(states.astype(complex, copy=False))
    pt = np.zeros(1) if point is None else as_point(point)
    return SpectralData(energies=energies, states=states, point=pt)


def parallel_transport_gauge(
    path: Sequence[SpectralData], min_overlap: float = 0.5
) -> list[SpectralData]:
    """Rephase eigenvectors so consecutive same-level overlaps are real positive.

    The first element keeps its phases. Raises :class:`PathTooCoarseError`
    when any per-level overlap drops below ``min_overlap``.
    """
    if not path:
        return []
    out = [path[0]]
    prev = path[0].states
    for k, sd in enumerate(path[1:], start=1):
        overlaps = np.einsum("ij,ij->j", prev.conj(), sd.states)
        mags = np.abs(overlaps)
        bad = np.flatnonzero(mags < min_overlap)
        if bad.size:
            raise PathTooCoarseError(
                f"path too coarse or crossing at step {k}: level {int(bad[0])} "
                f"overlap {mags[bad[0]]:.3g} < {min_overlap}",
                step=k,
            )
        states = sd.states * (mags / overlaps)
        out.append(replace(sd, states=states, gauge_tag=GAUGE_TRANSPORTED))
        prev = states
    return out


def transported_phase(path: Sequence[SpectralData], n: int) -> float:
    """Phase of ``<n(0)|n(end)>`` after parallel transport along ``path``.

    For a closed loop (last point equal to the first) this is the Berry
    phase of level ``n``, in radians in (-pi, pi].
    """
    moved = parallel_transport_gauge(path)
    return float(np.angle(np.vdot(moved[0].state(n), moved[-1].state(n))))


def gap_tolerance(energies: np.ndarray, gap_rtol: float = DEFAULT_GAP_RTOL) -> float:
    spread = float(energies[-1] - energies[0])
    return gap_rtol * max(spread, np.finfo(float).tiny)


def check_gap(energies: np.ndarray, n: int, gap_rtol: float = DEFAULT_GAP_RTOL) -> None:
    if not 0 <= n < energies.size:
        raise ValidationError(f"level {n} out of range for dimension {energies.size}")
    gaps = np.abs(energies - energies[n])
    gaps[n] = np.inf
    m = int(np.argmin(gaps))
    tol = gap_tolerance(energies, gap_rtol)
    if gaps[m] <= tol:
        raise DegeneracyError(
            f"levels {m} and {n} are degenerate: gap {gaps[m]:.3e} <= {tol:.3e}",
            pair=(m, n),
            gap=float(gaps[m]),
        )


def couplings_from_gradients(
    sd: SpectralData, gradients: Sequence[np.ndarray], n: int, gap_rtol: float = DEFAULT_GAP_RTOL
) -> CouplingMatrix:
    """Sum-over-states couplings ``<m|d_i H|n> / (E_n - E_m)``."""
    check_gap(sd.energies, n, gap_rtol)
    vn = sd.states[:, n]
    denom = sd.energies[n] - sd.energies
    denom[n] = 1.0
    entries = np.empty((len(gradients), sd.dim), dtype=complex)
    for i, dh in enumerate(gradients):
        entries[i] = (sd.states.conj().T @ (dh @ vn)) / denom
    entries[:, n] = 0.0
    return CouplingMatrix(level=n, entries=entries, spectrum=sd)


def derivative_couplings(
    model: "FastModel", point, n: int, gap_rtol: float = DEFAULT_GAP_RTOL
) -> CouplingMatrix:
    """Couplings ``<m|d_i n>`` of level ``n`` at ``point``, one row per slow coordinate."""
    x = as_point(point)
    sd = eigensystem(model.hamiltonian(x), x)
    grads = [model.gradient(x, i) for i in range(model.n_params)]
    return couplings_from_gradients(sd, grads, n, gap_rtol)


def diagonal_connection(cm: CouplingMatrix) -> np.ndarray:
    """``Im <n|d_i n>`` in the largest-component-real gauge.

    With component ``k`` of ``|n>`` held real positive, ``d_i n_k`` is real,
    which fixes the diagonal term from the off-diagonal couplings alone:
    ``Im <n|d_i n> = -Im(sum_m m_k <m|d_i n>) / n_k``.
    """
    sd = cm.spectrum
    n = cm.level
    vn = sd.states[:, n]
    mods = np.abs(vn)
    k = int(np.argmax(mods))
    others = np.delete(mods, k)
    if others.size and np.isclose(others.max(), mods[k], rtol=1e-9, atol=0.0):
        raise GaugeError(
            f"gauge ambiguous for level {n}: two components share the largest modulus "
            f"{mods[k]:.6g}"
        )
    if sd.gauge_tag != GAUGE_LARGEST_REAL or abs(vn[k].imag) > 1e-12 * mods[k]:
        raise GaugeError("diagonal connection requires the largest-component-real gauge")
    return -(cm.entries @ sd.states[k, :]).imag / vn[k].real
