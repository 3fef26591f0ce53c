"""Fast Hamiltonians parameterized by slow coordinates.

Every model exposes ``hamiltonian(X)`` and the exact ``gradient(X, i)``
(``dH/dX_i``) as dense Hermitian matrices. Models are immutable after
construction and safe to share between threads.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .errors import DegeneracyError, ValidationError
from .spectral import as_point, eigensystem, gap_tolerance

DEFAULT_HBAR = 1.0

ArrayFn = Callable[[np.ndarray], np.ndarray]


class FastModel(ABC):
    """A finite-dimensional Hamiltonian ``H(X)`` over ``n_params`` slow coordinates."""

    name: str = "model"
    hbar: float = DEFAULT_HBAR
    n_params: int = 1
    param_names: tuple[str, ...] = ("x",)

    @property
    @abstractmethod
    def dim(self) -> int:
        """Dimension of the fast Hilbert space."""

    @abstractmethod
    def hamiltonian(self, point) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, point, i: int) -> np.ndarray:
        ...

    def gradients(self, point) -> list[np.ndarray]:
        return [self.gradient(point, i) for i in range(self.n_params)]

    def spectrum(self, point):
        x = as_point(point)
        return eigensystem(self.hamiltonian(x), x)

    def analytic_reference(self, point, n: int) -> dict[str, np.ndarray] | None:
        """Closed-form geometric quantities for testing, when known."""
        return None

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "n_params": self.n_params,
                "param_names": list(self.param_names), "hbar": self.hbar}


def _check_point(model: FastModel, point) -> np.ndarray:
    x = as_point(point)
    if x.size != model.n_params:
        raise ValidationError(
            f"{model.name} expects {model.n_params} slow coordinates, got {x.size}"
        )
    return x


def _check_index(model: FastModel, i: int) -> None:
    if not 0 <= i < model.n_params:
        raise ValidationError(f"{model.name}: no slow coordinate {i}")


# ---------------------------------------------------------------- spins


def spin_matrices(spin: float, hbar: float = DEFAULT_HBAR) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin operators (carrying one factor of ``hbar``) in the basis m = s, s-1, ..., -s."""
    two_s = 2 * spin
    if two_s < 1 or abs(two_s - round(two_s)) > 1e-12:
        raise ValidationError(f"spin must be a positive multiple of 1/2, got {spin}")
    s = round(two_s) / 2
    m = s - np.arange(round(two_s) + 1)
    # <m+1|S+|m> = hbar sqrt(s(s+1) - m(m+1)); S+ raises toward index 0
    sp = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sx = (sp + sp.T) / 2
    sy = (sp - sp.T) / 2j
    sz = np.diag(m).astype(complex)
    return hbar * sx, hbar * sy, hbar * sz


def _fd_jacobian(fn: ArrayFn, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((-fn(x + 2 * e) + 8 * fn(x + e) - 8 * fn(x - e) + fn(x - 2 * e)) / (12 * h))
    return np.stack(cols, axis=1)


class SpinFieldModel(FastModel):
    """Spin in a magnetic field: ``H = -(1/hbar) b(X) . S`` with ``b = g B Bhat``.

    ``field`` returns the 3-vector ``b(X)`` in energy units, so level ``m``
    sits at ``-|b| m`` independent of ``hbar``. ``jacobian`` returns the
    3 x D matrix ``db/dX``; without it a fourth-order finite difference is used.
    """

    def __init__(self, spin: float, field: ArrayFn, n_params: int, jacobian: ArrayFn | None = None,
                 hbar: float = DEFAULT_HBAR, name: str = "spin", param_names: Sequence[str] | None = None):
        self.spin = spin
        self.field = field
        self.jacobian = jacobian
        self.n_params = int(n_params)
        self.hbar = float(hbar)
        self.name = name
        self.param_names = tuple(param_names) if param_names else tuple(f"x{i}" for i in range(self.n_params))
        self._ops = spin_matrices(spin, self.hbar)

    @property
    def dim(self) -> int:
        return self._ops[0].shape[0]

    @property
    def s(self) -> float:
        return (self.dim - 1) / 2

    def m_of_level(self, n: int) -> float:
        """Spin projection on ``b`` of energy level ``n`` (ascending energy)."""
        return self.s - n

    def level_of_m(self, m: float) -> int:
        n = self.s - m
        if abs(n - round(n)) > 1e-12 or not 0 <= round(n) < self.dim:
            raise ValidationError(f"m = {m} is not a projection of spin {self.s}")
        return round(n)

    def _b(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.field(x), dtype=float)

    def _db(self, x: np.ndarray) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float).reshape(3, self.n_params)
        return _fd_jacobian(lambda y: np.asarray(self.field(y), dtype=float), x)

    def _dot_s(self, v: np.ndarray) -> np.ndarray:
        sx, sy, sz = self._ops
        return v[0] * sx + v[1] * sy + v[2] * sz

    def hamiltonian(self, point) -> np.ndarray:
        x = _check_point(self, point)
        return -self._dot_s(self._b(x)) / self.hbar

    def gradient(self, point, i: int) -> np.ndarray:
        x = _check_point(self, point)
        _check_index(self, i)
        return -self._dot_s(self._db(x)[:, i]) / self.hbar

    def analytic_reference(self, point, n: int) -> dict[str, np.ndarray]:
        """Spin-coherent-state closed forms for level ``n``.

        With ``u_i = d_i Bhat``: inertia ``hbar^2 m u_i.u_j / gB``, metric
        ``(s(s+1) - m^2) u_i.u_j / 2``, curvature ``-hbar m Bhat.(u_i x u_j)``.
        """
        x = _check_point(self, point)
        b = self._b(x)
        gb = np.linalg.norm(b)
        if gb == 0.0:
            raise DegeneracyError(f"{self.name}: field vanishes at {x}", gap=0.0)
        bhat = b / gb
        db = self._db(x)
        u = (db - np.outer(bhat, bhat @ db)) / gb
        m = self.m_of_level(n)
        uu = u.T @ u
        curv = np.array([[bhat @ np.cross(u[:, i], u[:, j]) for j in range(self.n_params)]
                         for i in range(self.n_params)])
        return {
            "energy": np.array(-gb * m),
            "induced_inertia": self.hbar**2 * m * uu / gb,
            "metric": (self.s * (self.s + 1) - m * m) * uu / 2,
            "curvature": -self.hbar * m * curv,
        }


def spin_model(spin: float, magnitude: Callable[[np.ndarray], float], direction: ArrayFn, n_params: int,
               magnitude_grad: ArrayFn | None = None, direction_jac: ArrayFn | None = None,
               hbar: float = DEFAULT_HBAR, name: str = "spin", param_names=None) -> SpinFieldModel:
    """Spin model from a field strength ``gB(X) > 0`` and a unit direction ``Bhat(X)``."""

    def field(x):
        gb = float(magnitude(x))
        if gb <= 0:
            raise ValidationError(f"{name}: gB must be positive, got {gb} at {x}")
        return gb * np.asarray(direction(x), dtype=float)

    jac = None
    if magnitude_grad is not None and direction_jac is not None:
        def jac(x):
            d = np.asarray(direction(x), dtype=float)
            return (np.outer(d, np.asarray(magnitude_grad(x), dtype=float))
                    + float(magnitude(x)) * np.asarray(direction_jac(x), dtype=float).reshape(3, n_params))

    return SpinFieldModel(spin, field, n_params, jac, hbar=hbar, name=name, param_names=param_names)


def planar_rotation_spin(spin: float, gB: float, kappa: float, hbar: float = DEFAULT_HBAR) -> SpinFieldModel:
    """Field of constant strength whose direction turns in the x-z plane at rate ``kappa`` per unit x."""
    if gB <= 0:
        raise ValidationError(f"gB must be positive, got {gB}")

    def field(x):
        a = kappa * x[0]
        return gB * np.array([np.sin(a), 0.0, np.cos(a)])

    def jac(x):
        a = kappa * x[0]
        return gB * kappa * np.array([[np.cos(a)], [0.0], [-np.sin(a)]])

    return SpinFieldModel(spin, field, 1, jac, hbar=hbar, name="spin-planar-rotation", param_names=("x",))


def sphere_spin(spin: float, gB: float, hbar: float = DEFAULT_HBAR) -> SpinFieldModel:
    """Field of constant strength with direction given by polar angles ``(theta, phi)``."""
    if gB <= 0:
        raise ValidationError(f"gB must be positive, got {gB}")

    def field(x):
        th, ph = x
        return gB * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    def jac(x):
        th, ph = x
        return gB * np.array([
            [np.cos(th) * np.cos(ph), -np.sin(th) * np.sin(ph)],
            [np.cos(th) * np.sin(ph), np.sin(th) * np.cos(ph)],
            [-np.sin(th), 0.0],
        ])

    return SpinFieldModel(spin, field, 2, jac, hbar=hbar, name="spin-sphere", param_names=("theta", "phi"))


def affine_spin(spin: float, offset, matrix, hbar: float = DEFAULT_HBAR) -> SpinFieldModel:
    """Field ``b(X) = offset + matrix @ X`` (3 x D ``matrix``)."""
    b0 = np.asarray(offset, dtype=float).reshape(3)
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    if mat.shape[0] != 3:
        raise ValidationError(f"field matrix must have 3 rows, got shape {mat.shape}")
    return SpinFieldModel(spin, lambda x: b0 + mat @ x, mat.shape[1], lambda x: mat,
                          hbar=hbar, name="spin-affine")


def two_level_crossing_model(d: ArrayFn, n_params: int, jacobian: ArrayFn | None = None,
                             hbar: float = DEFAULT_HBAR) -> SpinFieldModel:
    """``H = d(X) . sigma``: levels ``-|d|`` and ``+|d|``, degenerate where ``d = 0``."""
    jac = None if jacobian is None else (lambda x: -2.0 * np.asarray(jacobian(x), dtype=float))
    model = SpinFieldModel(0.5, lambda x: -2.0 * np.asarray(d(x), dtype=float), n_params, jac,
                           hbar=hbar, name="two-level")
    return model


def affine_two_level(offset, matrix, hbar: float = DEFAULT_HBAR) -> SpinFieldModel:
    """``H = (offset + matrix @ X) . sigma``; e.g. ``matrix = identity`` puts a conical crossing at 0."""
    d0 = np.asarray(offset, dtype=float).reshape(3)
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    if mat.shape[0] != 3:
        raise ValidationError(f"crossing matrix must have 3 rows, got shape {mat.shape}")
    return two_level_crossing_model(lambda x: d0 + mat @ x, mat.shape[1], lambda x: mat, hbar=hbar)


# ------------------------------------------------------- matrix families


class MatrixFamilyModel(FastModel):
    """Affine Hermitian family ``H(X) = H0 + sum_i X_i H_i``."""

    def __init__(self, h0, terms: Sequence, hbar: float = DEFAULT_HBAR, name: str = "matrix-family"):
        self.h0 = np.asarray(h0, dtype=complex)
        self.terms = [np.asarray(t, dtype=complex) for t in terms]
        if not self.terms:
            raise ValidationError("matrix family needs at least one slow coordinate")
        for t in [self.h0, *self.terms]:
            if t.shape != self.h0.shape or not np.allclose(t, t.conj().T, rtol=0, atol=1e-12):
                raise ValidationError("family matrices must be Hermitian and share one shape")
        self.hbar = float(hbar)
        self.name = name
        self.n_params = len(self.terms)
        self.param_names = tuple(f"x{i}" for i in range(self.n_params))

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def hamiltonian(self, point) -> np.ndarray:
        x = _check_point(self, point)
        return self.h0 + sum(xi * t for xi, t in zip(x, self.terms))

    def gradient(self, point, i: int) -> np.ndarray:
        _check_point(self, point)
        _check_index(self, i)
        return self.terms[i]


def _random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def random_matrix_family(dim: int, n_params: int, rng: np.random.Generator | int | None = None,
                         hbar: float = DEFAULT_HBAR) -> MatrixFamilyModel:
    """GUE-like affine family, generically nondegenerate."""
    rng = np.random.default_rng(rng)
    h0 = _random_hermitian(rng, dim)
    terms = [_random_hermitian(rng, dim) for _ in range(n_params)]
    return MatrixFamilyModel(h0, terms, hbar=hbar, name=f"random-{dim}x{n_params}")


# ---------------------------------------------------------- moving well


@dataclass(frozen=True)
class WellProfile:
    """Potential ``V(y)`` and its derivative, ``y = x - X``."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    slope: Callable[[np.ndarray], np.ndarray]


def harmonic_well(omega: float, mass: float) -> WellProfile:
    k = mass * omega**2
    return WellProfile("harmonic", lambda y: 0.5 * k * y**2, lambda y: k * y)


def gaussian_well(depth: float, width: float) -> WellProfile:
    def value(y):
        return -depth * np.exp(-0.5 * (y / width) ** 2)

    def slope(y):
        return depth * y / width**2 * np.exp(-0.5 * (y / width) ** 2)

    return WellProfile("gaussian", value, slope)


_STENCILS = {
    2: np.array([-2.0, 1.0]),
    4: np.array([-5.0 / 2, 4.0 / 3, -1.0 / 12]),
    6: np.array([-49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90]),
}


def laplacian(n_points: int, spacing: float, order: int = 2) -> np.ndarray:
    """Central finite-difference second derivative with hard-wall boundaries."""
    try:
        coef = _STENCILS[order]
    except KeyError:
        raise ValidationError(f"stencil order must be one of {sorted(_STENCILS)}, got {order}") from None
    lap = coef[0] * np.eye(n_points)
    for k, c in enumerate(coef[1:], start=1):
        lap += c * (np.eye(n_points, k=k) + np.eye(n_points, k=-k))
    return lap / spacing**2


class MovingWellModel(FastModel):
    """One particle of mass ``mass`` on a uniform grid in a well centred at the slow coordinate ``X``.

    ``H = -(hbar^2 / 2 mass) d^2/dx^2 + V(x - X)`` with ``dH/dX = -V'(x - X)``.
    """

    def __init__(self, profile: WellProfile, mass: float = 1.0, n_points: int = 481, spacing: float = 0.05,
                 stencil_order: int = 2, hbar: float = DEFAULT_HBAR):
        if mass <= 0 or spacing <= 0 or n_points < 3:
            raise ValidationError("moving well needs mass > 0, spacing > 0 and at least 3 grid points")
        self.profile = profile
        self.mass = float(mass)
        self.spacing = float(spacing)
        self.stencil_order = int(stencil_order)
        self.hbar = float(hbar)
        self.name = f"moving-well-{profile.name}"
        self.n_params = 1
        self.param_names = ("X",)
        self.x = (np.arange(n_points) - (n_points - 1) / 2) * self.spacing
        self._kinetic = -(self.hbar**2 / (2 * self.mass)) * laplacian(n_points, self.spacing, self.stencil_order)

    @property
    def dim(self) -> int:
        return self.x.size

    def hamiltonian(self, point) -> np.ndarray:
        x = _check_point(self, point)
        return self._kinetic + np.diag(self.profile.value(self.x - x[0]))

    def gradient(self, point, i: int) -> np.ndarray:
        x = _check_point(self, point)
        _check_index(self, i)
        return np.diag(-self.profile.slope(self.x - x[0]))

    def position_operator(self) -> np.ndarray:
        return np.diag(self.x)

    def ground_state_width(self, point=(0.0,)) -> float:
        """Twice the rms spread of the ground-state density."""
        psi = self.spectrum(point).state(0)
        p = np.abs(psi) ** 2
        mean = p @ self.x
        return 2.0 * float(np.sqrt(p @ (self.x - mean) ** 2))

    def resolution_report(self, point=(0.0,)) -> dict:
        sd = self.spectrum(point)
        p = np.abs(sd.state(0)) ** 2
        width = self.ground_state_width(point)
        return {
            "points_across_width": width / self.spacing,
            "participation_ratio": float(1.0 / np.sum(p**2)),
            "n_points": self.dim,
        }

    def analytic_reference(self, point, n: int) -> dict[str, np.ndarray] | None:
        if n != 0:
            return None
        return {"induced_inertia": np.array([[self.mass]])}


def moving_well_model(profile: WellProfile, mass: float = 1.0, n_points: int = 481, spacing: float = 0.05,
                      stencil_order: int = 2, hbar: float = DEFAULT_HBAR, min_points: float = 15.0) -> MovingWellModel:
    """Build a moving-well model and warn if the ground state is under-resolved."""
    model = MovingWellModel(profile, mass, n_points, spacing, stencil_order, hbar)
    report = model.resolution_report()
    if report["points_across_width"] < min_points:
        warnings.warn(
            f"ground state spans only {report['points_across_width']:.1f} grid points "
            f"(< {min_points}); refine the grid",
            RuntimeWarning,
            stacklevel=2,
        )
    return model


# ---------------------------------------------------- cranked oscillator


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n)), k=1)


class CrankedOscillatorModel(FastModel):
    """Single particle in a 2-D anisotropic oscillator whose axes are turned by the angle ``theta``.

    ``V = (mass/2) (omega_x^2 x'^2 + omega_z^2 z'^2)`` with ``x' = x cos + z sin``,
    ``z' = -x sin + z cos``, in a truncated product basis of the unrotated
    oscillator (``n_basis`` states per axis). ``x^2``, ``z^2`` and ``p^2`` use
    exact truncated matrix elements, so ``H(0)`` is exactly diagonal.
    """

    def __init__(self, omega_x: float, omega_z: float, mass: float = 1.0, n_basis: int = 12,
                 hbar: float = DEFAULT_HBAR):
        if omega_x <= 0 or omega_z <= 0 or mass <= 0:
            raise ValidationError("oscillator frequencies and mass must be positive")
        if n_basis < 2:
            raise ValidationError("need at least 2 basis states per axis")
        self.omega_x = float(omega_x)
        self.omega_z = float(omega_z)
        self.mass = float(mass)
        self.n_basis = int(n_basis)
        self.hbar = float(hbar)
        self.name = "cranked-oscillator"
        self.n_params = 1
        self.param_names = ("theta",)

        a = _ladder(n_basis)
        eye = np.eye(n_basis)
        num = np.diag(np.arange(n_basis, dtype=float))

        def ops(omega):
            lx = np.sqrt(hbar / (2 * mass * omega))
            q = lx * (a + a.T)
            q2 = lx**2 * (a @ a + a.T @ a.T + 2 * num + eye)
            p2 = (mass * hbar * omega / 2) * (2 * num + eye - a @ a - a.T @ a.T)
            return q, q2, p2

        qx, qx2, px2 = ops(self.omega_x)
        qz, qz2, pz2 = ops(self.omega_z)
        self._x2 = np.kron(qx2, eye)
        self._z2 = np.kron(eye, qz2)
        self._xz = np.kron(qx, qz)
        self._kin = (np.kron(px2, eye) + np.kron(eye, pz2)) / (2 * mass)
        self.quanta = [(nx, nz) for nx in range(n_basis) for nz in range(n_basis)]

    @property
    def dim(self) -> int:
        return self.n_basis**2

    def _coeffs(self, theta: float) -> tuple[float, float, float]:
        c, s = np.cos(theta), np.sin(theta)
        wx2, wz2 = self.omega_x**2, self.omega_z**2
        return wx2 * c * c + wz2 * s * s, wx2 * s * s + wz2 * c * c, 2 * c * s * (wx2 - wz2)

    def hamiltonian(self, point) -> np.ndarray:
        th = _check_point(self, point)[0]
        cx, cz, cxz = self._coeffs(th)
        return self._kin + 0.5 * self.mass * (cx * self._x2 + cz * self._z2 + cxz * self._xz)

    def gradient(self, point, i: int) -> np.ndarray:
        th = _check_point(self, point)[0]
        _check_index(self, i)
        s2, c2 = np.sin(2 * th), np.cos(2 * th)
        dw = self.omega_x**2 - self.omega_z**2
        return 0.5 * self.mass * dw * (-s2 * self._x2 + s2 * self._z2 + 2 * c2 * self._xz)

    def planar_moments(self, point, occupied: Sequence[int]) -> tuple[float, float]:
        """``sum_occ <x'^2>`` and ``sum_occ <z'^2>`` in body-fixed axes."""
        sd = self.spectrum(point)
        v = sd.states[:, list(occupied)]
        x2 = float(np.real(np.einsum("ik,ij,jk->", v.conj(), self._x2, v)))
        z2 = float(np.real(np.einsum("ik,ij,jk->", v.conj(), self._z2, v)))
        return x2, z2


def cranked_oscillator_model(omega_x: float, omega_z: float, mass: float = 1.0, n_basis: int = 12,
                             hbar: float = DEFAULT_HBAR) -> CrankedOscillatorModel:
    return CrankedOscillatorModel(omega_x, omega_z, mass, n_basis, hbar)


def _fermi_gap_check(energies: np.ndarray, n_occupied: int) -> None:
    if not 0 < n_occupied < energies.size:
        raise ValidationError(f"need 0 < n_occupied < {energies.size}, got {n_occupied}")
    gap = energies[n_occupied] - energies[n_occupied - 1]
    if gap <= gap_tolerance(energies):
        raise DegeneracyError(
            f"open shell: Fermi level splits a degenerate set (gap {gap:.3e})",
            pair=(n_occupied - 1, n_occupied), gap=float(gap),
        )


def inglis_inertia(model: FastModel, point, n_occupied: int) -> np.ndarray:
    """Cranking inertia of ``n_occupied`` independent fermions in the lowest orbitals.

    Sums single-particle induced inertia over occupied orbitals, restricted
    to particle-hole excitations (occupied-occupied terms cancel pairwise),
    which keeps the result finite inside degenerate closed shells.
    """
    x = as_point(point)
    sd = model.spectrum(x)
    _fermi_gap_check(sd.energies, n_occupied)
    occ = sd.states[:, :n_occupied]
    emp = sd.states[:, n_occupied:]
    de = sd.energies[n_occupied:, None] - sd.energies[None, :n_occupied]
    mats = [emp.conj().T @ g @ occ for g in model.gradients(x)]
    d = len(mats)
    out = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            val = 2 * model.hbar**2 * np.real(np.sum(mats[i].conj() * mats[j] / de**3))
            out[i, j] = out[j, i] = val
    return out


def rigid_body_inertia(model: CrankedOscillatorModel, n_occupied: int, point=(0.0,)) -> float:
    """``mass * sum_occ <x^2 + z^2>`` about the rotation axis."""
    sd = model.spectrum(point)
    _fermi_gap_check(sd.energies, n_occupied)
    x2, z2 = model.planar_moments(point, range(n_occupied))
    return model.mass * (x2 + z2)


def oscillator_fill(ratio: Fraction | float, n_occupied: int, nmax: int = 64) -> list[tuple[int, int]]:
    """Quanta ``(n_x, n_z)`` of the lowest ``n_occupied`` levels at ``omega_x / omega_z = ratio``.

    Raises :class:`DegeneracyError` if the Fermi level falls inside a degenerate set.
    """
    r = Fraction(ratio).limit_denominator(10**6)
    half = Fraction(1, 2)
    levels = sorted((r * (nx + half) + (nz + half), nx, nz) for nx in range(nmax) for nz in range(nmax))
    if levels[n_occupied][0] == levels[n_occupied - 1][0]:
        raise DegeneracyError(f"open shell for {n_occupied} particles at ratio {r}",
                              pair=(n_occupied - 1, n_occupied), gap=0.0)
    return [(nx, nz) for _, nx, nz in levels[:n_occupied]]


def self_consistent_ratios(n_occupied: int, max_term: int = 8) -> list[Fraction]:
    """Axis ratios ``omega_x / omega_z > 1`` at which ``n_occupied`` fermions fill a closed shell
    with ``omega_x^2 <sum x^2> = omega_z^2 <sum z^2>``.

    Exact rational search over ratios ``p/q`` with ``q < p <= max_term``.
    """
    found = set()
    half = Fraction(1, 2)
    for p in range(2, max_term + 1):
        for q in range(1, p):
            r = Fraction(p, q)
            try:
                occ = oscillator_fill(r, n_occupied)
            except DegeneracyError:
                continue
            sx = sum(nx + half for nx, _ in occ)
            sz = sum(nz + half for _, nz in occ)
            # <x^2> ~ (n_x + 1/2)/omega_x, so omega_x^2 <x^2> ~ omega_x * sx
            if r * sx == sz:
                found.add(r)
    return sorted(found)
