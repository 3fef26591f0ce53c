import zlib
from fractions import Fraction

import numpy as np
import pytest

from adiabatic_geometry import models
from adiabatic_geometry.errors import DegeneracyError, ValidationError

MODELS = {
    "planar": lambda: models.planar_rotation_spin(1.0, 1.3, 0.8),
    "sphere": lambda: models.sphere_spin(1.5, 2.0),
    "affine": lambda: models.affine_spin(0.5, [0.1, 0.2, 1.0], [[1.0, 0.3], [0.0, 1.0], [0.2, 0.0]]),
    "two-level": lambda: models.affine_two_level([0.3, 0.0, 0.0], [[0.0], [0.5], [1.0]]),
    "fd-spin": lambda: models.spin_model(1.0, lambda x: 1.0 + x[0] ** 2,
                                         lambda x: np.array([np.sin(x[0]), 0.0, np.cos(x[0])]), 1),
    "well": lambda: models.MovingWellModel(models.gaussian_well(4.0, 0.8), n_points=81, spacing=0.1),
    "cranked": lambda: models.cranked_oscillator_model(2.0, 1.0, n_basis=6),
    "random": lambda: models.random_matrix_family(5, 3, rng=1),
}


@pytest.mark.parametrize("name", sorted(MODELS))
def test_gradient_matches_finite_difference(name):
    model = MODELS[name]()
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    h = 1e-5
    for _ in range(20):
        x = rng.uniform(0.2, 1.0, model.n_params)
        for i in range(model.n_params):
            e = np.zeros(model.n_params)
            e[i] = h
            fd = (model.hamiltonian(x + e) - model.hamiltonian(x - e)) / (2 * h)
            scale = max(1.0, np.abs(fd).max())
            assert np.abs(model.gradient(x, i) - fd).max() < 1e-6 * scale


@pytest.mark.parametrize("name", sorted(MODELS))
def test_hamiltonians_are_hermitian(name):
    model = MODELS[name]()
    x = np.full(model.n_params, 0.37)
    h = model.hamiltonian(x)
    assert np.allclose(h, h.conj().T)
    assert h.shape == (model.dim, model.dim)


@pytest.mark.parametrize("spin", [0.5, 1.0, 1.5, 2.0])
def test_spin_algebra(spin):
    sx, sy, sz = models.spin_matrices(spin)
    assert np.allclose(sx @ sy - sy @ sx, 1j * sz)
    s2 = sx @ sx + sy @ sy + sz @ sz
    assert np.allclose(s2, spin * (spin + 1) * np.eye(sx.shape[0]))


def test_spin_levels_follow_projection():
    model = models.planar_rotation_spin(1.5, 2.0, 1.0)
    e = model.spectrum([0.4]).energies
    for n in range(model.dim):
        assert e[n] == pytest.approx(-2.0 * model.m_of_level(n))
        assert model.level_of_m(model.m_of_level(n)) == n
    with pytest.raises(ValidationError):
        model.level_of_m(0.0)


def test_bad_inputs():
    with pytest.raises(ValidationError):
        models.spin_matrices(0.3)
    with pytest.raises(ValidationError):
        models.planar_rotation_spin(0.5, -1.0, 1.0)
    with pytest.raises(ValidationError):
        models.planar_rotation_spin(0.5, 1.0, 1.0).hamiltonian([0.0, 1.0])
    with pytest.raises(ValidationError):
        models.affine_spin(0.5, [0, 0, 0], [[1.0]])
    with pytest.raises(DegeneracyError):
        models.affine_spin(0.5, [0, 0, 0], [[1.0], [0.0], [0.0]]).analytic_reference([0.0], 0)


def test_two_level_crossing_energies():
    model = models.affine_two_level([0.0, 0.0, 0.0], np.eye(3))
    x = np.array([0.3, -0.4, 1.2])
    assert np.allclose(model.spectrum(x).energies, [-np.linalg.norm(x), np.linalg.norm(x)])


def test_moving_well_warns_when_underresolved():
    with pytest.warns(RuntimeWarning, match="refine the grid"):
        models.moving_well_model(models.harmonic_well(1.0, 1.0), n_points=41, spacing=0.5)


def test_moving_well_stencils_converge_faster_at_higher_order():
    prof = models.harmonic_well(1.0, 1.0)
    errs = []
    for order in (2, 4, 6):
        m = models.MovingWellModel(prof, n_points=121, spacing=0.1, stencil_order=order)
        errs.append(abs(m.spectrum([0.0]).energies[0] - 0.5))
    assert errs[0] > errs[1] > errs[2]


def test_cranked_oscillator_unrotated_is_diagonal():
    m = models.cranked_oscillator_model(2.0, 1.0, n_basis=5)
    h = m.hamiltonian([0.0])
    assert np.allclose(h, np.diag(np.diag(h)), atol=1e-13)
    want = sorted(2.0 * (i + 0.5) + (j + 0.5) for i in range(5) for j in range(5))
    assert np.allclose(np.sort(np.diag(h).real), want)


def test_self_consistent_ratios_closed_shells():
    assert Fraction(2) in models.self_consistent_ratios(6)
    assert Fraction(2) in models.self_consistent_ratios(12)
    assert Fraction(3) in models.self_consistent_ratios(9)
    with pytest.raises(DegeneracyError):
        models.oscillator_fill(Fraction(2), 5)


def test_matrix_family_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        models.MatrixFamilyModel(np.eye(2), [np.array([[0, 1], [0, 0]])])
