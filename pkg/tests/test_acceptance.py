"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line with its measured values."""

import math
import time

import numpy as np
import pytest

from adiabatic_geometry import analysis, dynamics, geometry, models
from adiabatic_geometry.spectral import SpectralData


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok

    return emit


def test_01_spin_inertia_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for spin in (0.5, 1.0, 1.5):
        for gb, kappa in ((1.0, 1.0), (2.5, 0.7), (10.0, 3.0)):
            model = models.planar_rotation_spin(spin, gb, kappa)
            scale = spin * kappa**2 / gb  # largest |m| reference, used for m = 0
            for n in range(model.dim):
                m = model.m_of_level(n)
                want = m * kappa**2 / gb
                got = geometry.induced_inertia(model, [0.37], n)[0, 0]
                worst = max(worst, abs(got - want) / max(abs(want), scale))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 1.0
    assert report(1, "spin inertia = hbar^2 m kappa^2 / gB", ok,
                  f"max relative error {worst:.2e} (< 1e-8), {elapsed:.3f} s (< 1 s)")


def test_02_velocity_sweep_convergence(report):
    t0 = time.perf_counter()
    model = models.planar_rotation_spin(1.0, 1.0, 1.0)
    speeds = np.geomspace(0.2, 0.02, 8)
    sw = dynamics.velocity_sweep(model, [1.0], speeds, 0, [0.0])
    want = geometry.induced_inertia(model, [0.0], 0)[0, 0]
    last = sw.ratios[-1]
    slope = analysis.fit_power_law(sw.speeds, sw.delta_e).exponent
    elapsed = time.perf_counter() - t0
    ok = abs(last / want - 1) < 0.01 and abs(slope - 2) <= 0.05 and elapsed < 120
    assert report(2, "velocity sweep ratio -> induced inertia", ok,
                  f"ratio {last:.5f} vs {want:.5f} (1%), log-slope {slope:.4f} (2 +- 0.05), {elapsed:.1f} s")


def test_03_crossing_exponents(report):
    t0 = time.perf_counter()
    model = models.affine_two_level([0, 0, 0], np.eye(3))
    u = np.array([1.0, 2.0, 2.0]) / 3
    radii = np.geomspace(0.1, 1.0, 12)
    root_g, phi, norm_i = [], [], []
    for r in radii:
        gt = geometry.geometric_tensors(model, r * u, 0, primitive=1.0)
        root_g.append(math.sqrt(np.trace(gt.metric)))
        phi.append(gt.scalar_potential)
        norm_i.append(np.linalg.norm(gt.induced_inertia, 2))
    exps = [analysis.fit_power_law(radii, v).exponent for v in (root_g, phi, norm_i)]
    elapsed = time.perf_counter() - t0
    ok = all(abs(e - w) <= 0.05 for e, w in zip(exps, (-1, -2, -3))) and elapsed < 10
    assert report(3, "crossing exponents", ok,
                  "sqrt(tr g) {:.4f}, Phi {:.4f}, |I_ind| {:.4f} (-1/-2/-3 +- 0.05), {:.2f} s".format(*exps, elapsed))


def test_04_galilean_and_trk(report):
    t0 = time.perf_counter()
    prof = models.harmonic_well(1.0, 1.0)
    out = []
    for n_points, spacing in ((481, 0.05), (961, 0.025)):
        m = models.moving_well_model(prof, 1.0, n_points, spacing)
        inertia = geometry.induced_inertia(m, [0.0], 0)[0, 0] / m.mass
        out.append((inertia, analysis.trk_sum(m, 0)))
    (i1, s1), (i2, s2) = out
    red_i = abs(i1 - 1) / abs(i2 - 1)
    red_s = abs(s1 - 1) / abs(s2 - 1)
    elapsed = time.perf_counter() - t0
    ok = abs(i1 - 1) <= 0.01 and abs(s1 - 1) <= 0.01 and red_i >= 3 and red_s >= 3 and elapsed < 30
    assert report(4, "moving well I_XX/m and TRK sum", ok,
                  f"I/m {i1:.6f}, TRK {s1:.6f} (1 +- 0.01); halving reduces errors {red_i:.2f}x, {red_s:.2f}x "
                  f"(>= 3), {elapsed:.1f} s")


def test_05_inglis_rigid_body(report):
    t0 = time.perf_counter()
    ratios = {}
    for omega_ratio, n_occ in ((2, 6), (2, 12), (3, 9)):
        assert omega_ratio in models.self_consistent_ratios(n_occ)
        m = models.cranked_oscillator_model(float(omega_ratio), 1.0, 1.0, n_basis=24)
        ratios[(omega_ratio, n_occ)] = models.inglis_inertia(m, [0.0], n_occ)[0, 0] / models.rigid_body_inertia(m, n_occ)
    sph = models.cranked_oscillator_model(1.0, 1.0, 1.0, n_basis=24)
    spherical = max(abs(models.inglis_inertia(sph, [0.0], n)[0, 0]) for n in (1, 3, 6, 10))
    elapsed = time.perf_counter() - t0
    good = sum(0.98 <= r <= 1.02 for r in ratios.values())
    ok = good >= 2 and spherical <= 1e-10 and elapsed < 60
    detail = ", ".join(f"w_x/w_z={k[0]} N={k[1]}: {v:.6f}" for k, v in ratios.items())
    assert report(5, "Inglis / rigid body at self-consistent deformation", ok,
                  f"{detail}; spherical {spherical:.1e}, {elapsed:.2f} s")


class _Sum(models.FastModel):
    def __init__(self, a, b):
        self.a, self.b, self.n_params, self.name = a, b, 1, "sum"

    @property
    def dim(self):
        return self.a.dim * self.b.dim

    def hamiltonian(self, x):
        return np.kron(self.a.hamiltonian(x), np.eye(self.b.dim)) + np.kron(np.eye(self.a.dim), self.b.hamiltonian(x))

    def gradient(self, x, i):
        return np.kron(self.a.gradient(x, i), np.eye(self.b.dim)) + np.kron(np.eye(self.a.dim), self.b.gradient(x, i))


def test_06_gauge_and_convention_independence(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        model = models.random_matrix_family(6, 3, rng=rng)
        x = rng.normal(size=3)
        sd = model.spectrum(x)
        grads = model.gradients(x)
        n = int(rng.integers(0, 6))
        spun = SpectralData(sd.energies, sd.states * np.exp(1j * rng.uniform(0, 2 * np.pi, 6)), sd.point, "random")
        a = geometry.tensors_from_spectrum(sd, grads, n, 1.0, primitive=50.0)
        b = geometry.tensors_from_spectrum(spun, grads, n, 1.0, primitive=50.0, with_connection=False)
        for p, q in ((a.metric, b.metric), (a.curvature, b.curvature), (a.induced_inertia, b.induced_inertia),
                     (a.scalar_potential, b.scalar_potential)):
            p, q = np.atleast_1d(p), np.atleast_1d(q)
            worst = max(worst, np.max(np.abs(p - q)) / np.max(np.abs(p)))
    main = models.planar_rotation_spin(1.0, 3.0, 0.7)
    spectator = models.planar_rotation_spin(0.5, 2.0, 1.1)
    delta = geometry.induced_inertia(spectator, [0.2], 0)[0, 0]
    mass = 5.0
    plain = geometry.effective_field(main, [0.2], 0, mass).total_inertia
    shuffled = geometry.effective_field(_Sum(main, spectator), [0.2], 0, mass - delta).total_inertia
    shuffle = float(np.max(np.abs(plain - shuffled)) / np.max(np.abs(plain)))
    ok = worst < 1e-12 and shuffle < 1e-10
    assert report(6, "gauge and convention independence", ok,
                  f"rephasing changes tensors by {worst:.1e} (< 1e-12); shuffle changes I_total by {shuffle:.1e} "
                  f"(< 1e-10)")


def test_07_positivity_and_sign(report):
    rng = np.random.default_rng(7)
    worst = math.inf
    for _ in range(100):
        model = models.random_matrix_family(6, 3, rng=rng)
        inertia = geometry.induced_inertia(model, rng.normal(size=3), 0)
        worst = min(worst, np.linalg.eigvalsh(inertia).min() / np.trace(inertia))
    spin = models.planar_rotation_spin(1.5, 1.0, 1.0)
    top = geometry.induced_inertia(spin, [0.2], spin.dim - 1)[0, 0]
    ok = worst >= -1e-12 and top < 0
    assert report(7, "ground level positive, top spin level negative", ok,
                  f"min eig/trace over 100 families {worst:.3e} (>= -1e-12); top-level inertia {top:.3f} (< 0)")


def test_08_exponential_leakage(report):
    t0 = time.perf_counter()
    gap = 0.5
    model = models.affine_two_level([gap, 0.0, 0.0], [[0.0], [0.0], [1.0]])
    rates = np.geomspace(2.0, 0.2, 10)
    rows = dynamics.leakage_scan(model, rates, half_span=20)
    leak = np.array([r.leakage for r in rows])
    corr = analysis.log_linearity(1 / rates, leak)
    lz = np.array([analysis.landau_zener(gap, v) for v in rates])
    rel = np.abs(leak[-3:] / lz[-3:] - 1)
    elapsed = time.perf_counter() - t0
    ok = corr < -0.999 and np.all(rel < 0.1) and elapsed < 120
    assert report(8, "exponential leakage / Landau-Zener", ok,
                  f"log-linearity {corr:.7f} (< -0.999); slowest three vs LZ {np.array2string(rel, precision=1)} "
                  f"(< 10%), {elapsed:.1f} s")


def test_09_order_audit(report):
    model = models.affine_spin(0.5, [0, 0, 1.0], [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    fields = dynamics.DirectFields(model, 0, 5.0)
    v, t, s, b, i = [], [], [], [], []
    for speed in (0.01, 0.02, 0.04):
        for period in (1.0, 2.0, 4.0):
            a = dynamics.action_order_audit(fields, [0.3, 0.2], speed, period)
            v.append(speed), t.append(period)
            s.append(a.scalar_action), b.append(a.berry_phase), i.append(a.inertial_action)
    fits = [analysis.fit_speed_period(v, t, y) for y in (s, b, i)]
    got = [(f.speed_exponent, f.period_exponent) for f in fits]
    want = [(0, 1), (2, 2), (2, 1)]
    ok = all(abs(g[0] - w[0]) <= 0.05 and abs(g[1] - w[1]) <= 0.05 for g, w in zip(got, want))
    detail = "; ".join(f"{name} V^{g[0]:.3f} T^{g[1]:.3f}" for name, g in zip(("scalar", "Berry", "inertial"), got))
    assert report(9, "order audit exponents", ok, detail + " (T, V^2 T^2, V^2 T; +- 0.05)")


def _transit_deviation(model, mass, half_length=3.0, kinetic=1.0):
    v0 = math.sqrt(2 * kinetic / mass)
    duration = 2 * half_length / v0
    dt = duration / 400
    x0 = np.array([-half_length])
    psi0 = model.spectrum(x0).state(0)
    coupled = dynamics.coupled_reference(model, mass, x0, [mass * v0], psi0, duration, dt)
    fields = dynamics.GridFields.from_model(model, [np.linspace(-half_length - 1, half_length + 1, 401)], 0, mass)
    pi0 = (mass + geometry.induced_inertia(model, x0, 0)[0, 0]) * v0  # same initial velocity
    eff = dynamics.effective_trajectory(fields, x0, [pi0], duration, dt)
    return float(np.max(np.abs(eff.positions[:, 0] - coupled.positions[:, 0])))


def test_10_effective_vs_coupled(report):
    t0 = time.perf_counter()
    model = models.affine_spin(0.5, [0.0, 0.0, 1.0], [[1.0], [0.0], [0.0]])
    masses = [25.0 * 4**k for k in range(4)]
    devs = [_transit_deviation(model, m) for m in masses]
    ratios = [b / a for a, b in zip(devs, devs[1:])]
    elapsed = time.perf_counter() - t0
    ok = all(abs(r - 0.5) <= 0.125 for r in ratios) and elapsed < 300
    assert report(10, "effective vs coupled trajectory, mass x4", ok,
                  "deviations " + ", ".join(f"{d:.3e}" for d in devs)
                  + "; ratios " + ", ".join(f"{r:.3f}" for r in ratios) + f" (0.5 +- 25%), {elapsed:.1f} s")
