"""Driven fast-system evolution and slow classical trajectories.

Exact propagation uses the midpoint exponential ``exp(-i H(t + dt/2) dt / hbar)``
built from a batched eigendecomposition, which is unitary to round-off and
second order in ``dt``. Slow trajectories integrate either the effective
Hamiltonian (in kinetic momentum ``pi = P - A``, so only the gauge-invariant
curvature enters) or the mean-field coupled system, both with DOP853.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, ValidationError
from .geometry import (
    EffectiveField,
    _spd_inverse,
    effective_field,
    geometry_grid,
    induced_inertia,
    primitive_inertia,
)
from .models import FastModel
from .spectral import as_point, check_gap, eigensystem

MAX_EXACT_DIM = 512
DT_RULE = 0.1  # dt * spectral range / hbar must stay below this
DEFAULT_DT_FACTOR = 0.05
CHUNK = 2048


# ------------------------------------------------------------------ paths


def smootherstep(u):
    """C2 ramp 0 -> 1 on [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10 - 15 * u + 6 * u * u)


def _smootherstep_integral(u):
    u = np.clip(u, 0.0, 1.0)
    return u**4 * (2.5 - 3 * u + u * u)


@dataclass(frozen=True)
class DrivePath:
    """Prescribed slow motion ``X(t)`` with velocity ``V(t)`` on ``[0, duration]``."""

    position: Callable[[float], np.ndarray]
    velocity: Callable[[float], np.ndarray]
    duration: float
    tag: str = "path"


def linear_path(start, direction, speed: float, duration: float, ramp_time: float = 0.0) -> DrivePath:
    """Motion along ``direction`` at ``speed``, optionally switched on smoothly over ``ramp_time``."""
    x0 = as_point(start)
    d = np.asarray(direction, dtype=float).reshape(x0.shape)
    if ramp_time < 0 or ramp_time > duration:
        raise ValidationError("ramp_time must lie in [0, duration]")

    def distance(t):
        if ramp_time > 0 and t < ramp_time:
            return speed * ramp_time * _smootherstep_integral(t / ramp_time)
        return speed * (t - 0.5 * ramp_time)

    def rate(t):
        if ramp_time > 0 and t < ramp_time:
            return speed * smootherstep(t / ramp_time)
        return speed

    return DrivePath(lambda t: x0 + d * distance(t), lambda t: d * rate(t), float(duration),
                     tag=f"linear(v={speed:g})")


def circular_path(center, radius: float, period: float, plane: tuple[int, int] = (0, 1)) -> DrivePath:
    c = as_point(center)
    i, j = plane
    w = 2 * math.pi / period

    def pos(t):
        x = c.copy()
        x[i] += radius * math.cos(w * t)
        x[j] += radius * math.sin(w * t)
        return x

    def vel(t):
        v = np.zeros_like(c)
        v[i] = -radius * w * math.sin(w * t)
        v[j] = radius * w * math.cos(w * t)
        return v

    return DrivePath(pos, vel, float(period), tag=f"circle(r={radius:g})")


def there_and_back(path: DrivePath) -> DrivePath:
    """Traverse ``path`` and then retrace it, ending where it started."""
    T = path.duration

    def pos(t):
        return path.position(t if t <= T else 2 * T - t)

    def vel(t):
        return path.velocity(t) if t <= T else -path.velocity(2 * T - t)

    return DrivePath(pos, vel, 2 * T, tag=f"{path.tag}+reverse")


# ------------------------------------------------------------ records


@dataclass
class TrajectoryRecord:
    """Sampled time series. Quantum runs fill the fast-state columns,
    classical runs fill ``positions``/``momenta``/``energy``; coupled runs fill both.

    ``momenta`` are kinetic momenta (``P - A`` for effective runs).
    """

    times: np.ndarray
    level: int | None = None
    states: np.ndarray | None = None
    level_energy: np.ndarray | None = None
    energy_shift: np.ndarray | None = None
    leakage: np.ndarray | None = None
    positions: np.ndarray | None = None
    momenta: np.ndarray | None = None
    energy: np.ndarray | None = None
    truncated: bool = False
    meta: dict = field(default_factory=dict)

    def norm_drift(self) -> float:
        if self.states is None:
            return 0.0
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))

    def velocities(self, inverse_inertia: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.array([inverse_inertia(x) @ p for x, p in zip(self.positions, self.momenta)])


def _fast_diagnostics(model: FastModel, x: np.ndarray, psi: np.ndarray, level: int):
    h = model.hamiltonian(x)
    sd = eigensystem(h, x)
    e_exp = float(np.real(np.vdot(psi, h @ psi)))
    en = float(sd.energies[level])
    leak = 1.0 - abs(np.vdot(sd.state(level), psi)) ** 2
    return en, e_exp - en, min(max(leak, 0.0), 1.0)


def spectral_range(model: FastModel, x) -> float:
    e = np.linalg.eigvalsh(model.hamiltonian(as_point(x)))
    return float(e[-1] - e[0])


def check_time_step(model: FastModel, path: DrivePath, dt: float, rule: float = DT_RULE) -> None:
    """Raise unless ``dt * range / hbar < rule`` at the start, middle and end of ``path``."""
    for t in (0.0, 0.5 * path.duration, path.duration):
        r = spectral_range(model, path.position(t)) * dt / model.hbar
        if r >= rule:
            raise ValidationError(
                f"time step too large: dt * spectral range / hbar = {r:.3g} at t = {t:g} "
                f"(rule requires < {rule})"
            )


def default_time_step(model: FastModel, path: DrivePath, factor: float = DEFAULT_DT_FACTOR) -> float:
    widest = max(spectral_range(model, path.position(t)) for t in np.linspace(0, path.duration, 5))
    return factor * model.hbar / max(widest, 1e-300)


def driven_evolution(model: FastModel, path: DrivePath, psi0, dt: float, level: int = 0, stride: int = 1,
                     backward: bool = False, max_dim: int = MAX_EXACT_DIM) -> TrajectoryRecord:
    """Integrate ``i hbar dpsi/dt = H(X(t)) psi`` along ``path``.

    ``backward=True`` starts from ``psi0`` at ``t = duration`` and integrates
    back to ``t = 0`` (exactly undoing a forward run with the same ``dt``).
    Diagnostics are taken every ``stride`` steps and at the final step.
    """
    if model.dim > max_dim:
        raise ValidationError(f"dimension {model.dim} exceeds exact-propagation cap {max_dim}")
    psi = np.asarray(psi0, dtype=complex).copy()
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValidationError("initial state must be normalized")
    n_steps = max(1, int(round(path.duration / dt)))
    h_step = path.duration / n_steps
    check_time_step(model, path, h_step)
    sign = -1.0 if backward else 1.0

    def t_of(k: float) -> float:
        return path.duration - k * h_step if backward else k * h_step

    times, states, en, shift, leak = [], [], [], [], []

    def sample(k: int) -> None:
        t = t_of(k)
        e_n, de, lk = _fast_diagnostics(model, path.position(t), psi, level)
        times.append(t)
        states.append(psi.copy())
        en.append(e_n)
        shift.append(de)
        leak.append(lk)

    sample(0)
    hbar = model.hbar
    for k0 in range(0, n_steps, CHUNK):
        k1 = min(k0 + CHUNK, n_steps)
        hs = np.stack([model.hamiltonian(path.position(t_of(k + 0.5))) for k in range(k0, k1)])
        w, v = np.linalg.eigh(hs)
        widths = (w[:, -1] - w[:, 0]) * h_step / hbar
        if np.any(widths >= DT_RULE):
            bad = int(np.argmax(widths >= DT_RULE)) + k0
            raise ValidationError(f"time step too large at step {bad}: dt * range / hbar = {widths.max():.3g}")
        phases = np.exp(-1j * sign * w * h_step / hbar)
        props = np.einsum("kij,kj,klj->kil", v, phases, v.conj())
        for k in range(k0, k1):
            psi = props[k - k0] @ psi
            if (k + 1) % stride == 0 or k + 1 == n_steps:
                sample(k + 1)
    return TrajectoryRecord(
        times=np.array(times), level=level, states=np.array(states), level_energy=np.array(en),
        energy_shift=np.array(shift), leakage=np.array(leak),
        meta={"dt": h_step, "steps": n_steps, "backward": backward, "path": path.tag},
    )


# ------------------------------------------------------- sweeps and scans


@dataclass
class SweepRow:
    speed: float
    delta_e: float
    ratio: float
    reference: float


@dataclass
class VelocitySweep:
    rows: list[SweepRow]
    converged: bool
    tolerance: float

    @property
    def speeds(self) -> np.ndarray:
        return np.array([r.speed for r in self.rows])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    @property
    def delta_e(self) -> np.ndarray:
        return np.array([r.delta_e for r in self.rows])


def _min_gap(model: FastModel, x, level: int) -> float:
    e = np.linalg.eigvalsh(model.hamiltonian(as_point(x)))
    g = np.abs(e - e[level])
    g[level] = np.inf
    return float(g.min())


def steady_energy_shift(model: FastModel, start, direction, speed: float, level: int, duration: float,
                        transient_fraction: float = 0.2, dt: float | None = None,
                        stride: int = 10) -> tuple[float, float]:
    """Time-averaged ``<psi|H|psi> - E_n`` after a smooth switch-on.

    The velocity ramps up with a C2 profile during the first
    ``transient_fraction`` of the run, so the state follows the first-order
    dressed level; the average is taken over the remaining samples. Returns
    ``(delta_e, reference)`` where ``reference`` is ``d.I_ind.d V^2 / 2``
    averaged over the same segment.
    """
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    x0 = as_point(start)
    if speed == 0.0:
        return 0.0, 0.0
    ramp = transient_fraction * duration
    path = linear_path(x0, d, speed, duration, ramp_time=ramp)
    step = dt if dt is not None else default_time_step(model, path)
    psi0 = model.spectrum(x0).state(level)
    rec = driven_evolution(model, path, psi0, step, level=level, stride=stride)
    steady = rec.times >= ramp
    delta = float(np.mean(rec.energy_shift[steady]))
    probe_t = np.linspace(ramp, duration, 9)
    ref = float(np.mean([d @ induced_inertia(model, path.position(t), level) @ d for t in probe_t]))
    return delta, 0.5 * ref * speed**2


def velocity_sweep(model: FastModel, direction, speeds: Sequence[float], level: int, start,
                   n_periods: float = 100.0, transient_fraction: float = 0.2, tol: float = 0.01,
                   dt: float | None = None, stride: int = 10, workers: int = 1) -> VelocitySweep:
    """Steady energy shift versus drive speed; ``ratio = 2 dE / V^2`` tends to ``d.I_ind.d``.

    Each run lasts ``n_periods`` oscillation periods ``2 pi hbar / gap`` of
    the tracked level at ``start``. ``converged`` is False when the last two
    nonzero-speed ratios differ by more than ``tol`` (relative).
    """
    speeds = [float(v) for v in speeds]
    if any(a < b for a, b in zip(speeds, speeds[1:])):
        raise ValidationError("speeds must be sorted in descending order")
    gap = _min_gap(model, start, level)
    duration = n_periods * 2 * math.pi * model.hbar / gap

    def one(v: float) -> SweepRow:
        de, ref = steady_energy_shift(model, start, direction, v, level, duration, transient_fraction, dt, stride)
        if v == 0.0:
            return SweepRow(v, 0.0, math.nan, math.nan)
        return SweepRow(v, de, 2 * de / v**2, 2 * ref / v**2)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, speeds))
    else:
        rows = [one(v) for v in speeds]
    live = [r.ratio for r in rows if r.speed > 0]
    converged = len(live) < 2 or abs(live[-1] - live[-2]) <= tol * abs(live[-1])
    return VelocitySweep(rows, converged, tol)


@dataclass
class LeakageRow:
    rate: float
    leakage: float
    max_leakage: float
    censored: bool


def leakage_scan(model: FastModel, rates: Sequence[float], level: int = 0, center=(0.0,), direction=(1.0,),
                 half_span: float = 8.0, dt_factor: float = DEFAULT_DT_FACTOR, floor: float = 1e-14,
                 stride: int = 50, workers: int = 1) -> list[LeakageRow]:
    """Sweep through ``center`` at constant rates and record the residual leakage.

    The slow coordinate moves from ``center - half_span d`` to
    ``center + half_span d``; the state starts in level ``level``. Leakage
    below ``floor`` is flagged as censored.
    """
    c = as_point(center)
    d = np.asarray(direction, dtype=float).reshape(c.shape)
    d = d / np.linalg.norm(d)
    x_start = c - half_span * d

    def one(rate: float) -> LeakageRow:
        if rate <= 0:
            raise ValidationError("sweep rates must be positive")
        path = linear_path(x_start, d, rate, 2 * half_span / rate)
        dt = default_time_step(model, path, dt_factor)
        psi0 = model.spectrum(x_start).state(level)
        rec = driven_evolution(model, path, psi0, dt, level=level, stride=stride)
        final = float(rec.leakage[-1])
        return LeakageRow(rate, max(final, 0.0), float(rec.leakage.max()), final < floor)

    rates = [float(r) for r in rates]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, rates))
    return [one(r) for r in rates]


# -------------------------------------------------------- field providers


@dataclass(frozen=True)
class FieldSample:
    v_bo: float
    inverse_inertia: np.ndarray
    phi: float
    curvature: np.ndarray
    grad_v: np.ndarray
    grad_inverse_inertia: np.ndarray  # [i] -> dQ/dX_i
    grad_phi: np.ndarray


class DirectFields:
    """Effective fields evaluated from the model at every call.

    ``V_BO`` gradients are exact (Hellmann-Feynman); ``Q`` and ``Phi``
    gradients use central differences with step ``h``.
    """

    def __init__(self, model: FastModel, level: int, primitive, h: float = 1e-5):
        self.model = model
        self.level = level
        self.primitive = primitive_inertia(primitive, model.n_params)
        self.h = h
        self.n_params = model.n_params

    def field_at(self, x) -> EffectiveField:
        return effective_field(self.model, x, self.level, self.primitive)

    def contains(self, x) -> bool:
        return True

    def evaluate(self, x) -> FieldSample:
        x = as_point(x)
        ef = self.field_at(x)
        sd = self.model.spectrum(x)
        vn = sd.state(self.level)
        grad_v = np.array([np.real(np.vdot(vn, g @ vn)) for g in self.model.gradients(x)])
        d = self.n_params
        dq = np.empty((d, d, d))
        dphi = np.empty(d)
        for i in range(d):
            e = np.zeros(d)
            e[i] = self.h
            fp, fm = self.field_at(x + e), self.field_at(x - e)
            dq[i] = (fp.inverse_inertia - fm.inverse_inertia) / (2 * self.h)
            dphi[i] = (fp.phi_total - fm.phi_total) / (2 * self.h)
        return FieldSample(ef.v_bo, ef.inverse_inertia, ef.phi_total, ef.curvature, grad_v, dq, dphi)


def _multilinear(axes: Sequence[np.ndarray], values: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Multilinear interpolant and its gradient. ``values`` has shape grid + (k,)."""
    d = len(axes)
    lo, frac, width = [], [], []
    for a, xi in zip(axes, x):
        i = int(np.clip(np.searchsorted(a, xi) - 1, 0, len(a) - 2))
        lo.append(i)
        width.append(a[i + 1] - a[i])
        frac.append((xi - a[i]) / width[-1])
    val = np.zeros(values.shape[-1])
    grad = np.zeros((d, values.shape[-1]))
    for corner in itertools.product((0, 1), repeat=d):
        ws = [f if c else 1 - f for c, f in zip(corner, frac)]
        v = values[tuple(i + c for i, c in zip(lo, corner))]
        val += np.prod(ws) * v
        for k in range(d):
            dw = (1.0 if corner[k] else -1.0) / width[k]
            grad[k] += dw * np.prod([w for j, w in enumerate(ws) if j != k]) * v
    return val, grad


class GridFields:
    """Effective fields interpolated from a precomputed tensor-product grid.

    ``method="linear"`` is multilinear with exact piecewise gradients;
    ``method="cubic"`` uses cubic splines with analytic spline gradients.
    """

    def __init__(self, axes: Sequence[Sequence[float]], fields: Sequence[EffectiveField], method: str = "cubic"):
        self.axes = [np.asarray(a, dtype=float) for a in axes]
        self.n_params = len(self.axes)
        shape = tuple(a.size for a in self.axes)
        if len(fields) != int(np.prod(shape)):
            raise ValidationError(f"expected {int(np.prod(shape))} grid fields, got {len(fields)}")
        d = self.n_params
        packed = np.array([
            np.concatenate(([f.v_bo, f.phi_total], f.inverse_inertia.ravel(), f.curvature.ravel()))
            for f in fields
        ])
        self._values = packed.reshape(shape + (2 + 2 * d * d,))
        self.method = method
        if method == "cubic":
            self._spline = RegularGridInterpolator(self.axes, self._values, method="cubic",
                                                   bounds_error=False, fill_value=None)
        elif method != "linear":
            raise ValidationError(f"unknown interpolation method {method!r}")

    @classmethod
    def from_model(cls, model: FastModel, axes, level: int, primitive, method: str = "cubic", workers: int = 1):
        axes = [np.asarray(a, dtype=float) for a in axes]
        pts = [np.array(p) for p in itertools.product(*axes)]
        res = geometry_grid(model, pts, level, primitive, workers=workers, stop_on_error=True)
        return cls(axes, [r.field for r in res], method)

    def contains(self, x) -> bool:
        return all(a[0] <= xi <= a[-1] for a, xi in zip(self.axes, x))

    def _interp(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.method == "linear":
            return _multilinear(self.axes, self._values, x)
        val = self._spline(x[None, :])[0]
        grad = np.empty((self.n_params, val.size))
        for k in range(self.n_params):
            nu = np.zeros(self.n_params, dtype=int)
            nu[k] = 1
            grad[k] = self._spline(x[None, :], nu=nu)[0]
        return val, grad

    def evaluate(self, x) -> FieldSample:
        x = as_point(x)
        d = self.n_params
        val, grad = self._interp(x)
        q = val[2:2 + d * d].reshape(d, d)
        f = val[2 + d * d:].reshape(d, d)
        dq = grad[:, 2:2 + d * d].reshape(d, d, d)
        return FieldSample(float(val[0]), 0.5 * (q + q.T), float(val[1]), 0.5 * (f - f.T),
                           grad[:, 0], 0.5 * (dq + dq.transpose(0, 2, 1)), grad[:, 1])


class UniformFields:
    """Position-independent fields; handy for exactly solvable checks."""

    def __init__(self, inverse_inertia, curvature=None, v_bo: float = 0.0, phi: float = 0.0):
        self.q = np.atleast_2d(np.asarray(inverse_inertia, dtype=float))
        d = self.q.shape[0]
        self.n_params = d
        self.f = np.zeros((d, d)) if curvature is None else np.atleast_2d(np.asarray(curvature, dtype=float))
        self.v = v_bo
        self.phi = phi

    def contains(self, x) -> bool:
        return True

    def evaluate(self, x) -> FieldSample:
        d = self.n_params
        return FieldSample(self.v, self.q, self.phi, self.f, np.zeros(d), np.zeros((d, d, d)), np.zeros(d))


def effective_trajectory(fields, x0, p0, duration: float, dt: float, external_force=None,
                         rtol: float = 1e-11, atol: float = 1e-13) -> TrajectoryRecord:
    """Classical motion under ``V_BO + pi.Q.pi/2 + Phi`` with ``pi = P - A``.

    ``p0`` is the initial kinetic momentum. The curvature enters as the
    velocity-dependent force ``F_ij dX_j/dt``. A constant ``external_force``
    adds the potential ``-f.X`` to the conserved energy. Samples every ``dt``;
    the run stops early (``truncated=True``) if ``fields`` stops covering X.
    """
    x0 = as_point(x0)
    d = x0.size
    f_ext = np.zeros(d) if external_force is None else np.asarray(external_force, dtype=float).reshape(d)

    def rhs(t, y):
        x, pi = y[:d], y[d:]
        s = fields.evaluate(x)
        xdot = s.inverse_inertia @ pi
        pidot = (-s.grad_v - s.grad_phi - 0.5 * np.einsum("j,ijk,k->i", pi, s.grad_inverse_inertia, pi)
                 + s.curvature @ xdot + f_ext)
        return np.concatenate((xdot, pidot))

    def energy(x, pi) -> float:
        s = fields.evaluate(x)
        return s.v_bo + 0.5 * pi @ s.inverse_inertia @ pi + s.phi - f_ext @ x

    events = None
    if hasattr(fields, "axes"):
        lo = np.array([a[0] for a in fields.axes])
        hi = np.array([a[-1] for a in fields.axes])

        def leave(t, y):
            x = y[:d]
            return float(min(np.min(x - lo), np.min(hi - x)))

        leave.terminal = True
        leave.direction = -1
        events = [leave]
        if not fields.contains(x0):
            raise DomainError(f"start point {x0} lies outside the field grid")

    n_samples = int(round(duration / dt))
    t_eval = np.linspace(0.0, n_samples * dt, n_samples + 1)
    y0 = np.concatenate((x0, np.asarray(p0, dtype=float).reshape(d)))
    sol = solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol,
                    events=events)
    times, ys = sol.t, sol.y
    truncated = sol.status == 1
    if truncated:
        # keep the exit point itself as the final sample
        times = np.append(times, sol.t_events[0][0])
        ys = np.column_stack((ys, sol.y_events[0][0]))
    xs, ps = ys[:d].T, ys[d:].T
    en = np.array([energy(x, p) for x, p in zip(xs, ps)])
    return TrajectoryRecord(times=times, positions=xs, momenta=ps, energy=en, truncated=truncated,
                            meta={"solver": "DOP853", "rtol": rtol, "message": sol.message})


def coupled_reference(model: FastModel, primitive, x0, p0, psi0, duration: float, dt: float, level: int = 0,
                      rtol: float = 1e-11, atol: float = 1e-13) -> TrajectoryRecord:
    """Mean-field coupled motion: ``dX/dt = Q P``, ``dP/dt = -<psi|dH|psi>``, ``i hbar dpsi/dt = H(X) psi``.

    ``Q`` is the primitive inverse inertia. ``energy`` holds the conserved
    total ``P.Q.P/2 + <psi|H|psi>``.
    """
    x0 = as_point(x0)
    d = x0.size
    n = model.dim
    q = _spd_inverse(primitive_inertia(primitive, d), "primitive inertia")
    hbar = model.hbar
    psi0 = np.asarray(psi0, dtype=complex)

    def rhs(t, y):
        x, p = y[:d], y[d:2 * d]
        psi = y[2 * d:2 * d + n] + 1j * y[2 * d + n:]
        h = model.hamiltonian(x)
        force = np.array([-np.real(np.vdot(psi, g @ psi)) for g in model.gradients(x)])
        dpsi = -1j * (h @ psi) / hbar
        return np.concatenate((q @ p, force, dpsi.real, dpsi.imag))

    n_samples = int(round(duration / dt))
    t_eval = np.linspace(0.0, n_samples * dt, n_samples + 1)
    y0 = np.concatenate((x0, np.asarray(p0, dtype=float).reshape(d), psi0.real, psi0.imag))
    sol = solve_ivp(rhs, (0.0, t_eval[-1]), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
    xs, ps = sol.y[:d].T, sol.y[d:2 * d].T
    states = (sol.y[2 * d:2 * d + n] + 1j * sol.y[2 * d + n:]).T
    en_n, shift, leak, total = [], [], [], []
    for x, p, psi in zip(xs, ps, states):
        e_n, de, lk = _fast_diagnostics(model, x, psi, level)
        en_n.append(e_n)
        shift.append(de)
        leak.append(lk)
        total.append(0.5 * p @ q @ p + e_n + de)
    return TrajectoryRecord(times=sol.t, level=level, states=states, level_energy=np.array(en_n),
                            energy_shift=np.array(shift), leakage=np.array(leak), positions=xs, momenta=ps,
                            energy=np.array(total), meta={"solver": "DOP853", "rtol": rtol})


# ---------------------------------------------------------- order audit


@dataclass
class ActionAudit:
    speed: float
    period: float
    scalar_action: float
    berry_action: float
    berry_phase: float
    inertial_action: float


def action_order_audit(fields: DirectFields, center, speed: float, period: float, plane: tuple[int, int] = (0, 1),
                       n_quad: int = 128) -> ActionAudit:
    """Accumulate the three geometric actions over one circuit of a circle.

    The circle has period ``period`` and radius ``speed * period / 2 pi``.
    Returns ``int Phi dt``, ``oint A.dX`` (and its phase ``/hbar``) and
    ``int V.I_ind.V / 2 dt``, by the periodic trapezoid rule.
    """
    radius = speed * period / (2 * math.pi)
    path = circular_path(center, radius, period, plane)
    hbar = fields.model.hbar
    ts = np.arange(n_quad) * period / n_quad
    w = period / n_quad
    scalar = berry = inertial = 0.0
    for t in ts:
        ef = fields.field_at(path.position(t))
        v = path.velocity(t)
        scalar += w * ef.phi_total
        berry += w * float(ef.connection @ v)
        inertial += w * 0.5 * float(v @ ef.induced_inertia @ v)
    return ActionAudit(speed, period, scalar, berry, berry / hbar, inertial)


def check_level_nondegenerate(model: FastModel, x, level: int) -> None:
    check_gap(np.linalg.eigvalsh(model.hamiltonian(as_point(x))), level)
