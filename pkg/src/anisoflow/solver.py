"""Pseudo-spectral integration of the mollified anisotropic barotropic system.

Unknowns are the density and the momentum ``m = rho u``.  The momentum
balance is

    m_t + div(m (x) u) + grad P = mu Lap u + (mu + lam) grad div u
                                  + w_d * div(s eps : grad(w_d * u))

with ``w_d *`` the Gaussian mollifier.  All nonlinear products are
dealiased with the 2/3 rule.  Time stepping is the three-stage SSP
Runge-Kutta scheme; three running integrals used by the energy balance
are advanced with the same stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUpError, CadenceError, DomainError, PositivityError, RegularizationError, SolverFailure
from .scalar_laws import PressureLaw, h1_rel
from .spectral import SpectralGrid, get_grid
from .tensor4 import ViscosityTensor, coercivity_bounds

# accumulator slots: int ||grad u||^2, int ||div u||^2, int int s eps:grad u_d:grad u_d
N_ACC = 3


@dataclass(frozen=True)
class SolverConfig:
    n: int = 64
    d: int = 2
    delta: float = 0.1
    cfl: float = 0.5
    t_end: float = 1.0
    rho_floor: float = 1e-6
    dealias: bool = True
    cadence: float = 0.1
    regularize: bool = True

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.delta > 0:
            raise DomainError(f"delta must be > 0, got {self.delta}")
        if not self.t_end >= 0:
            raise DomainError(f"t_end must be >= 0, got {self.t_end}")
        if not self.cadence > 0:
            raise DomainError(f"cadence must be > 0, got {self.cadence}")
        if not self.rho_floor >= 0:
            raise DomainError(f"rho_floor must be >= 0, got {self.rho_floor}")


@dataclass
class FluidState:
    rho: np.ndarray
    m: np.ndarray
    t: float = 0.0
    acc: np.ndarray = field(default_factory=lambda: np.zeros(N_ACC))

    def copy(self):
        return FluidState(self.rho.copy(), self.m.copy(), self.t, self.acc.copy())


class Model:
    """Bundle of grid, pressure law, tensor and mollification width."""

    def __init__(self, grid: SpectralGrid, law: PressureLaw, tensor: ViscosityTensor, delta: float,
                 dealias: bool = True, rho_floor: float = 1e-6):
        if tensor.d != grid.d:
            raise DomainError(f"tensor dimension {tensor.d} does not match grid dimension {grid.d}")
        if not delta > 0:
            raise DomainError(f"delta must be > 0, got {delta}")
        self.grid = grid
        self.law = law
        self.tensor = tensor
        self.delta = float(delta)
        self.rho_floor = rho_floor
        self.mask = grid.dealias_mask if dealias else np.ones(grid.spec_shape, dtype=bool)
        self.sym = grid.mollifier_symbol(self.delta)
        self.mu = tensor.mu
        self.lam = tensor.lam
        self._aniso = not tensor.is_zero
        self._profile = tensor.modulation.axis is not None

    # helpers on the Fourier side

    def _trunc(self, f):
        g = self.grid
        return g.inverse(self.mask * g.forward(f))

    def velocity(self, rho, m):
        return self._trunc(m / rho)

    def check(self, rho, m, t):
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(m))):
            raise BlowUpError("non-finite values in state", t)
        rmin = float(np.min(rho))
        if rmin <= self.rho_floor:
            raise PositivityError(f"density minimum {rmin:.6g} below floor {self.rho_floor:g}", t)

    def stress(self, u_hat, t):
        """(grad u_d, S) with S_ij = s eps_ijkl d_l u_d^k."""
        g = self.grid
        d = g.d
        ud_hat = self.sym * u_hat
        gd = np.array([[g.inverse(1j * g.kd[l] * ud_hat[k]) for l in range(d)] for k in range(d)])
        s = np.einsum("ijkl,kl...->ij...", self.tensor.core, gd)
        if not self.tensor.modulation.is_const:
            s = self.tensor.scale(t, g.x) * s
            if self._profile:
                s = self._trunc(s)
        return gd, s

    def force_hat(self, rho, u_hat, t, with_stress=False):
        """Fourier coefficients of the momentum forcing without transport."""
        g = self.grid
        kd = g.kd
        mu, lam = self.mu, self.lam
        div_hat = sum(1j * kd[j] * u_hat[j] for j in range(g.d))
        f_hat = np.array([-mu * g.k2 * u_hat[i] + (mu + lam) * 1j * kd[i] * div_hat for i in range(g.d)])
        p_hat = self.mask * g.forward(self.law.a * rho**self.law.gamma)
        f_hat -= np.array([1j * kd[i] * p_hat for i in range(g.d)])
        gd = s = None
        if self._aniso:
            gd, s = self.stress(u_hat, t)
            s_hat = g.forward(s)
            f_hat += np.array([self.sym * sum(1j * kd[j] * s_hat[i, j] for j in range(g.d)) for i in range(g.d)])
        if with_stress:
            return f_hat, gd, s
        return f_hat

    def rhs(self, rho, m, t):
        """(d_rho, d_m, d_acc)."""
        g = self.grid
        d = g.d
        kd = g.kd
        self.check(rho, m, t)
        u = self.velocity(rho, m)
        u_hat = g.forward(u)
        f_hat, gd, s = self.force_hat(rho, u_hat, t, with_stress=True)

        m_hat = g.forward(m)
        d_rho = g.inverse(-sum(1j * kd[j] * m_hat[j] for j in range(d)))
        flux = {}
        for i in range(d):
            for j in range(i, d):
                flux[i, j] = self.mask * g.forward(m[i] * u[j])
        for i in range(d):
            f_hat[i] -= sum(1j * kd[j] * flux[min(i, j), max(i, j)] for j in range(d))
        d_m = g.inverse(f_hat)

        w = g.rfft_weight * g.cell / g.n**d
        grad2 = self._grad_sq(u_hat)
        div_hat = sum(1j * kd[j] * u_hat[j] for j in range(d))
        div2 = float(np.sum(w * np.abs(div_hat) ** 2))
        aniso = float(np.sum(s * gd) * g.cell) if self._aniso else 0.0
        return d_rho, d_m, np.array([grad2, div2, aniso])

    def _grad_sq(self, u_hat):
        g = self.grid
        w = g.rfft_weight * g.cell / g.n**g.d
        kd2 = np.sum(g.kd**2, axis=0)
        return float(np.sum(w * kd2 * np.sum(np.abs(u_hat) ** 2, axis=0)))

    def material_derivative(self, rho, m, t):
        """u_dot = (viscous + anisotropic - grad P) / rho, dealiased."""
        self.check(rho, m, t)
        g = self.grid
        u_hat = g.forward(self.velocity(rho, m))
        return self._trunc(g.inverse(self.force_hat(rho, u_hat, t)) / rho)

    def stable_dt(self, rho, m, cfl, t=0.0, eps_upper=None):
        g = self.grid
        self.check(rho, m, t)
        u = self.velocity(rho, m)
        rmax, rmin = float(np.max(rho)), float(np.min(rho))
        c_max = math.sqrt(self.law.gamma * self.law.a * rmax ** (self.law.gamma - 1))
        umax = float(np.max(g.pointwise_norm(u)))
        if eps_upper is None:
            eps_upper = coercivity_bounds(self.tensor, check=False).eps_upper
        nu_max = (2 * self.mu + self.lam + eps_upper) / rmin
        dt_adv = g.h / (umax + c_max)
        dt_diff = g.h**2 / (2 * g.d * nu_max) if nu_max > 0 else np.inf
        return cfl * min(dt_adv, dt_diff)

    def step(self, state: FluidState, dt: float) -> FluidState:
        """One SSP-RK3 step (Shu-Osher form)."""
        r0, m0, a0, t = state.rho, state.m, state.acc, state.t
        dr, dm, da = self.rhs(r0, m0, t)
        r1, m1, a1 = r0 + dt * dr, m0 + dt * dm, a0 + dt * da
        dr, dm, da = self.rhs(r1, m1, t + dt)
        r2 = 0.75 * r0 + 0.25 * (r1 + dt * dr)
        m2 = 0.75 * m0 + 0.25 * (m1 + dt * dm)
        a2 = 0.75 * a0 + 0.25 * (a1 + dt * da)
        dr, dm, da = self.rhs(r2, m2, t + 0.5 * dt)
        r3 = r0 / 3 + 2.0 / 3.0 * (r2 + dt * dr)
        m3 = m0 / 3 + 2.0 / 3.0 * (m2 + dt * dm)
        a3 = a0 / 3 + 2.0 / 3.0 * (a2 + dt * da)
        self.check(r3, m3, t + dt)
        return FluidState(r3, m3, t + dt, a3)


def make_model(config: SolverConfig, law: PressureLaw, tensor: ViscosityTensor) -> Model:
    return Model(get_grid(config.d, config.n), law, tensor, config.delta, config.dealias, config.rho_floor)


def assemble_rhs(state: FluidState, tensor: ViscosityTensor, law: PressureLaw, delta: float, grid: SpectralGrid | None = None,
                 dealias: bool = True, rho_floor: float = 1e-6):
    """(d_rho, d_m) at state.t."""
    grid = grid or get_grid(tensor.d, state.rho.shape[-1])
    d_rho, d_m, _ = Model(grid, law, tensor, delta, dealias, rho_floor).rhs(state.rho, state.m, state.t)
    return d_rho, d_m


def material_derivative(state: FluidState, tensor: ViscosityTensor, law: PressureLaw, delta: float, grid: SpectralGrid | None = None,
                        dealias: bool = True, rho_floor: float = 1e-6):
    grid = grid or get_grid(tensor.d, state.rho.shape[-1])
    return Model(grid, law, tensor, delta, dealias, rho_floor).material_derivative(state.rho, state.m, state.t)


def step(state: FluidState, config: SolverConfig, tensor: ViscosityTensor, law: PressureLaw, dt: float | None = None):
    """Advance one step; dt defaults to the CFL limit."""
    model = make_model(config, law, tensor)
    if dt is None:
        dt = model.stable_dt(state.rho, state.m, config.cfl, state.t)
    return model.step(state, dt)


def regularize_initial_data(grid: SpectralGrid, rho0, u0, delta: float, M: float | None = None, dealias: bool = True,
                            tol: float = 1e-15, max_iter: int = 200):
    """Cap-and-shift rho0 + delta at the level xi that restores the mean, then mollify both fields."""
    rho0 = np.asarray(rho0, dtype=float)
    if not np.all(np.isfinite(rho0)) or np.min(rho0) < 0:
        raise RegularizationError("initial density must be finite and nonnegative")
    M = float(grid.mean(rho0)) if M is None else M
    if not 0 < delta < M:
        raise RegularizationError(f"delta must lie in (0, M) = (0, {M:g}), got {delta}")
    if abs(grid.mean(rho0) - M) > 1e-10 * M:
        raise RegularizationError(f"initial mass {grid.mean(rho0):.17g} does not match M = {M:.17g}")

    shifted = rho0 + delta
    lo, hi = 0.0, float(np.max(shifted))
    if not (np.mean(np.minimum(lo, shifted)) < M < np.mean(np.minimum(hi, shifted))):
        raise RegularizationError("cap level could not be bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.mean(np.minimum(mid, shifted)) < M:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    else:
        raise RegularizationError("bisection for the cap level did not converge")
    xi = 0.5 * (lo + hi)
    capped = np.minimum(xi, shifted)

    mask = grid.dealias_mask if dealias else True
    sym = grid.mollifier_symbol(delta)
    rho_d = grid.inverse(mask * sym * grid.forward(capped))
    u_d = grid.inverse(mask * sym * grid.forward(np.asarray(u0, dtype=float)))
    # restore the mean exactly after the filters
    rho_d += M - grid.mean(rho_d)
    if np.min(rho_d) <= 0:
        raise RegularizationError("regularized density is not positive")
    return rho_d, u_d, xi


def sample_times(t_end: float, cadence: float, include_one: bool = True):
    """Diagnostic sample times on the cadence grid, always hitting t_end and t = 1."""
    if t_end == 0:
        return np.array([0.0])
    k = int(math.floor(t_end / cadence + 1e-9))
    ts = [cadence * i for i in range(k + 1)]
    if t_end - ts[-1] > 1e-12 * max(1.0, t_end):
        ts.append(t_end)
    else:
        ts[-1] = t_end
    if include_one and t_end > 1 and not any(abs(t - 1.0) < 1e-12 for t in ts):
        ts.append(1.0)
    return np.array(sorted(ts))


@dataclass
class Trajectory:
    model: Model
    config: SolverConfig
    times: np.ndarray
    rho: np.ndarray
    m: np.ndarray
    acc: np.ndarray
    failure: dict | None = None
    nsteps: int = 0

    def __len__(self):
        return len(self.times)

    def state(self, i) -> FluidState:
        return FluidState(self.rho[i], self.m[i], float(self.times[i]), self.acc[i])

    def velocity(self, i):
        return self.model.velocity(self.rho[i], self.m[i])

    def subsample(self, stride: int) -> Trajectory:
        """Every stride-th sample; the stride must divide the sample count."""
        if stride < 1 or (len(self) - 1) % stride:
            raise CadenceError(f"stride {stride} does not divide {len(self) - 1} intervals")
        sl = slice(None, None, stride)
        return replace(self, times=self.times[sl], rho=self.rho[sl], m=self.m[sl], acc=self.acc[sl])


def initial_state(model: Model, rho0, u0, config: SolverConfig) -> FluidState:
    g = model.grid
    if config.regularize:
        rho, u, _ = regularize_initial_data(g, rho0, u0, config.delta, model.law.M, config.dealias)
    else:
        rho = model._trunc(np.asarray(rho0, dtype=float))
        u = model._trunc(np.asarray(u0, dtype=float))
    m = model._trunc(rho * u)
    return FluidState(rho, m, 0.0, np.zeros(N_ACC))


def run(config: SolverConfig, tensor: ViscosityTensor, law: PressureLaw, rho0, u0, times=None) -> Trajectory:
    """Integrate to t_end and keep the state at every diagnostic sample time."""
    model = make_model(config, law, tensor)
    if times is None:
        times = sample_times(config.t_end, config.cadence)
    eps_upper = coercivity_bounds(tensor, check=False).eps_upper
    state = initial_state(model, rho0, u0, config)
    snaps = [state]
    failure = None
    nsteps = 0
    try:
        model.check(state.rho, state.m, 0.0)
        for t_next in times[1:]:
            span = t_next - state.t
            dt = model.stable_dt(state.rho, state.m, config.cfl, state.t, eps_upper)
            k = max(1, int(math.ceil(span / dt - 1e-12)))
            dt = span / k
            for _ in range(k):
                state = model.step(state, dt)
            state.t = float(t_next)
            nsteps += k
            snaps.append(state)
    except SolverFailure as exc:
        failure = {"kind": type(exc).__name__, "t": float(exc.t), "message": exc.message}
    return Trajectory(
        model=model,
        config=config,
        times=np.array([s.t for s in snaps]),
        rho=np.array([s.rho for s in snaps]),
        m=np.array([s.m for s in snaps]),
        acc=np.array([s.acc for s in snaps]),
        failure=failure,
        nsteps=nsteps,
    )


def energy(model: Model, rho, m):
    """int H1(rho/M) + rho |u|^2 / 2 over the torus."""
    g = model.grid
    u = model.velocity(rho, m)
    return float(g.integrate(h1_rel(model.law, rho) + 0.5 * rho * np.sum(u**2, axis=0)))


def cauchy_table(trajs, t0: float = 0.25):
    """||u^a - u^b|| in L^2((t0, T) x T^d) for consecutive trajectories."""
    vels = []
    for tr in trajs:
        vels.append(None if tr.failure else np.array([tr.velocity(i) for i in range(len(tr))]))
    times = [tr.times for tr in trajs]
    return cauchy_from_velocities(trajs[0].model.grid, times, vels, t0)


def cauchy_from_velocities(grid: SpectralGrid, times, vels, t0: float = 0.25):
    """Same table from stored velocity samples; None marks a failed member."""
    out = []
    for ta, tb, va, vb in zip(times[:-1], times[1:], vels[:-1], vels[1:]):
        if va is None or vb is None:
            out.append(float("nan"))
            continue
        if len(ta) != len(tb) or not np.allclose(ta, tb, rtol=0, atol=1e-12):
            raise CadenceError("sweep members must share sample times")
        sel = np.nonzero(np.asarray(ta) >= t0 - 1e-12)[0]
        if len(sel) < 2:
            raise CadenceError(f"need at least two samples in [{t0}, T]")
        vals = np.array([grid.integrate(np.sum((va[i] - vb[i]) ** 2, axis=0)) for i in sel])
        out.append(float(math.sqrt(np.trapezoid(vals, np.asarray(ta)[sel]))))
    return out
