"""Method-of-lines integration of the undamped vibrating string.

The HDW equations of h = (p^t)^2/(2 rho) - (p^x)^2/(2 tau) are

    u_t = p^t / rho,    u_x = -p^x / tau,    p^t_t + p^x_x = 0,

which combine to u_tt = c^2 u_xx with c^2 = tau / rho. The evolved unknowns
are (u, p^t); p^x is diagnosed from u at every stored level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import CflViolated, DomainMismatch, NonFiniteState, SchemaError
from .expr import Const, Expression, as_expression, differentiate, evaluate, parse
from .expr.core import Cos, Mul, Neg, Sin, Var
from .geometry import DarbouxChart, SectionGrid, interior
from .ksymplectic import KSymplecticSystem, hdw_field_equations_residual

WAVE_HAMILTONIAN = "pt^2/(2*rho) - px^2/(2*tau)"


def wave_system(rho: float = 1.0, tau: float = 1.0) -> KSymplecticSystem:
    """The vibrating string on the 2-symplectic phase space (u, pt, px)."""
    chart = DarbouxChart(1, 2, q_names=("u",), p_names=(("pt", "px"),))
    return KSymplecticSystem(chart, parse(WAVE_HAMILTONIAN), {"rho": float(rho), "tau": float(tau)})


@dataclass(frozen=True, eq=False)
class StringConfig:
    rho: float = 1.0
    tau: float = 1.0
    L: float = 1.0
    N: int = 200  # number of spatial intervals; nodes are 0..N
    T: float = 1.0
    dt: float | None = None  # default: cfl * dx / c
    u0: Expression = field(default_factory=lambda: parse("sin(pi*x/L)"))
    pt0: Expression = Const(0.0)
    bc: str = "dirichlet"
    cfl: float = 0.5
    evolve_px: bool = False  # evolve p^x too and monitor the constraint u_x = -p^x/tau

    def __post_init__(self):
        object.__setattr__(self, "u0", as_expression(self.u0))
        object.__setattr__(self, "pt0", as_expression(self.pt0))
        if not (self.rho > 0 and self.tau > 0):
            raise SchemaError("rho and tau must be positive")
        if int(self.N) != self.N or self.N < 8:
            raise SchemaError("N must be an integer >= 8")
        object.__setattr__(self, "N", int(self.N))
        if not (self.L > 0 and self.T > 0):
            raise SchemaError("L and T must be positive")
        if self.dt is not None and not self.dt > 0:
            raise SchemaError("dt must be positive")
        if self.bc.lower() != "dirichlet":
            raise SchemaError(f"unsupported boundary condition {self.bc!r}; only dirichlet")
        extra = (self.u0.free_variables() | self.pt0.free_variables()) - set(self.constants()) - {"x"}
        if extra:
            raise SchemaError(f"initial data uses unknown names {sorted(extra)}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "StringConfig":
        known = {"rho", "tau", "L", "N", "T", "dt", "u0", "pt0", "bc", "cfl", "evolve_px"}
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown config fields {sorted(unknown)}")
        kw = dict(data)
        for key in ("u0", "pt0"):
            if key in kw:
                kw[key] = parse(str(kw[key]))
        for key in ("rho", "tau", "L", "T", "cfl"):
            if key in kw:
                kw[key] = float(kw[key])
        if kw.get("dt") is not None:
            kw["dt"] = float(kw["dt"])
        return cls(**kw)

    @property
    def c(self) -> float:
        return math.sqrt(self.tau / self.rho)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def n_steps(self) -> int:
        dt = self.dt if self.dt is not None else self.cfl * self.dx / self.c
        return max(1, math.ceil(self.T / dt - 1e-9))

    @property
    def time_step(self) -> float:
        """Step actually used: the requested one shrunk so that T is hit exactly."""
        return self.T / self.n_steps

    @property
    def cfl_number(self) -> float:
        return self.c * self.time_step / self.dx

    def constants(self) -> dict:
        return {"pi": math.pi, "rho": self.rho, "tau": self.tau, "L": self.L, "c": self.c}

    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)

    def refined(self, factor: int = 2) -> "StringConfig":
        dt = None if self.dt is None else self.dt / factor
        return replace(self, N=self.N * factor, dt=dt)


@dataclass(frozen=True, eq=False)
class StringState:
    t: float
    u: np.ndarray
    pt: np.ndarray
    px: np.ndarray

    def __post_init__(self):
        if not (self.u.shape == self.pt.shape == self.px.shape):
            raise ValueError("state arrays must have equal length")


def diagnose_px(u: np.ndarray, cfg: StringConfig) -> np.ndarray:
    """p^x = -tau u_x with centered differences.

    Fixed ends use the odd ghost value u[-1] = -u[1] (u_xx vanishes at a
    Dirichlet end), which keeps the stencil error smooth up to the boundary.
    """
    ux = np.empty_like(u)
    ux[1:-1] = (u[2:] - u[:-2]) / (2.0 * cfg.dx)
    ux[0] = u[1] / cfg.dx
    ux[-1] = -u[-2] / cfg.dx
    return -cfg.tau * ux


def _laplacian(u, dx):
    out = np.zeros_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx**2
    return out


def _initial_arrays(cfg: StringConfig):
    x = cfg.x()
    b = {**cfg.constants(), "x": x}
    u = np.broadcast_to(evaluate(cfg.u0, b), x.shape).astype(float)
    pt = np.broadcast_to(evaluate(cfg.pt0, b), x.shape).astype(float)
    px = np.broadcast_to(evaluate(Neg(Mul((Const(cfg.tau), differentiate(cfg.u0, "x")))), b),
                         x.shape).astype(float)
    u[0] = u[-1] = 0.0
    pt[0] = pt[-1] = 0.0
    return u, pt, px


@dataclass(frozen=True, eq=False)
class StringRun:
    cfg: StringConfig
    grid: SectionGrid  # parameters (t, x); columns u, pt, px
    energy: np.ndarray  # per time level
    hdw_residual: np.ndarray  # per time level, max over the three HDW equations
    residuals: Mapping[str, float]  # interior max-norm of each HDW equation

    @property
    def times(self) -> np.ndarray:
        return self.grid.axes[0]

    def state(self, level: int = -1) -> StringState:
        g = self.grid
        return StringState(float(self.times[level]), g["u"][level], g["pt"][level], g["px"][level])


def simulate_string(cfg: StringConfig) -> StringRun:
    """Classical RK4 in time, 3-point centered second differences in space."""
    if cfg.cfl_number > 1.0 + 1e-12:
        raise CflViolated(cfg.cfl_number)
    dt, dx, rho, tau = cfg.time_step, cfg.dx, cfg.rho, cfg.tau
    u, pt, px = _initial_arrays(cfg)
    nt = cfg.n_steps + 1
    U = np.empty((nt, u.size))
    PT = np.empty_like(U)
    PX = np.empty_like(U)

    if cfg.evolve_px:
        def rhs(y):
            uu, pp, qq = y
            du = pp / rho
            dp = -np.gradient(qq, dx, edge_order=2)
            dq = -(tau / rho) * np.gradient(pp, dx, edge_order=2)
            du[0] = du[-1] = dp[0] = dp[-1] = 0.0
            return np.array([du, dp, dq])
        y = np.array([u, pt, px])
    else:
        def rhs(y):
            uu, pp = y
            du = pp / rho
            du[0] = du[-1] = 0.0
            return np.array([du, tau * _laplacian(uu, dx)])
        y = np.array([u, pt])

    def store(level, y):
        U[level], PT[level] = y[0], y[1]
        PX[level] = y[2] if cfg.evolve_px else diagnose_px(y[0], cfg)

    store(0, y)
    for n in range(1, nt):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        y[0, 0] = y[0, -1] = 0.0
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at step {n} (t = {n * dt:.6g})")
        store(n, y)

    times = np.linspace(0.0, cfg.T, nt)
    grid = SectionGrid((times, cfg.x()), {"u": U, "pt": PT, "px": PX})
    res = hdw_field_equations_residual(wave_system(rho, tau), grid)
    names = {("velocity", 0, 0): "u_t - pt/rho", ("velocity", 0, 1): "u_x + px/tau",
             ("divergence", 0): "pt_t + px_x"}
    summary = {names[key]: float(np.max(np.abs(interior(r)), initial=0.0)) for key, r in res.residuals.items()}
    per_level = np.zeros(nt)
    for r in res.residuals.values():
        inner = np.abs(r[:, 1:-1])
        per_level = np.maximum(per_level, inner.max(axis=1))
    energies = np.array([energy(StringState(t, U[i], PT[i], PX[i]), cfg) for i, t in enumerate(times)])
    return StringRun(cfg, grid, energies, per_level, summary)


def energy(state: StringState, cfg: StringConfig) -> float:
    """Trapezoidal integral of (p^t)^2/(2 rho) + (p^x)^2/(2 tau)."""
    density = state.pt**2 / (2.0 * cfg.rho) + state.px**2 / (2.0 * cfg.tau)
    return float(np.trapezoid(density, dx=cfg.dx))


def scheme_energy(state: StringState, cfg: StringConfig) -> float:
    """Quadratic invariant of the semi-discrete scheme (forward differences for u_x).

    Only the time integrator changes it, so its drift isolates the RK4 error.
    """
    kinetic = np.sum(state.pt**2) / (2.0 * cfg.rho) * cfg.dx
    potential = cfg.tau / 2.0 * np.sum(np.diff(state.u) ** 2) / cfg.dx
    return float(kinetic + potential)


@dataclass(frozen=True)
class StandingWave:
    """u = cos(c m pi t / L) sin(m pi x / L), p^t = rho u_t, p^x = -tau u_x."""

    rho: float = 1.0
    tau: float = 1.0
    m: int = 1
    L: float = 1.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("mode number must be >= 1")

    @property
    def u(self) -> Expression:
        c = math.sqrt(self.tau / self.rho)
        k = self.m * math.pi / self.L
        return Mul((Cos(Mul((Const(c * k), Var("t")))), Sin(Mul((Const(k), Var("x"))))))

    @property
    def pt(self) -> Expression:
        return Mul((Const(self.rho), differentiate(self.u, "t")))

    @property
    def px(self) -> Expression:
        return Neg(Mul((Const(self.tau), differentiate(self.u, "x"))))

    def sample(self, times, xs) -> SectionGrid:
        T, X = np.meshgrid(np.asarray(times, float), np.asarray(xs, float), indexing="ij")
        b = {"t": T, "x": X}
        return SectionGrid((times, xs), {n: np.broadcast_to(evaluate(e, b), T.shape)
                                         for n, e in (("u", self.u), ("pt", self.pt), ("px", self.px))})


def analytic_standing_wave(rho: float, tau: float, m: int = 1, L: float = 1.0) -> StandingWave:
    return StandingWave(rho, tau, m, L)


def _reference_grid(sim: SectionGrid, ref) -> SectionGrid:
    if isinstance(ref, SectionGrid):
        if ref.shape != sim.shape or any(not np.allclose(a, b) for a, b in zip(ref.axes, sim.axes)):
            raise DomainMismatch("grids have different parameter axes")
        return ref
    return ref.sample(*sim.axes)


def l2_error(sim: SectionGrid, ref) -> float:
    """Trapezoidal L2 norm over x of the u difference at the final time."""
    r = _reference_grid(sim, ref)
    diff = sim["u"][-1] - r["u"][-1]
    return float(math.sqrt(np.trapezoid(diff**2, x=sim.axes[1])))


def linf_error(sim: SectionGrid, ref, final_only: bool = True) -> float:
    r = _reference_grid(sim, ref)
    diff = np.abs(sim["u"] - r["u"])
    return float(np.max(diff[-1] if final_only else diff))


@dataclass(frozen=True)
class ConvergenceRow:
    dx: float
    linf: float
    order: float | None  # None on the first row or when an error is zero


def convergence_study(cfg: StringConfig, refinements: int, reference=None) -> list[ConvergenceRow]:
    """Halve dx (and dt) `refinements - 1` times; errors are max over the space-time grid.

    The whole space-time grid is used because at special final times (e.g.
    T = 1 for the unit standing wave) the leading phase error cancels.
    """
    if refinements < 2:
        raise ValueError("need at least two refinement levels")
    if reference is None:
        reference = StandingWave(cfg.rho, cfg.tau, 1, cfg.L)
    rows: list[ConvergenceRow] = []
    level = cfg
    for _ in range(refinements):
        run = simulate_string(level)
        err = linf_error(run.grid, reference, final_only=False)
        order = None
        if rows and rows[-1].linf > 0 and err > 0:
            order = math.log2(rows[-1].linf / err)
        rows.append(ConvergenceRow(level.dx, err, order))
        level = level.refined(2)
    return rows


def wave_equation_residual(grid: SectionGrid, cfg: StringConfig) -> float:
    """Max over interior nodes of |D_tt u - c^2 D_xx u| with 3-point stencils."""
    u = grid["u"]
    dt, dx = grid.spacings
    utt = (u[2:, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / dt**2
    uxx = (u[1:-1, 2:] - 2.0 * u[1:-1, 1:-1] + u[1:-1, :-2]) / dx**2
    return float(np.max(np.abs(utt - cfg.c**2 * uxx), initial=0.0))


def crest_positions(grid: SectionGrid) -> np.ndarray:
    """Location of max u per time level, refined by a parabola through the peak."""
    u, x = grid["u"], grid.axes[1]
    dx = x[1] - x[0]
    out = np.empty(u.shape[0])
    for n, row in enumerate(u):
        j = int(np.argmax(row))
        shift = 0.0
        if 0 < j < row.size - 1:
            a, b, c = row[j - 1], row[j], row[j + 1]
            denom = a - 2.0 * b + c
            if denom != 0:
                shift = 0.5 * (a - c) / denom
        out[n] = x[j] + shift * dx
    return out


def travelling_bump(cfg: StringConfig, center: float, width: float) -> StringConfig:
    """Config whose initial data is a right-moving Gaussian bump.

    For u = f(x - c t), p^t = rho u_t = -rho c f'(x), obtained symbolically.
    """
    u0 = parse(f"exp(-((x - {center!r})/{width!r})^2)")
    pt0 = Neg(Mul((Const(cfg.rho * cfg.c), differentiate(u0, "x"))))
    return replace(cfg, u0=u0, pt0=pt0)


def crest_speed(run: StringRun) -> float:
    pos = crest_positions(run.grid)
    return float((pos[-1] - pos[0]) / (run.times[-1] - run.times[0]))


__all__ = [
    "ConvergenceRow", "StandingWave", "StringConfig", "StringRun", "StringState",
    "analytic_standing_wave", "convergence_study", "crest_positions", "crest_speed",
    "diagnose_px", "energy", "l2_error", "linf_error", "scheme_energy", "simulate_string",
    "travelling_bump", "wave_equation_residual", "wave_system",
]
