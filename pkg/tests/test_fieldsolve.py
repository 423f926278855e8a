import math

import numpy as np
import pytest

from kfields.errors import CflViolated, DomainMismatch, SchemaError
from kfields.expr import differentiate, evaluate, simplify
from kfields.fieldsolve import (
    StandingWave,
    StringConfig,
    StringState,
    analytic_standing_wave,
    convergence_study,
    crest_positions,
    crest_speed,
    diagnose_px,
    energy,
    l2_error,
    linf_error,
    scheme_energy,
    simulate_string,
    travelling_bump,
    wave_equation_residual,
    wave_system,
)
from kfields.geometry import SectionGrid


@pytest.fixture(scope="module")
def standing_run():
    return simulate_string(StringConfig())


# -- config -----------------------------------------------------------------

def test_config_validation():
    for bad in ({"rho": 0}, {"tau": -1}, {"N": 4}, {"dt": 0}, {"bc": "neumann"}, {"u0": "sin(y)"}):
        with pytest.raises(SchemaError):
            StringConfig.from_mapping(bad)
    with pytest.raises(SchemaError):
        StringConfig.from_mapping({"colour": 1})


def test_config_defaults():
    cfg = StringConfig()
    assert cfg.dx == pytest.approx(1 / 200)
    assert cfg.cfl_number == pytest.approx(0.5)
    assert cfg.n_steps == 400 and cfg.time_step * cfg.n_steps == pytest.approx(1.0)


def test_cfl_guard():
    with pytest.raises(CflViolated) as info:
        simulate_string(StringConfig(N=50, dt=0.05))
    assert info.value.cfl == pytest.approx(2.5)


# -- simulation -------------------------------------------------------------

def test_standing_wave_half_period(standing_run):
    x = standing_run.cfg.x()
    np.testing.assert_allclose(standing_run.grid["u"][-1], -np.sin(np.pi * x), atol=1e-3)
    assert linf_error(standing_run.grid, StandingWave()) <= 1e-3


def test_zero_data_stays_zero():
    run = simulate_string(StringConfig(N=20, u0="0", pt0="0"))
    for name in ("u", "pt", "px"):
        assert np.all(run.grid[name] == 0.0)


def test_dirichlet_ends_are_exact(standing_run):
    u = standing_run.grid["u"]
    assert np.all(u[:, 0] == 0.0) and np.all(u[:, -1] == 0.0)


def test_constraint_holds_by_construction(standing_run):
    assert standing_run.residuals["u_x + px/tau"] <= 1e-12
    assert standing_run.residuals["u_t - pt/rho"] <= 1e-4
    assert standing_run.residuals["pt_t + px_x"] <= 1e-3
    assert standing_run.hdw_residual.shape == standing_run.times.shape


def test_divergence_residual_is_second_order():
    res = [simulate_string(StringConfig(N=N, T=0.5)).residuals["pt_t + px_x"] for N in (50, 100, 200)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders > 1.9)


def test_evolved_px_monitors_constraint():
    run = simulate_string(StringConfig(N=100, evolve_px=True))
    assert linf_error(run.grid, StandingWave()) <= 1e-3
    assert 0 < run.residuals["u_x + px/tau"] < 1e-2


def test_wave_speed():
    cfg = travelling_bump(StringConfig(rho=1.0, tau=4.0, L=10.0, N=400, T=2.0), 3.0, 0.5)
    run = simulate_string(cfg)
    assert crest_speed(run) == pytest.approx(2.0, rel=0.05)
    assert abs(crest_positions(run.grid)[-1] - (3.0 + 2.0 * 2.0)) <= cfg.dx


def test_discrete_wave_equation(standing_run):
    cfg = standing_run.cfg
    assert wave_equation_residual(standing_run.grid, cfg) <= 10 * cfg.dx**2


def test_diagnosed_px_matches_exact_derivative():
    cfg = StringConfig(N=100)
    x = cfg.x()
    px = diagnose_px(np.sin(np.pi * x), cfg)
    np.testing.assert_allclose(px, -np.pi * np.cos(np.pi * x), atol=2e-3)


# -- analytic reference -----------------------------------------------------

def test_standing_wave_initial_phase():
    w = analytic_standing_wave(1.0, 1.0, 2, 1.0)
    x = np.linspace(0, 1, 11)
    g = w.sample(np.array([0.0, 0.1]), x)
    np.testing.assert_allclose(g["u"][0], np.sin(2 * np.pi * x), atol=1e-15)
    np.testing.assert_allclose(g["pt"][0], 0.0, atol=1e-15)


def test_standing_wave_solves_hdw_symbolically():
    w = StandingWave(rho=2.0, tau=3.0, m=2, L=1.5)
    b = {"t": np.linspace(0, 1, 7)[:, None], "x": np.linspace(0, 1.5, 9)[None, :]}
    checks = [
        differentiate(w.u, "t") - w.pt / 2.0,
        differentiate(w.u, "x") + w.px / 3.0,
        differentiate(w.pt, "t") + differentiate(w.px, "x"),
    ]
    for e in checks:
        assert np.max(np.abs(evaluate(simplify(e), b))) <= 1e-12


def test_standing_wave_node_at_half_time():
    g = StandingWave().sample(np.array([0.0, 0.5]), np.linspace(0, 1, 21))
    np.testing.assert_allclose(g["u"][1], 0.0, atol=1e-15)


# -- errors and energy ------------------------------------------------------

def test_l2_error_examples():
    x = np.linspace(0, 1, 2001)
    t = np.array([0.0, 1.0])
    ref = SectionGrid((t, x), {"u": np.vstack([np.sin(np.pi * x)] * 2)})
    zero = SectionGrid((t, x), {"u": np.zeros((2, x.size))})
    assert l2_error(ref, ref) == 0.0
    assert l2_error(zero, ref) == pytest.approx(math.sqrt(0.5), abs=1e-6)
    other = SectionGrid((t, x[:-1]), {"u": np.zeros((2, x.size - 1))})
    with pytest.raises(DomainMismatch):
        l2_error(other, ref)


def test_l2_error_ratio():
    errs = [l2_error(simulate_string(StringConfig(N=N, T=0.5)).grid, StandingWave()) for N in (100, 200)]
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_energy_examples(standing_run):
    z = np.zeros(11)
    assert energy(StringState(0.0, z, z, z), StringConfig()) == 0.0
    assert standing_run.energy[0] == pytest.approx(np.pi**2 / 4, rel=1e-4)
    drift = np.max(np.abs(standing_run.energy - standing_run.energy[0])) / standing_run.energy[0]
    assert drift <= 1e-4


def test_scheme_energy_drift_shrinks_with_dt():
    # fixed N; the drift of the semi-discrete invariant is pure time-stepping error
    drifts = []
    for cfl in (1.0, 0.5):
        cfg = StringConfig(N=50, cfl=cfl)
        run = simulate_string(cfg)
        e = [scheme_energy(run.state(i), cfg) for i in range(len(run.times))]
        drifts.append(abs(e[-1] - e[0]) / e[0])
    assert np.log2(drifts[0] / drifts[1]) >= 4.0


# -- convergence ------------------------------------------------------------

def test_convergence_orders():
    rows = convergence_study(StringConfig(N=50), 3)
    assert [r.order is None for r in rows] == [True, False, False]
    for r in rows[1:]:
        assert 1.7 <= r.order <= 2.3


def test_convergence_of_zero_solution():
    rows = convergence_study(StringConfig(N=20, u0="0"), 2, reference=StandingWave())
    rows_zero = convergence_study(StringConfig(N=20, u0="0"), 2,
                                  reference=_ZeroReference())
    assert all(r.linf == 0.0 for r in rows_zero)
    assert all(r.order is None for r in rows_zero)
    assert rows[0].linf > 0


class _ZeroReference:
    def sample(self, times, xs):
        return SectionGrid((times, xs), {"u": np.zeros((len(times), len(xs)))})


def test_cfl_choice_barely_matters():
    errs = [linf_error(simulate_string(StringConfig(N=50, cfl=c)).grid, StandingWave(), final_only=False)
            for c in (0.9, 0.45)]
    assert max(errs) / min(errs) <= 2.0


def test_hdw_system_parameters():
    sys = wave_system(2.0, 8.0)
    assert dict(sys.params) == {"rho": 2.0, "tau": 8.0}
    assert sys.chart.coordinates == ("u", "pt", "px")
