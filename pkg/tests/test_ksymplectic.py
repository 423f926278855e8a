import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfields.errors import ChartMismatch, GaugeConstraintViolated, SchemaError
from kfields.expr import Const, differentiate, evaluate, parse, random_polynomial
from kfields.fieldsolve import StandingWave, wave_system
from kfields.geometry import DarbouxChart, KVectorField, SectionGrid, random_points
from kfields.ksymplectic import (
    CANONICAL,
    GaugeSpec,
    KSymplecticSystem,
    TwoFormBundle,
    darboux_two_forms,
    hamiltonian_kvf,
    hdw_field_equations_residual,
    hdw_residual,
    is_zero_field,
    momentum_trace_target,
    nondegeneracy_check,
    random_gauge,
)


def system(n, k, h, **params):
    return KSymplecticSystem(DarbouxChart(n, k), parse(h), params)


# -- forms ----------------------------------------------------------------------

def test_symplectic_two_by_two():
    f = darboux_two_forms(DarbouxChart(1, 1)).forms
    np.testing.assert_array_equal(f[0], [[0, 1], [-1, 0]])


def test_two_symplectic_pairs():
    chart = DarbouxChart(1, 2)
    f = darboux_two_forms(chart).forms
    assert f.shape == (2, 3, 3)
    assert f[0, 0, 1] == 1 and f[0, 1, 0] == -1 and np.count_nonzero(f[0]) == 2
    assert f[1, 0, 2] == 1 and f[1, 2, 0] == -1 and np.count_nonzero(f[1]) == 2


def test_nonzero_count_per_form():
    f = darboux_two_forms(DarbouxChart(2, 2)).forms
    for alpha in range(2):
        assert np.count_nonzero(np.triu(f[alpha])) == 2


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_darboux_forms_nondegenerate(n, k):
    rep = nondegeneracy_check(darboux_two_forms(DarbouxChart(n, k)))
    assert rep.nondegenerate and rep.rank == n + n * k


def test_degenerate_bundles():
    assert not nondegeneracy_check(TwoFormBundle(np.zeros((2, 3, 3)))).nondegenerate
    f = darboux_two_forms(DarbouxChart(1, 2)).forms.copy()
    f[1] = 0.0
    rep = nondegeneracy_check(TwoFormBundle(f))
    assert not rep.nondegenerate and rep.rank == 2
    # e_{p^2} is a joint null vector
    assert np.all(f @ np.array([0.0, 0.0, 1.0]) == 0)


def test_bundle_rejects_non_skew():
    with pytest.raises(ValueError):
        TwoFormBundle(np.ones((1, 2, 2)))


# -- Hamiltonian k-vector fields ----------------------------------------------

def test_zero_hamiltonian_gives_zero_field():
    assert is_zero_field(hamiltonian_kvf(system(2, 3, "0")))


def test_wave_field_components():
    X = hamiltonian_kvf(wave_system(2.0, 5.0))
    assert X.lines() == ["X1[u] = pt/rho", "X1[pt] = 0", "X1[px] = 0",
                         "X2[u] = -(px/tau)", "X2[pt] = 0", "X2[px] = 0"]


def test_classical_hamilton_equations(rng):
    sys = system(1, 1, "q1^2 + p1_1^2/2")
    X = hamiltonian_kvf(sys)
    assert str(X.component(0, "q1")) == "p1_1"
    assert str(X.component(0, "p1_1")) == "-2*q1"
    pts = random_points(sys.chart, 10, rng)
    assert hdw_residual(sys, X, pts).max_norm <= 1e-12


def test_oscillator_sign_convention():
    # k = 1, h = p^2/2 + V(q) must give qdot = p, pdot = -V'(q)
    sys = system(1, 1, "p1_1^2/2 + q1^4")
    X = hamiltonian_kvf(sys)
    b = {"q1": 0.7, "p1_1": -0.3}
    assert evaluate(X.component(0, "q1"), b) == pytest.approx(-0.3)
    assert evaluate(X.component(0, "p1_1"), b) == pytest.approx(-4 * 0.7**3)


def test_canonical_gauge_split():
    sys = system(1, 3, "q1^2*p1_2")
    X = hamiltonian_kvf(sys)
    target = momentum_trace_target(sys, 0)
    b = {"q1": 0.5, "p1_1": 0.1, "p1_2": 0.2, "p1_3": 0.3}
    for a in range(3):
        for beta in range(3):
            val = evaluate(X.component(a, f"p1_{beta + 1}"), b)
            assert val == pytest.approx(evaluate(target, b) / 3 if a == beta else 0.0)


def test_strict_reading(rng):
    sys = system(1, 2, "q1^2 + p1_1*p1_2")
    X = hamiltonian_kvf(sys, strict=True)
    for a in range(2):
        assert str(X.component(a, f"p1_{a + 1}")) == "-2*q1"
    # per-alpha reading over-counts the trace, so the summed equation fails
    pts = random_points(sys.chart, 10, rng)
    assert hdw_residual(sys, X, pts).max_norm > 0.1
    free = system(1, 2, "p1_1*p1_2")
    assert hdw_residual(free, hamiltonian_kvf(free, strict=True), random_points(free.chart, 5, rng)).max_norm == 0


def test_gauge_constraint_violation():
    sys = system(1, 2, "q1^2")
    bad = GaugeSpec({(0, "p1_1"): parse("-2*q1 + 0.001")})
    with pytest.raises(GaugeConstraintViolated):
        hamiltonian_kvf(sys, bad)
    with pytest.raises(SchemaError):
        hamiltonian_kvf(sys, GaugeSpec({(0, "q1"): parse("1")}))
    with pytest.raises(SchemaError):
        hamiltonian_kvf(sys, GaugeSpec({(0, "p1_1"): parse("w")}))


def test_broken_trace_gives_unit_residual(rng):
    sys = system(1, 2, "q1^2*p1_1 + p1_2^2")
    X = hamiltonian_kvf(sys)
    g = X.component(0, "p1_1")
    broken = X.with_component(0, "p1_1", g + 1)
    pts = random_points(sys.chart, 20, rng)
    res = hdw_residual(sys, broken, pts)
    np.testing.assert_allclose(np.abs(res.covector[0]), 1.0, atol=1e-12)
    np.testing.assert_allclose(res.covector[1:], 0.0, atol=1e-12)


def test_zero_field_residual_is_dh(rng):
    sys = system(1, 2, "q1*p1_1 + p1_2^3")
    pts = random_points(sys.chart, 5, rng)
    res = hdw_residual(sys, KVectorField.zero(sys.chart), pts)
    dh = np.array([evaluate(differentiate(sys.h, c), pts) for c in sys.chart.coordinates])
    np.testing.assert_allclose(res.covector, -dh)
    assert res.max_norm > 0


def test_residual_chart_mismatch():
    sys = system(1, 2, "q1")
    with pytest.raises(ChartMismatch):
        hdw_residual(sys, KVectorField.zero(DarbouxChart(2, 2)), {})


def test_system_validation():
    with pytest.raises(SchemaError):
        system(1, 1, "q1 + w")
    with pytest.raises(SchemaError):
        KSymplecticSystem(DarbouxChart(1, 1), parse("q1"), {"q1": 1.0})
    with pytest.raises(SchemaError):
        KSymplecticSystem(DarbouxChart(1, 1, True), parse("q1"))


# -- field equations along sections -------------------------------------------

def test_constant_section_constant_h():
    sys = system(1, 2, "3")
    t = np.linspace(0, 1, 6)
    s = SectionGrid((t, t), {c: np.full((6, 6), 0.2) for c in sys.chart.coordinates})
    assert hdw_field_equations_residual(sys, s).max_norm == 0.0


def test_standing_wave_section():
    sys = wave_system()
    wave = StandingWave(1.0, 1.0, 1, 1.0)
    grid = np.linspace(0, 1, 401)
    s = wave.sample(grid, grid)
    assert hdw_field_equations_residual(sys, s).max_norm <= 5e-4


def test_injected_defect_is_detected():
    sys = wave_system()
    grid = np.linspace(0, 1, 201)
    s = StandingWave(1.0, 1.0, 1, 1.0).sample(grid, grid)
    eps = 1e-2
    broken = SectionGrid(s.axes, {**s.values, "pt": s["pt"] - eps})
    res = hdw_field_equations_residual(sys, broken).residuals[("velocity", 0, 0)]
    assert np.max(np.abs(res[1:-1, 1:-1])) >= eps - 1e-4


# -- invariants -----------------------------------------------------------------

seeds = st.integers(min_value=0, max_value=2**32 - 1)
shapes = st.tuples(st.integers(1, 2), st.integers(1, 3), st.integers(1, 2))


@given(seeds, shapes)
def test_any_valid_gauge_solves(seed, shape):
    n, k, degree = shape
    rng = np.random.default_rng(seed)
    chart = DarbouxChart(n, k)
    sys = KSymplecticSystem(chart, random_polynomial(rng, chart.coordinates, degree + 1, 4))
    pts = random_points(chart, 20, rng)
    fields = [hamiltonian_kvf(sys), hamiltonian_kvf(sys, random_gauge(sys, rng, degree))]
    for X in fields:
        assert hdw_residual(sys, X, pts).max_norm <= 1e-10
        for i in range(n):
            trace = sum(X.component(a, chart.p(i, a)) for a in range(k))
            val = evaluate(trace + differentiate(sys.h, chart.q(i)), pts)
            assert np.max(np.abs(val)) <= 1e-10
    # q-components do not depend on the gauge
    for a in range(k):
        for i in range(n):
            assert fields[0].component(a, chart.q(i)) == fields[1].component(a, chart.q(i))


def test_gauge_describe():
    assert CANONICAL.describe() == {"canonical": True}
    g = GaugeSpec({(1, "p1_2"): parse("q1")})
    assert g.describe()["components"] == {"X2[p1_2]": "q1"}
    assert g.get(0, "p1_1") == Const(0)
