from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from langevin_gf.analysis import (
    ErgodicSeries,
    WeakOrderPoint,
    WeakOrderReport,
    conformal_defect,
    ergodic_reference,
    ergodic_report,
    fit_order,
    gauss_expectation,
    linear_ergodic_series,
    linear_weak_order,
    local_ms_error,
    mc_weak_order,
    quad2d,
    temporal_average,
    weak_error_linear,
    weak_order_report,
)
from langevin_gf.errors import (
    ArgumentError,
    DegenerateDensityError,
    EvaluationError,
)
from langevin_gf.integrators import (
    GaussianLaw,
    gf2_affine_map,
    gf2_jacobian,
    propagate_gaussian_chain,
    simulate,
)
from langevin_gf.mc import SeedPlan, one_step_ms_gap, sample_increments
from langevin_gf.models import (
    DoubleWell,
    LangevinModel,
    LinearOscillator,
    PhaseState,
)
from langevin_gf.observables import cos_sum, exp_negsq, sin_sumsq


def linear_model_custom(a: float, v: float, sigma: float) -> LangevinModel:
    """Linear dynamics with explicit params; admits sigma = 0."""
    return LangevinModel(
        dim=1,
        noise_dim=1,
        force=lambda q: a * q,
        potential=lambda q: 0.5 * a * float(np.sum(q * q)),
        force_jacobian=lambda q: np.full_like(q, a),
        mass=np.array([[a]]),
        friction=v,
        noise=np.array([[-sigma]]),
        kind="linear",
        params={"a": a, "v": v, "sigma": sigma},
        force_third=lambda q: np.zeros((1, 1, 1)),
    )


def test_quad2d_constant_unit_box():
    assert_allclose(quad2d(lambda p, q: np.ones_like(p), (0.0, 1.0), 16), 1.0, rtol=1e-14)


def test_quad2d_odd_integrand():
    assert abs(quad2d(lambda p, q: p * q, (-3.0, 3.0), 40)) <= 1e-14


def test_quad2d_gaussian_oracle():
    value = quad2d(lambda p, q: np.exp(-8.0 * (p * p + q * q)), (-10.0, 10.0), 200)
    assert_allclose(value, math.pi / 8.0, atol=1e-10)


def test_quad2d_nonfinite_reports_node():
    def bad(p, q):
        out = np.ones_like(p)
        out[p > 0.5] = np.nan
        return out

    with pytest.raises(EvaluationError, match="node"):
        quad2d(bad, (-1.0, 1.0), 8)


def test_quad2d_validation():
    with pytest.raises(ArgumentError):
        quad2d(lambda p, q: p, (1.0, -1.0), 8)
    with pytest.raises(ArgumentError):
        quad2d(lambda p, q: p, (0.0, 1.0), 1)
    with pytest.raises(ArgumentError):
        quad2d(lambda p, q: 1.0, (0.0, 1.0), 8)


def test_quad2d_stabilizes_under_refinement():
    f = lambda p, q: np.exp(-8.0 * (p * p + q * q)) * np.cos(6.0 * (p + q))
    results = {n: quad2d(f, (-10.0, 10.0), n) for n in (32, 64, 128, 256)}
    deltas = [
        abs(results[64] - results[32]),
        abs(results[128] - results[64]),
        abs(results[256] - results[128]),
    ]
    assert deltas[0] > deltas[1] > deltas[2]


def test_ergodic_reference_constant_is_exact():
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    ones = lambda p, q: np.ones(p.shape[:-1])
    assert ergodic_reference(model, ones) == 1.0


def test_ergodic_reference_linear_closed_forms():
    # Stationary marginals are N(0, c) per coordinate with c = sigma^2/(2v).
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    c = 0.0625
    assert_allclose(ergodic_reference(model, exp_negsq), 1.0 / (1.0 + c), rtol=1e-10)
    assert_allclose(ergodic_reference(model, cos_sum), math.exp(-c), rtol=1e-10)
    # E sin(p^2+q^2) = Im[(1-2ic)^-1] = 2c/(1+4c^2).
    assert_allclose(
        ergodic_reference(model, sin_sumsq), 2 * c / (1 + 4 * c * c), rtol=1e-9
    )


def test_ergodic_reference_double_well_is_sane():
    ref = ergodic_reference(DoubleWell(v=4.0, beta=2.0), cos_sum)
    assert math.isfinite(ref)
    assert abs(ref) <= 1.0


def test_ergodic_reference_degenerate_density():
    model = LinearOscillator(a=1e150, v=2.0, sigma=0.5)
    with pytest.raises(DegenerateDensityError):
        ergodic_reference(model, cos_sum)


def test_gauss_expectation_trivial_and_linear():
    law = GaussianLaw(np.array([0.5, -1.0]), np.array([[2.0, 0.7], [0.7, 1.5]]))
    assert_allclose(gauss_expectation(lambda z: np.ones(len(z)), law, 8), 1.0, rtol=1e-13)
    assert_allclose(gauss_expectation(lambda z: z[:, 0], law, 8), 0.5, rtol=1e-12)
    assert_allclose(gauss_expectation(lambda z: z[:, 1] ** 2, law, 8), 1.5 + 1.0, rtol=1e-12)


def test_gauss_expectation_polynomial_exactness():
    cov = np.array([[2.0, 0.7], [0.7, 1.5]])
    law = GaussianLaw(np.zeros(2), cov)
    cases = [
        (lambda z: z[:, 0] ** 2, cov[0, 0]),
        (lambda z: z[:, 0] * z[:, 1], cov[0, 1]),
        (lambda z: z[:, 0] ** 4, 3.0 * cov[0, 0] ** 2),
        (lambda z: z[:, 0] ** 2 * z[:, 1] ** 2, cov[0, 0] * cov[1, 1] + 2 * cov[0, 1] ** 2),
        (lambda z: z[:, 0] ** 6, 15.0 * cov[0, 0] ** 3),
    ]
    for fn, expected in cases:
        assert_allclose(gauss_expectation(fn, law, 8), expected, rtol=1e-12)


def test_gauss_expectation_characteristic_oracle():
    c = 0.015625
    law = GaussianLaw(np.zeros(2), c * np.eye(2))
    value = gauss_expectation(lambda z: np.cos(z[:, 0] + z[:, 1]), law, 64)
    assert_allclose(value, math.exp(-c), rtol=1e-12)


def test_gauss_expectation_degenerate_directions():
    law = GaussianLaw(np.array([0.0, 2.0]), np.diag([0.25, 0.0]))
    assert_allclose(gauss_expectation(lambda z: z[:, 1], law, 16), 2.0, rtol=1e-14)
    assert_allclose(gauss_expectation(lambda z: z[:, 0] ** 2, law, 16), 0.25, rtol=1e-12)
    point = GaussianLaw(np.array([1.5, -0.5]), np.zeros((2, 2)))
    assert_allclose(
        gauss_expectation(lambda z: np.cos(z[:, 0] + z[:, 1]), point, 4),
        math.cos(1.0),
        rtol=1e-14,
    )


def test_gauss_expectation_nonfinite_psi():
    law = GaussianLaw(np.zeros(2), np.eye(2))

    def bad(z):
        with np.errstate(invalid="ignore"):
            return np.log(z[:, 0])

    with pytest.raises(EvaluationError):
        gauss_expectation(bad, law, 8)


def test_weak_error_linear_zero_horizon():
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    z0 = PhaseState([3.0], [1.0])
    assert weak_error_linear(model, cos_sum, z0, 0.125, 0.0) == 0.0


def test_weak_error_linear_second_order_ratio():
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    z0 = PhaseState([3.0], [1.0])
    coarse = weak_error_linear(model, cos_sum, z0, 2.0**-3, 1.0)
    fine = weak_error_linear(model, cos_sum, z0, 2.0**-5, 1.0)
    ratio = coarse / fine
    assert 16.0 / 1.5 <= ratio <= 16.0 * 1.5


def test_weak_error_linear_deterministic_limit():
    model = linear_model_custom(a=1.0, v=2.0, sigma=0.0)
    z0 = PhaseState([3.0], [1.0])
    coordinate = lambda p, q: q[..., 0]
    report = linear_weak_order(model, coordinate, z0, 1.0, [2.0**-3, 2.0**-4, 2.0**-5])
    assert 1.7 <= report.slope <= 2.3


def test_fit_order_recovers_synthetic_powers():
    hs = [2.0**-3, 2.0**-4, 2.0**-5]
    for k in (1, 2, 3):
        slope, intercept = fit_order([(h, 3.7 * h**k) for h in hs])
        assert_allclose(slope, float(k), atol=1e-12)
        assert_allclose(intercept, math.log(3.7), atol=1e-11)


def test_fit_order_validation():
    with pytest.raises(ArgumentError):
        fit_order([(0.1, 1.0)])
    with pytest.raises(ArgumentError):
        fit_order([(0.1, 1.0), (0.1, 2.0)])
    with pytest.raises(ArgumentError):
        fit_order([(0.1, 1.0), (0.2, 0.0)])
    with pytest.raises(ArgumentError):
        fit_order([(0.1, 1.0), (0.2, -2.0)])


def test_conformal_defect_closed_forms():
    v, h = 2.0, 0.125
    exact = np.diag([math.exp(-v * h), 1.0])
    assert conformal_defect(exact, v, h) == 0.0
    assert_allclose(conformal_defect(np.eye(2), v, h), 1.0 - math.exp(-v * h), rtol=1e-15)
    with pytest.raises(ArgumentError):
        conformal_defect(np.eye(3), v, h)


def test_conformal_defect_of_scheme_jacobian():
    rng = np.random.default_rng(23)
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5).build()
    for _ in range(20):
        z = PhaseState(rng.uniform(-2, 2, 1), rng.uniform(-2, 2, 1))
        h = rng.uniform(1e-3, 0.25)
        dw = rng.normal(0, math.sqrt(h), 1)
        jac = gf2_jacobian(model, z, h, dw)
        assert conformal_defect(jac, model.friction, h) <= 1e-8


def test_n_step_defect_regularity_guard():
    built = DoubleWell(v=4.0, beta=2.0).build()
    model = dataclasses.replace(built, force_third=None)
    h, n = 0.01, 32
    block = sample_increments(51, n, 1, h)
    path = simulate(model, "gf2", PhaseState([0.5], [-1.0]), h, n, block)
    total = np.eye(2)
    worst_step = 0.0
    for k in range(n):
        jac = gf2_jacobian(model, path.states[k], h, block.values[k])
        total = jac @ total
        worst_step = max(worst_step, conformal_defect(jac, model.friction, h))
    bound = n * worst_step * max(1.0, float(np.linalg.norm(total, 2))) ** 2
    assert conformal_defect(total, model.friction, n * h) <= bound


def test_temporal_average_values():
    assert_allclose(temporal_average([0.0, 2.0]), [0.0, 1.0])
    assert_allclose(temporal_average(np.full(5, 3.3)), np.full(5, 3.3))
    with pytest.raises(ArgumentError):
        temporal_average([])


def test_weak_order_report_censors_noise_points():
    points = [
        WeakOrderPoint(h=0.25, error=1e-6, std_error=1e-3, pipeline="mc"),
        WeakOrderPoint(h=0.125, error=0.01, std_error=1e-4, pipeline="mc"),
        WeakOrderPoint(h=0.0625, error=0.0025, std_error=1e-4, pipeline="mc"),
    ]
    report = weak_order_report(points)
    assert report.points[0].pipeline == "mc-censored"
    assert report.points[1].pipeline == "mc"
    assert_allclose(report.slope, 2.0, atol=1e-12)


def test_weak_order_report_needs_survivors():
    points = [
        WeakOrderPoint(h=0.25, error=1e-6, std_error=1e-3, pipeline="mc"),
        WeakOrderPoint(h=0.125, error=1e-6, std_error=1e-3, pipeline="mc"),
    ]
    with pytest.raises(ArgumentError, match="censoring"):
        weak_order_report(points)


def test_weak_order_types_validate():
    with pytest.raises(ArgumentError):
        WeakOrderPoint(h=-0.1, error=1.0, std_error=0.0, pipeline="mc")
    with pytest.raises(ArgumentError):
        WeakOrderPoint(h=0.1, error=1.0, std_error=0.0, pipeline="exact")
    good = WeakOrderPoint(h=0.1, error=1.0, std_error=0.0, pipeline="deterministic")
    with pytest.raises(ArgumentError):
        WeakOrderReport(points=(good,), slope=2.0, intercept=0.0)
    with pytest.raises(ArgumentError):
        WeakOrderReport(points=(good, good), slope=2.0, intercept=0.0)


def test_linear_weak_order_slope():
    model = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    z0 = PhaseState([3.0], [1.0])
    report = linear_weak_order(model, cos_sum, z0, 1.0, [2.0**-3, 2.0**-4, 2.0**-5])
    assert 1.8 <= report.slope <= 2.2
    assert all(pt.pipeline == "deterministic" for pt in report.points)


def test_mc_weak_order_smoke():
    model = DoubleWell(v=4.0, beta=2.0).build()
    z0 = PhaseState([-2.0], [-2.0])
    report = mc_weak_order(
        model, cos_sum, z0, 0.5, [2.0**-3, 2.0**-4], 4000, 4, SeedPlan(606)
    )
    assert math.isfinite(report.slope)
    assert all(pt.pipeline == "mc" for pt in report.points)
    assert 1.0 <= report.slope <= 3.2


def test_local_ms_error_third_order():
    model = DoubleWell(v=4.0, beta=2.0).build()
    z0 = PhaseState([-2.0], [-2.0])
    report = local_ms_error(
        model, z0, [2.0**-6, 2.0**-7, 2.0**-8, 2.0**-9], 16, 4000, SeedPlan(97)
    )
    assert 2.8 <= report.slope <= 3.6


def test_local_ms_gap_deterministic_slope():
    model = linear_model_custom(a=1.0, v=2.0, sigma=0.0)
    z0 = PhaseState([3.0], [1.0])
    report = local_ms_error(
        model, z0, [2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5], 16, 4, SeedPlan(1)
    )
    # Drift-only one-step gap is O(h^3), so its square fits with slope near 6.
    assert report.slope >= 5.0


def test_local_ms_gap_identical_chains():
    model = DoubleWell(v=4.0, beta=2.0).build()
    res = one_step_ms_gap(
        model, PhaseState([0.0], [1.0]), 0.125, 1, 64, SeedPlan(2), allow_equal_steps=True
    )
    assert res.mean == 0.0
    assert res.std_error == 0.0


def test_ergodic_series_and_report_types():
    times = np.array([0.0, 0.5, 1.0])
    series = ErgodicSeries(
        label="p3_q1", times=times, values=np.array([0.1, 0.2, 0.3]),
        running=temporal_average([0.1, 0.2, 0.3]),
    )
    report = ergodic_report("cos_sum", [series], 0.2)
    assert_allclose(report.final_deviations[0], abs(series.running[-1] - 0.2))
    with pytest.raises(ArgumentError):
        ErgodicSeries(label="x", times=times, values=np.zeros(2), running=np.zeros(3))
    with pytest.raises(ArgumentError):
        ergodic_report("cos_sum", [], 0.2)


def test_linear_ergodic_series_matches_direct_composition():
    osc = LinearOscillator(a=1.0, v=2.0, sigma=0.5)
    z0 = PhaseState([3.0], [1.0])
    h, n = 0.125, 16
    times, means = linear_ergodic_series(osc, [cos_sum, exp_negsq], z0, h, n, n_nodes=32)
    assert_allclose(means[0, 0], math.cos(4.0), rtol=1e-13)
    amap = gf2_affine_map(osc, h)
    law = GaussianLaw(np.array([3.0, 1.0]), np.zeros((2, 2)))
    for step in range(n + 1):
        if step > 0:
            law = propagate_gaussian_chain(amap, law, 1, h)
        expected = gauss_expectation(
            lambda z: cos_sum(z[..., :1], z[..., 1:]), law, 32
        )
        assert_allclose(means[0, step], expected, rtol=1e-12)
    assert times[-1] == pytest.approx(2.0)
