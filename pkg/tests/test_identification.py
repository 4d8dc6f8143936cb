import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridmaneuver.identification import (
    IdentificationError,
    RegressionProblem,
    RidgeConfig,
    SwayYawIdentifier,
    build_sway_regressors,
    build_yaw_regressors,
    differentiate_log,
    fit_ridge,
    identify_surge,
    identify_sway_yaw,
    sway_design,
    usable_rows,
    yaw_design,
)
from hybridmaneuver.maneuver import ManeuverSpec
from hybridmaneuver.model import SURGE_TERMS, SWAY_TERMS, YAW_TERMS, SwayYawCoeffs, VesselParams
from hybridmaneuver.trials import COLUMNS, DisturbanceSpec, TrialLog, generate_trial


def make_log(u, dt=0.1, delta=0.0):
    n = len(u)
    data = np.zeros((n, len(COLUMNS)))
    data[:, 0] = np.arange(n) * dt
    data[:, 4] = u
    data[:, 7] = delta
    return TrialLog(dt, data)


def test_differentiate_constant_and_linear():
    assert np.all(differentiate_log(make_log(np.full(20, 1.7)))[:, 0] == 0)
    t = np.arange(30) * 0.1
    np.testing.assert_allclose(differentiate_log(make_log(t))[:, 0], 1.0, rtol=1e-12)


def test_differentiate_quadratic_exact():
    t = np.arange(40) * 0.1
    acc = differentiate_log(make_log(t**2))[:, 0]
    # every stencil in use (including the one-sided ends) is exact for quadratics
    np.testing.assert_allclose(acc, 2 * t, atol=1e-12)


def test_differentiate_short_logs():
    t = np.arange(3) * 0.1
    np.testing.assert_allclose(differentiate_log(make_log(t**2))[:, 0], 2 * t, atol=1e-12)
    with pytest.raises(IdentificationError, match="at least 3"):
        differentiate_log(make_log([0.0, 1.0]))


def test_differentiate_fourth_order_interior():
    t = np.arange(200) * 0.01
    acc = differentiate_log(make_log(np.sin(t), dt=0.01))[:, 0]
    assert np.max(np.abs(acc[2:-2] - np.cos(t[2:-2]))) < 1e-9


def test_regressor_rows():
    np.testing.assert_array_equal(sway_design([0], [0], [0], [0])[0], [0, 0, 0, 0, 0, 0, 1])
    row = yaw_design([1.0], [0.1], [0.05], [0.2])[0]
    np.testing.assert_allclose(row, [0.05, 0.2, 1.25e-4, 1e-3, 0.05, 0.002, 2.5e-4, 1.0], rtol=1e-12)
    assert sway_design(*np.zeros((4, 5))).shape == (5, len(SWAY_TERMS)) == (5, 7)
    assert yaw_design(*np.zeros((4, 5))).shape == (5, len(YAW_TERMS)) == (5, 8)


def test_regression_problem_shape_checks():
    with pytest.raises(ValueError):
        RegressionProblem(np.zeros((3, 7)), np.zeros(4), SWAY_TERMS)
    with pytest.raises(ValueError):
        RegressionProblem(np.zeros((3, 6)), np.zeros(3), SWAY_TERMS)


def test_usable_rows_masks_control_changes():
    delta = np.zeros(20)
    delta[10:] = 0.1
    mask = usable_rows(make_log(np.zeros(20), delta=delta))
    assert not mask[:2].any() and not mask[-2:].any()
    assert not mask[8:12].any()
    assert mask[2:8].all() and mask[12:18].all()


def test_build_regressors_on_log():
    log = make_log(np.linspace(1, 2, 30), delta=np.where(np.arange(30) < 15, 0.0, 0.1))
    sway = build_sway_regressors(log)
    yaw = build_yaw_regressors(log)
    assert sway.term_names == SWAY_TERMS and yaw.term_names == YAW_TERMS
    assert len(sway.targets) == usable_rows(log).sum() == len(yaw.design)
    with pytest.raises(IdentificationError):
        build_sway_regressors(make_log([1.0, 1.0]))


def random_problem(rng, n=200, names=SWAY_TERMS):
    X = rng.normal(size=(n, len(names)))
    X[:, -1] = 1.0
    c = rng.normal(size=len(names))
    return RegressionProblem(X, X @ c, names), c


@pytest.mark.parametrize("standardize", [True, False])
def test_ridge_exact_recovery(standardize):
    rng = np.random.default_rng(0)
    for _ in range(20):
        problem, c = random_problem(rng)
        est = fit_ridge(problem, RidgeConfig(lam=0.0, standardize=standardize))
        np.testing.assert_allclose(est, c, rtol=1e-8, atol=1e-12)


def test_ridge_shrinkage_limit():
    problem, _ = random_problem(np.random.default_rng(1))
    est = fit_ridge(problem, RidgeConfig(lam=1e12))
    assert np.max(np.abs(est)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-6, 1e3), st.floats(1e-6, 1e3), st.booleans())
def test_ridge_monotone_shrinkage(seed, lam1, lam2, standardize):
    lam1, lam2 = sorted((lam1, lam2))
    rng = np.random.default_rng(seed)
    problem, _ = random_problem(rng, n=40)
    problem = RegressionProblem(problem.design, problem.targets + rng.normal(size=40), problem.term_names)
    cfg = dict(standardize=standardize)
    c1 = fit_ridge(problem, RidgeConfig(lam=lam1, **cfg))
    c2 = fit_ridge(problem, RidgeConfig(lam=lam2, **cfg))
    # the penalty is on the standardized coefficients, so compare those norms
    scale = problem.design.std(axis=0) if standardize else np.ones(len(c1))
    scale[-1] = 1.0
    assert np.linalg.norm(c1 * scale) >= np.linalg.norm(c2 * scale) * (1 - 1e-9)


def test_ridge_duplicate_invariance():
    rng = np.random.default_rng(2)
    problem, _ = random_problem(rng, n=50)
    noisy = RegressionProblem(problem.design, problem.targets + rng.normal(size=50), problem.term_names)
    twice = noisy + noisy
    cfg = RidgeConfig(lam=0.0)
    np.testing.assert_allclose(fit_ridge(twice, cfg), fit_ridge(noisy, cfg), rtol=1e-10)


def test_ridge_collinear_columns_named():
    rng = np.random.default_rng(3)
    problem, _ = random_problem(rng)
    X = problem.design.copy()
    X[:, 2] = 2.0 * X[:, 0] - X[:, 1]
    with pytest.raises(IdentificationError, match="collinear") as err:
        fit_ridge(RegressionProblem(X, problem.targets, SWAY_TERMS), RidgeConfig(lam=0.0))
    assert any(name in str(err.value) for name in SWAY_TERMS[:3])
    # a penalty makes the same problem solvable
    assert np.all(np.isfinite(fit_ridge(RegressionProblem(X, problem.targets, SWAY_TERMS), RidgeConfig(lam=1e-3))))


def test_ridge_insufficient_excitation():
    X = np.ones((10, 7))
    X[:, 0] = np.arange(10)
    with pytest.raises(IdentificationError, match="insufficient excitation"):
        fit_ridge(RegressionProblem(X, np.zeros(10), SWAY_TERMS))
    with pytest.raises(IdentificationError, match="no rows"):
        fit_ridge(RegressionProblem(np.empty((0, 7)), np.empty(0), SWAY_TERMS))


def test_ridge_config_validation():
    with pytest.raises(ValueError):
        RidgeConfig(lam=-1.0)
    with pytest.raises(ValueError):
        RidgeConfig(smooth=-1)


@pytest.fixture(scope="module")
def noiseless_random_log():
    spec = ManeuverSpec("random", duration=600.0, hold=10.0, approach=0.0, seed=0)
    return generate_trial(spec, VesselParams(), DisturbanceSpec.calm())


def test_sway_yaw_closed_loop_recovery(noiseless_random_log):
    truth = SwayYawCoeffs().as_dict()
    est = identify_sway_yaw(noiseless_random_log, RidgeConfig(lam=1e-8)).as_dict()
    for name, value in truth.items():
        if abs(value) > 0.001:
            assert est[name] == pytest.approx(value, rel=0.01), name


def test_sway_yaw_deterministic(noiseless_random_log):
    a = identify_sway_yaw(noiseless_random_log)
    b = identify_sway_yaw([noiseless_random_log])
    assert a == b


def test_surge_recovery():
    p = VesselParams()
    calm = DisturbanceSpec.calm()
    logs = [generate_trial(ManeuverSpec("straight", n_cmd=n, approach=0.0, duration=60.0), p, calm) for n in (3000, 4000, 5000)]
    spec = ManeuverSpec("straight", n_cmd=3000, n_start=5000, approach=40.0, duration=60.0)
    logs.append(generate_trial(spec, p, calm))
    est = identify_surge(logs, p, RidgeConfig(lam=0.0))
    for name in SURGE_TERMS:
        assert getattr(est, name) == pytest.approx(getattr(p.surge, name), rel=0.01), name
    assert est.x_udot == p.surge.x_udot


def test_surge_zero_speed_rejected():
    log = generate_trial(ManeuverSpec("straight", n_cmd=0.0, duration=30.0), VesselParams(), DisturbanceSpec.calm())
    with pytest.raises(IdentificationError, match="insufficient excitation"):
        identify_surge(log, VesselParams())


def test_sway_yaw_identifier_estimator():
    rng = np.random.default_rng(4)
    truth = SwayYawCoeffs()
    X = np.column_stack(
        [rng.uniform(0.5, 1.2, 300), rng.normal(0, 0.1, 300), rng.normal(0, 0.2, 300), rng.uniform(-0.5, 0.5, 300)]
    )
    y = np.column_stack([sway_design(*X.T) @ truth.sway, yaw_design(*X.T) @ truth.yaw])
    est = SwayYawIdentifier(lam=0.0).fit(X, y)
    np.testing.assert_allclose(est.coef_.sway, truth.sway, rtol=1e-8)
    np.testing.assert_allclose(est.coef_.yaw, truth.yaw, rtol=1e-8)
    np.testing.assert_allclose(est.predict(X), y, atol=1e-12)
    assert est.score(X, y) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        est.fit(X[:, :3], y)
