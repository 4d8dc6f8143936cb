import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from hybridmaneuver.hybrid import (
    FeatureScaler,
    HybridResidualRegressor,
    PureDataDrivenRegressor,
    TrainConfig,
    TrainingSample,
    acceleration_targets,
    hybrid_predict,
    loss,
    loss_gradient,
    one_step_pairs,
    physical_features,
    pure_datadriven_forward,
    train,
    trig_features,
)
from hybridmaneuver.maneuver import ManeuverSpec
from hybridmaneuver.model import ControlInput, MotionState, Pose, VesselParams, physical_step, to_prime
from hybridmaneuver.network import FfnWeights, ffn_forward
from hybridmaneuver.rollout import rollout
from hybridmaneuver.trials import DisturbanceSpec, generate_trial
from oracles import random_batch

P = VesselParams()
prime_state = st.builds(MotionState, st.floats(0, 1.4), st.floats(-0.3, 0.3), st.floats(-0.6, 0.6))
control = st.builds(ControlInput, st.floats(-0.52, 0.52), st.floats(0, 6000))
heading = st.floats(-20, 20)


def test_trig_features():
    assert trig_features(0.0) == (1.0, 0.0)
    c, s = trig_features(math.pi / 2)
    assert c == pytest.approx(0.0, abs=1e-16) and s == 1.0


@given(heading)
def test_trig_features_periodic_and_unit(psi):
    c, s = trig_features(psi)
    assert c * c + s * s == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(trig_features(psi + 2 * math.pi), (c, s), atol=1e-12)


@settings(max_examples=50)
@given(prime_state, heading, control, st.sampled_from(["euler", "rk4"]))
def test_residual_identity(state, psi, ctl, solver):
    out = hybrid_predict(P, FfnWeights.zeros(), state, psi, ctl, 0.1, solver=solver)
    assert out == physical_step(state, ctl, P, 0.1, solver)


@given(prime_state, heading, control)
def test_zero_dt_zero_weights_is_identity(state, psi, ctl):
    assert hybrid_predict(P, FfnWeights.zeros(), state, psi, ctl, 0.0) == state


@settings(max_examples=30)
@given(prime_state, heading, control, st.integers(0, 1000))
def test_residual_decomposition(state, psi, ctl, seed):
    w = FfnWeights.init(10, seed)
    scaler = FeatureScaler(np.full(6, 0.1), np.full(6, 2.0), np.array([0.5, 0.2, 0.1]))
    out = np.array(hybrid_predict(P, w, state, psi, ctl, 0.1, scaler))
    phy = np.array(physical_step(state, ctl, P, 0.1))
    x = np.array([*phy, ctl.delta, math.cos(psi), math.sin(psi)])
    expected = ffn_forward(w, scaler.transform(x)) * scaler.y_scale
    np.testing.assert_allclose(out - phy, expected, rtol=1e-9, atol=1e-15)


@settings(max_examples=30)
@given(prime_state, st.floats(-10, 10), control, st.integers(0, 1000))
def test_heading_periodicity(state, psi, ctl, seed):
    w = FfnWeights.init(10, seed)
    a = hybrid_predict(P, w, state, psi, ctl, 0.1)
    b = hybrid_predict(P, w, state, psi + 2 * math.pi, ctl, 0.1)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def _sample(state, ctl, psi, target):
    phy = physical_step(state, ctl, P, 0.1)
    return TrainingSample((*phy, ctl.delta, math.cos(psi), math.sin(psi)), tuple(target))


def test_loss_examples():
    s, c = MotionState(0.8, 0.01, 0.02), ControlInput(0.1, 5000)
    exact = _sample(s, c, 0.3, physical_step(s, c, P, 0.1))
    assert loss(FfnWeights.zeros(), [exact], 0.0) == 0.0
    assert loss(FfnWeights.zeros(), [exact], 0.5) == 0.0
    off = _sample(s, c, 0.3, np.array(physical_step(s, c, P, 0.1)) + (0.1, 0, 0))
    assert loss(FfnWeights.zeros(), [off], 0.0) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ValueError, match="empty"):
        loss(FfnWeights.zeros(), [], 0.0)


def test_loss_decomposition():
    rng = np.random.default_rng(5)
    batch = random_batch(rng, 10)
    w = FfnWeights.init(10, rng)
    diff = loss(w, batch, 0.01) - loss(w, batch, 0.0)
    assert diff == pytest.approx(0.005 * w.matrix_norm2(), rel=1e-9)


def test_gradient_zero_at_perfect_fit():
    s, c = MotionState(0.8, 0.01, 0.02), ControlInput(0.1, 5000)
    batch = [_sample(s, c, 0.3, physical_step(s, c, P, 0.1))]
    for a in loss_gradient(FfnWeights.zeros(), batch, 0.0).arrays():
        assert np.all(a == 0)


def test_gradient_regulariser_effect():
    rng = np.random.default_rng(6)
    batch = random_batch(rng, 10)
    w = FfnWeights.init(10, rng)
    g0 = loss_gradient(w, batch, 0.0)
    g1 = loss_gradient(w, batch, 0.01)
    for name in ("w1", "w2", "w3"):
        np.testing.assert_allclose(getattr(g1, name) - getattr(g0, name), 0.01 * getattr(w, name), atol=1e-15)
    for name in ("b1", "b2", "b3"):
        np.testing.assert_array_equal(getattr(g1, name), getattr(g0, name))


def test_feature_scaler():
    rng = np.random.default_rng(7)
    f = rng.normal(3, 2, size=(100, 6))
    f[:, 4] = 1.0
    sc = FeatureScaler.fit(f, rng.normal(size=(100, 3)))
    z = sc.transform(f)
    np.testing.assert_allclose(z[:, [0, 1, 2, 3, 5]].mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(z[:, [0, 1, 2, 3, 5]].std(axis=0), 1, atol=1e-12)
    assert np.all(z[:, 4] == 0)
    again = FeatureScaler.from_dict(sc.to_dict())
    np.testing.assert_array_equal(again.transform(f), z)
    with pytest.raises(ValueError):
        FeatureScaler(np.zeros(6), np.zeros(6), np.ones(3))


def test_train_config_validation():
    for bad in (dict(learning_rate=0), dict(batch_size=0), dict(lam=-1), dict(beta1=1.0), dict(unit="sweeps"), dict(smooth=-1)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


@pytest.fixture(scope="module")
def disturbed_pairs():
    spec = ManeuverSpec("random", duration=120.0, hold=10.0, seed=3)
    log = generate_trial(spec, P, DisturbanceSpec(), seed=11)
    return one_step_pairs(log, P, smooth=9)


def test_one_step_pairs_layout(disturbed_pairs):
    X, y = disturbed_pairs
    assert X.shape == (1400, 6) and y.shape == (1400, 3)
    np.testing.assert_array_equal(X[1:, :3], y[:-1])
    assert np.all(X[:, 5] == 5000.0)


def test_training_deterministic_and_decreasing(disturbed_pairs):
    X, y = disturbed_pairs
    kw = dict(vessel=P, n_iter=200, random_state=4)
    a = HybridResidualRegressor(**kw).fit(X, y)
    b = HybridResidualRegressor(**kw).fit(X, y)
    for wa, wb in zip(a.weights_.arrays(), b.weights_.arrays()):
        np.testing.assert_array_equal(wa, wb)
    assert len(a.loss_curve_) == 201
    assert a.loss_curve_[-1] < a.loss_curve_[0]
    c = HybridResidualRegressor(**{**kw, "random_state": 5}).fit(X, y)
    assert not np.array_equal(a.weights_.w1, c.weights_.w1)


def test_zero_residual_data_shrinks_network():
    rng = np.random.default_rng(8)
    batch = []
    for _ in range(200):
        s = MotionState(rng.uniform(0.3, 1.2), rng.normal(0, 0.05), rng.normal(0, 0.2))
        c = ControlInput(rng.uniform(-0.5, 0.5), 5000.0)
        batch.append(_sample(s, c, rng.uniform(-3, 3), physical_step(s, c, P, 0.1)))
    cfg = TrainConfig(iterations=800, standardize=False, seed=1)
    init = FfnWeights.init(cfg.hidden, np.random.default_rng(cfg.seed))
    weights, scaler, trace = train(batch, cfg)
    feats = np.array([b.feature for b in batch])
    before = np.linalg.norm(ffn_forward(init, feats))
    after = np.linalg.norm(ffn_forward(weights, scaler.transform(feats)))
    assert after < 0.1 * before
    assert trace[-1] < trace[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_training_aborts_on_nan():
    X = np.tile([0.5, 0.0, 0.0, 0.0, 0.1, 5000.0], (10, 1))
    y = np.full((10, 3), 1e300)
    with pytest.raises(FloatingPointError, match="non-finite"):
        HybridResidualRegressor(vessel=P, n_iter=5, standardize=False).fit(X, y)


def test_estimator_api(disturbed_pairs):
    X, y = disturbed_pairs
    est = HybridResidualRegressor(vessel=P, n_iter=50, random_state=1)
    assert clone(est).get_params() == est.get_params()
    est.fit(X, y)
    pred = est.predict(X[:5])
    phys, _ = physical_features(P, X[:5, :3], X[:5, 3], X[:5, 4:6], 0.1)
    np.testing.assert_allclose(pred - phys, est.residual(X[:5]), rtol=1e-12, atol=1e-15)
    assert est.score(X, y) > 0.99
    with pytest.raises(ValueError, match="columns"):
        est.predict(X[:, :5])
    bad = X[:3].copy()
    bad[:, 5] = -1
    with pytest.raises(ValueError, match="non-negative"):
        est.predict(bad)


def test_predict_next_matches_prime_path(disturbed_pairs):
    X, y = disturbed_pairs
    est = HybridResidualRegressor(vessel=P, n_iter=20).fit(X, y)
    s = MotionState(3.0, 0.1, 0.05)
    ctl = ControlInput(0.2, 5000.0)
    nxt = est.predict_next(s, 0.4, ctl, 0.1)
    row = np.array([[*to_prime(s, P.nondim), 0.4, *ctl]])
    np.testing.assert_allclose(to_prime(nxt, P.nondim), est.predict(row)[0], rtol=1e-12)


def test_baseline_zero_weights_constant_velocity():
    est = PureDataDrivenRegressor.from_weights(P, FfnWeights.zeros())
    assert pure_datadriven_forward(FfnWeights.zeros(), MotionState(1, 0.1, 0.1), 0.3, ControlInput(0.2, 5000)) == (0, 0, 0)
    traj = rollout(est, MotionState(2.0, 0.1, 0.0), Pose(0, 0, 0), ManeuverSpec("turning", delta_cmd=0.3, duration=10.0, approach=0.0))
    assert np.all(traj.states == [2.0, 0.1, 0.0])


def test_baseline_short_horizon_finite(disturbed_pairs):
    X, y = disturbed_pairs
    acc = acceleration_targets(X, y, P, 0.1)
    est = PureDataDrivenRegressor(vessel=P, n_iter=300).fit(X, acc)
    assert est.loss_curve_[-1] < est.loss_curve_[0]
    state = MotionState(*(X[0, :3] * (5.0, 5.0, 5.0 / 7.5)))
    traj = rollout(est, state, Pose(0, 0, X[0, 3]), np.tile(X[0, 4:6], (11, 1)))
    assert len(traj) == 11 and np.all(np.isfinite(traj.states))
