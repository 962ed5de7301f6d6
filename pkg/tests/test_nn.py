import numpy as np
import pytest

from thr_design.acoustics import ParamRanges, StlSpectrum
from thr_design.checks import check_gradients
from thr_design.data import compute_normalization
from thr_design.errors import (
    GridMismatchError,
    NonFiniteError,
    ShapeMismatchError,
    StaleCacheError,
    ValidationError,
)
from thr_design.layers import dropout_mask
from thr_design.nn import (
    AdamState,
    TrainConfig,
    adam_step,
    backward,
    build_model,
    evaluate,
    fit,
    forward,
    mse_loss,
    predict,
    predict_batch,
)


def _model(widths=(4, 5, 3, 2), dropout=0., seed=0):
    return build_model(list(widths), TrainConfig(dropout=dropout, hidden=widths[1:-1]), seed=seed)


def test_gradients_against_finite_differences():
    result = check_gradients(n_cases=10, seed=1)
    assert result.passed, result.failures


def test_initialization():
    model = _model((10, 7, 3))
    limit = np.sqrt(6. / 10)
    assert np.all(np.abs(model.params['W1']) <= limit)
    np.testing.assert_array_equal(model.params['b1'], 0.)
    np.testing.assert_array_equal(model.bn_state[0]['running_var'], 1.)
    assert model.n_parameters == 10 * 7 + 7 + 7 + 7 + 7 * 3 + 3
    assert set(model.params) == {'W1', 'b1', 'gamma1', 'beta1', 'W2', 'b2'}


def test_zero_weights_give_zero_output():
    model = _model()
    model.set_params({k: (np.ones_like(v) if k.startswith('gamma') else np.zeros_like(v))
                      for k, v in model.params.items()})
    x = np.random.default_rng(0).normal(size=(5, 4))
    for mode in ('train', 'infer'):
        out, _ = forward(model, x, mode)
        np.testing.assert_array_equal(out, 0.)


def test_infer_is_deterministic_and_pure():
    model = _model(dropout=0.3)
    x = np.random.default_rng(0).normal(size=(6, 4))
    state = [{k: v.copy() for k, v in s.items()} for s in model.bn_state]
    a, _ = forward(model, x, 'infer')
    b, _ = forward(model, x, 'infer')
    np.testing.assert_array_equal(a, b)
    for s, saved in zip(model.bn_state, state):
        np.testing.assert_array_equal(s['running_mean'], saved['running_mean'])


def test_train_and_infer_agree_with_converged_running_stats():
    model = _model()
    x = np.random.default_rng(2).normal(size=(8, 4))
    for _ in range(300):
        train_out, _ = forward(model, x, 'train')
    infer_out, _ = forward(model, x, 'infer')
    np.testing.assert_allclose(infer_out, train_out, atol=1e-6)


def test_train_forward_with_dropout_needs_randomness():
    model = _model(dropout=0.2)
    x = np.ones((3, 4))
    with pytest.raises(ValidationError):
        forward(model, x, 'train')
    masks = [dropout_mask((3, 5), 0.2, np.random.default_rng(0)), np.ones((3, 3))]
    out1, _ = forward(model, x, 'train', masks=masks)
    out2, _ = forward(model, x, 'train', masks=masks)
    np.testing.assert_allclose(out1, out2)


def test_shape_mismatch():
    model = _model()
    with pytest.raises(ShapeMismatchError):
        forward(model, np.ones((3, 5)))
    with pytest.raises(ShapeMismatchError):
        forward(model, np.ones(4))
    _, cache = forward(model, np.ones((3, 4)), 'train')
    with pytest.raises(ShapeMismatchError):
        backward(model, cache, np.ones((2, 2)))


def test_stale_cache():
    model, other = _model(), _model()
    x = np.random.default_rng(0).normal(size=(3, 4))
    _, cache = forward(model, x, 'train')
    with pytest.raises(StaleCacheError):
        backward(other, cache, np.ones((3, 2)))
    _, infer_cache = forward(model, x, 'infer')
    with pytest.raises(StaleCacheError):
        backward(model, infer_cache, np.ones((3, 2)))
    model.set_params(dict(model.params))
    with pytest.raises(StaleCacheError):
        backward(model, cache, np.ones((3, 2)))


def test_zero_output_gradient_gives_zero_gradients():
    model = _model()
    _, cache = forward(model, np.random.default_rng(0).normal(size=(3, 4)), 'train')
    grads = backward(model, cache, np.zeros((3, 2)))
    assert set(grads) == set(model.params)
    for g in grads.values():
        np.testing.assert_array_equal(g, 0.)


def test_mse_loss():
    target = np.zeros((2, 3))
    loss, grad = mse_loss(target, target)
    assert loss == 0.
    loss, grad = mse_loss(np.ones((2, 3)), target)
    assert loss == 1.
    np.testing.assert_allclose(grad, 1. / 3.)
    with pytest.raises(ShapeMismatchError):
        mse_loss(np.ones((2, 3)), np.ones((3, 2)))


def test_adam_zero_gradient_keeps_params():
    params = {'w': np.array([1., -2.])}
    state = AdamState.zeros(params)
    new, new_state = adam_step(state, params, {'w': np.zeros(2)})
    np.testing.assert_array_equal(new['w'], params['w'])
    assert new_state.step == 1
    assert state.step == 0


def test_adam_constant_gradient_steps_by_learning_rate():
    params = {'w': np.array([0., 0.])}
    state = AdamState.zeros(params, learning_rate=0.01)
    for _ in range(100):
        prev = params['w']
        params, state = adam_step(state, params, {'w': np.array([3., -0.5])})
    np.testing.assert_allclose(params['w'] - prev, [-0.01, 0.01], rtol=1e-6)


def test_adam_rejects_non_finite():
    params = {'w': np.zeros(2)}
    with pytest.raises(NonFiniteError):
        adam_step(AdamState.zeros(params), params, {'w': np.array([np.nan, 0.])})


def _regression(n, rng):
    x = rng.normal(size=(n, 8))
    w = np.random.default_rng(99).normal(size=(8, 6))
    return x, 1. / (1. + np.exp(-x @ w / 3.))


def test_fit_improves_and_restores_best():
    rng = np.random.default_rng(0)
    train, val = _regression(256, rng), _regression(64, rng)
    config = TrainConfig(batch_size=32, max_epochs=40, patience=5, dropout=0.1, hidden=(16,), seed=3)
    model = build_model([8, 16, 6], config)
    model, curve = fit(model, train, val, config)
    assert curve.epochs[0] == 0
    assert curve.val_mse[curve.epochs.index(curve.best_epoch())] < curve.val_mse[0]
    assert evaluate(model, *val) == pytest.approx(min(curve.val_mse), rel=1e-12)


def test_fit_is_deterministic():
    rng = np.random.default_rng(0)
    train, val = _regression(64, rng), _regression(16, rng)
    config = TrainConfig(batch_size=16, max_epochs=5, patience=5, hidden=(8,), seed=1)
    a, curve_a = fit(build_model([8, 8, 6], config), train, val, config)
    b, curve_b = fit(build_model([8, 8, 6], config), train, val, config)
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])
    assert curve_a.val_mse == curve_b.val_mse


def test_fit_rejects_empty_validation():
    config = TrainConfig(hidden=(4,))
    with pytest.raises(ValidationError):
        fit(build_model([8, 4, 6], config), (np.ones((4, 8)), np.ones((4, 6))), (np.ones((0, 8)), np.ones((0, 6))))


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(dropout=1.)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValidationError):
        TrainConfig(hidden=())


def _predictor(count=8):
    rng = np.random.default_rng(0)
    stats = compute_normalization(rng.normal(20., 5., size=(50, count)))
    return build_model(config=TrainConfig(hidden=(6,)), norm_stats=stats)


def test_predict_clips_to_ranges():
    model = _predictor()
    lo, hi = ParamRanges().eep_bounds()
    eeps = predict_batch(model, np.random.default_rng(1).normal(0., 1e6, size=(20, 8)))
    assert eeps.shape == (20, 6)
    assert np.all(eeps >= lo) and np.all(eeps <= hi)
    eep = predict(model, StlSpectrum(np.full(8, 15.)))
    assert ParamRanges().eep_contains(eep)


def test_predict_grid_mismatch():
    model = _predictor()
    with pytest.raises(GridMismatchError):
        predict(model, StlSpectrum(np.zeros(8), start_freq=100.))
    with pytest.raises(GridMismatchError):
        predict(model, StlSpectrum(np.zeros(9)))
    with pytest.raises(GridMismatchError):
        predict_batch(model, np.zeros((2, 7)))
