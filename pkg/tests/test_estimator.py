import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from eigenreptile.estimator import EigenReptileClassifier, EigenReptileRegressor
from eigenreptile.tasks import ClassificationConfig, ClassificationTaskSource, SineTaskSource


def small_regressor(**kw):
    params = dict(hidden_sizes=(16,), outer_iterations=5, meta_batch=2, inner_steps=3,
                  adapt_steps=4, random_state=0)
    params.update(kw)
    return EigenReptileRegressor(**params)


def test_params_roundtrip_and_clone():
    est = small_regressor(beta=0.3)
    params = est.get_params()
    assert params["beta"] == 0.3 and params["hidden_sizes"] == (16,)
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(algorithm="reptile")
    assert est.algorithm == "reptile"
    clf = EigenReptileClassifier(n_classes=3)
    assert clone(clf).get_params()["n_classes"] == 3


def test_unfitted_use_raises():
    with pytest.raises(NotFittedError):
        small_regressor().predict(np.zeros((2, 1)))
    with pytest.raises(TypeError):
        small_regressor().fit(np.zeros((3, 1)))


def test_regressor_fit_adapt_predict():
    est = small_regressor().fit(SineTaskSource(10))
    assert est.n_features_in_ == 1 and len(est.history_) == 5
    x = np.linspace(-5, 5, 10)[:, None]
    y = 2.0 * np.sin(x[:, 0])
    before = est.predict(x)
    assert before.shape == (10,)
    est.adapt(x, y)
    after = est.predict(x)
    assert np.mean((after - y) ** 2) < np.mean((before - y) ** 2)
    assert np.isfinite(est.score(x, y))
    assert np.array_equal(est.reset().predict(x), before)
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        est.adapt(x, y[:5])


def test_fit_is_deterministic():
    a = small_regressor().fit(SineTaskSource(10))
    b = small_regressor().fit(SineTaskSource(10))
    assert np.array_equal(a.meta_params_, b.meta_params_)


def test_classifier():
    cfg = ClassificationConfig(N=3, K_train=4, dim=5)
    est = EigenReptileClassifier(n_classes=3, hidden_sizes=(8,), outer_iterations=4, meta_batch=2,
                                 inner_steps=3, adapt_steps=10, inner_lr=0.1, random_state=1)
    est.fit(ClassificationTaskSource(cfg))
    ep = ClassificationTaskSource(cfg).episode(np.random.default_rng(7))
    est.adapt(ep.train_inputs, ep.train_labels)
    proba = est.predict_proba(ep.test_inputs)
    assert proba.shape == (3, 3)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(est.predict(ep.test_inputs)) <= {0, 1, 2}
    assert list(est.classes_) == [0, 1, 2]
    with pytest.raises(ValueError):
        est.adapt(ep.train_inputs, ep.train_labels + 5)
    with pytest.raises(ValueError):
        est.adapt(ep.train_inputs, ep.train_labels + 0.5)


def test_ispl_dict_accepted():
    cfg = ClassificationConfig(N=3, K_train=4, dim=5)
    est = EigenReptileClassifier(n_classes=3, hidden_sizes=(8,), outer_iterations=2, meta_batch=2,
                                 inner_steps=3, ispl={"gamma0": 1.0}, random_state=0)
    est.fit(ClassificationTaskSource(cfg))
    assert est.history_[0]["selected_fraction"] is not None
