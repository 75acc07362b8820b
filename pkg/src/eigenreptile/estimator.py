"""scikit-learn style front end.

``fit`` meta-trains an initialization from a task source, ``adapt`` fine-tunes
it on one task's support set, and ``predict`` uses the adapted weights (or the
meta-initialization if nothing was adapted yet)::

    est = EigenReptileRegressor(outer_iterations=2000, random_state=0)
    est.fit(SineTaskSource(K=10))
    est.adapt(X_support, y_support).predict(X_query)
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .evaluation import adapt as _adapt
from .ispl import ISPLConfig
from .meta import MetaConfig, outer_loop
from .nn import Batch, NetworkSpec, OptimizerState, forward


class _MetaLearner(BaseEstimator):
    _head = "regression-linear"

    def __init__(
        self,
        hidden_sizes=(64, 64),
        activation="tanh",
        algorithm="eigen-reptile",
        beta=0.1,
        beta_schedule="linear-decay",
        meta_batch=10,
        inner_steps=5,
        outer_iterations=1000,
        inner_optimizer="sgd",
        inner_lr=0.02,
        adam_beta1=0.0,
        adapt_steps=32,
        ispl=None,
        project_before_flip=False,
        random_state=None,
    ):
        self.hidden_sizes = hidden_sizes
        self.activation = activation
        self.algorithm = algorithm
        self.beta = beta
        self.beta_schedule = beta_schedule
        self.meta_batch = meta_batch
        self.inner_steps = inner_steps
        self.outer_iterations = outer_iterations
        self.inner_optimizer = inner_optimizer
        self.inner_lr = inner_lr
        self.adam_beta1 = adam_beta1
        self.adapt_steps = adapt_steps
        self.ispl = ispl
        self.project_before_flip = project_before_flip
        self.random_state = random_state

    def _optimizer(self):
        return OptimizerState(self.inner_optimizer, self.inner_lr, beta1=self.adam_beta1)

    def _n_outputs(self, batch):
        raise NotImplementedError

    def fit(self, tasks, y=None):
        """Meta-train from ``tasks``, a callable ``rng -> Batch``."""
        if not callable(tasks):
            raise TypeError("fit expects a task source: a callable taking an rng")
        seed = 0 if self.random_state is None else int(self.random_state)
        probe = tasks(np.random.default_rng([seed, 0, 0]))
        self.n_features_in_ = probe.inputs.shape[1]
        sizes = [self.n_features_in_, *self.hidden_sizes, self._n_outputs(probe)]
        self.spec_ = NetworkSpec.mlp(sizes, self.activation, self._head)
        config = MetaConfig(
            algorithm=self.algorithm,
            beta=self.beta,
            meta_batch=self.meta_batch,
            inner_steps=self.inner_steps,
            outer_iterations=self.outer_iterations,
            beta_schedule=self.beta_schedule,
            project_before_flip=self.project_before_flip,
        )
        ispl = self.ispl
        if isinstance(ispl, dict):
            ispl = ISPLConfig(**ispl)
        result = outer_loop(config, self.spec_, tasks, self._optimizer(), seed=seed, ispl=ispl)
        self.meta_params_ = result.params
        self.history_ = result.history
        self.params_ = result.params
        return self

    def _validate_support(self, X, y):
        raise NotImplementedError

    def adapt(self, X, y, steps=None):
        """Fine-tune the meta-initialization on one task's labelled samples."""
        check_is_fitted(self, "meta_params_")
        batch = self._validate_support(X, y)
        steps = self.adapt_steps if steps is None else steps
        self.params_ = _adapt(self.meta_params_, self.spec_, batch, steps, self._optimizer())
        return self

    def reset(self):
        """Drop task adaptation and return to the meta-initialization."""
        check_is_fitted(self, "meta_params_")
        self.params_ = self.meta_params_
        return self

    def _raw(self, X):
        check_is_fitted(self, "meta_params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return forward(self.params_, self.spec_, X)


class EigenReptileRegressor(RegressorMixin, _MetaLearner):
    _head = "regression-linear"

    def _n_outputs(self, batch):
        return batch.targets.shape[1]

    def _validate_support(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, multi_output=True, y_numeric=True)
        return Batch(X, y)

    def predict(self, X):
        out = self._raw(X)
        return out[:, 0] if out.shape[1] == 1 else out


class EigenReptileClassifier(ClassifierMixin, _MetaLearner):
    _head = "classification-softmax"

    def __init__(self, n_classes=5, hidden_sizes=(64, 64), activation="tanh",
                 algorithm="eigen-reptile", beta=0.1, beta_schedule="linear-decay",
                 meta_batch=10, inner_steps=5, outer_iterations=1000, inner_optimizer="sgd",
                 inner_lr=0.02, adam_beta1=0.0, adapt_steps=32, ispl=None, project_before_flip=False,
                 random_state=None):
        super().__init__(hidden_sizes, activation, algorithm, beta, beta_schedule, meta_batch,
                         inner_steps, outer_iterations, inner_optimizer, inner_lr, adam_beta1,
                         adapt_steps, ispl, project_before_flip, random_state)
        self.n_classes = n_classes

    def _n_outputs(self, batch):
        self.classes_ = np.arange(self.n_classes)
        return self.n_classes

    def _validate_support(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y)
        if y.dtype.kind not in "iu" or y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError(f"labels must be integers in [0, {self.n_classes})")
        return Batch(X, y.astype(np.int64))

    def predict_proba(self, X):
        return self._raw(X)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)
