"""Scikit-learn style estimator wrapping the CNN engine.

CnnClassifier follows the sklearn protocol (fit/predict/predict_proba,
get_params/set_params via BaseEstimator), so the network composes with
pipelines, cross-validation and grid search. Inputs are image batches:
(N, H, W) or (N, C, H, W), uint8 in [0, 255] or float in [0, 1].
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .architectures import build_mini_backbone, build_paper_cnn
from .training import TrainConfig, replace_head, train


class CnnClassifier(BaseEstimator, ClassifierMixin):
    """Image classifier backed by the from-scratch CNN engine.

    architecture: "paper" (full-width network) or "mini" (quarter-width
    backbone). warm_start_net transfers from a pretrained Network: its
    head is replaced to match the classes seen in fit and every other
    parameter is reused.
    """

    def __init__(
        self,
        architecture="paper",
        epochs=10,
        lr=0.01,
        momentum=0.9,
        batch_size=16,
        seed=0,
        width_scale=None,
        input_size=32,
        in_channels=1,
        warm_start_net=None,
    ):
        self.architecture = architecture
        self.epochs = epochs
        self.lr = lr
        self.momentum = momentum
        self.batch_size = batch_size
        self.seed = seed
        self.width_scale = width_scale
        self.input_size = input_size
        self.in_channels = in_channels
        self.warm_start_net = warm_start_net

    def _prepare(self, X):
        X = np.asarray(X)
        if X.ndim == 3:
            X = X[:, None, :, :]
        if X.ndim != 4:
            raise ValueError(f"X must be (N, H, W) or (N, C, H, W), got shape {X.shape}")
        if X.dtype == np.uint8:
            X = X.astype(np.float64) / 255.0
        else:
            X = X.astype(np.float64)
            if X.size and (X.min() < 0.0 or X.max() > 1.0):
                raise ValueError("float inputs must be scaled to [0, 1]")
        expected = (self.in_channels, self.input_size, self.input_size)
        if X.shape[1:] != expected:
            raise ValueError(f"each sample must have shape {expected}, got {X.shape[1:]}")
        return X

    def _build(self, num_classes):
        if self.warm_start_net is not None:
            return replace_head(self.warm_start_net, num_classes, seed=self.seed)
        if self.architecture == "paper":
            return build_paper_cnn(
                num_classes,
                in_channels=self.in_channels,
                input_size=self.input_size,
                width_scale=self.width_scale if self.width_scale is not None else 1.0,
                seed=self.seed,
            )
        if self.architecture == "mini":
            return build_mini_backbone(
                num_classes,
                seed=self.seed,
                width_scale=self.width_scale if self.width_scale is not None else 0.25,
            )
        raise ValueError(f"unknown architecture {self.architecture!r}")

    def fit(self, X, y):
        X = self._prepare(X)
        y = np.asarray(y)
        if y.shape != (len(X),):
            raise ValueError(f"y must be ({len(X)},), got shape {y.shape}")
        self.classes_ = np.unique(y)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        y_idx = np.searchsorted(self.classes_, y)
        self.net_ = self._build(len(self.classes_))
        self.net_.meta["class_names"] = [str(c) for c in self.classes_]
        cfg = TrainConfig(
            epochs=self.epochs,
            lr=self.lr,
            momentum=self.momentum,
            batch_size=self.batch_size,
            seed=self.seed,
        )
        self.report_ = train(self.net_, X, y_idx, cfg)
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("CnnClassifier is not fitted; call fit first")

    def predict_proba(self, X):
        self._check_fitted()
        return self.net_.forward(self._prepare(X))

    def predict(self, X):
        self._check_fitted()
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
