"""Bundle of (model, loss, dataset) exposing the quantities every
optimizer and diagnostic needs: margins, loss, gradient, log(1/loss)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses as L
from .data import Dataset
from .losses import LossSpec
from .models import ModelSpec, ParamVector, margin_gradients, predict_margins


@dataclass(frozen=True)
class Problem:
    model: ModelSpec
    loss: LossSpec
    data: Dataset

    @property
    def degree(self) -> int:
        return self.model.degree

    @property
    def p(self) -> int:
        return self.model.param_count(self.data.d)

    def margins(self, w: np.ndarray) -> np.ndarray:
        return predict_margins(self.model, ParamVector(w), self.data)

    def loss_value(self, w: np.ndarray) -> float:
        return L.loss_value(self.loss, self.margins(w))

    def log_inv_loss(self, w: np.ndarray) -> float:
        return L.log_inv_loss(self.loss, self.margins(w))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        """Loss gradient -sum_i exp(-f(q_i)) f'(q_i) dq_i(w)."""
        margins = self.margins(w)
        weights = L.margin_weights(self.loss, margins)
        grads = margin_gradients(self.model, ParamVector(w), self.data)
        return -(weights @ grads)

    def margin_gradients(self, w: np.ndarray) -> np.ndarray:
        return margin_gradients(self.model, ParamVector(w), self.data)


def loss_gradient(loss: LossSpec, model: ModelSpec, params: ParamVector, data: Dataset) -> np.ndarray:
    """Free-function form of the loss gradient (see Problem.gradient)."""
    return Problem(model, loss, data).gradient(params.w)
