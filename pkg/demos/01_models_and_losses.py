"""Homogeneous predictors and the two losses.

Walks through margins q_i = y_i * Phi(w, x_i) for the three model
families, verifies the scaling law q(a*w) = a^L q(w) and the Euler
identity <dq, w> = L q numerically, and shows the (f, f', g, g')
quadruple both losses expose.
"""

import numpy as np

from marginflow import (
    Dataset,
    LossSpec,
    ModelSpec,
    ParamVector,
    check_homogeneity,
    euler_identity_residual,
    g_eval,
    loss_value,
    predict_margins,
)
from marginflow.losses import log_inv_loss

rng = np.random.default_rng(0)

# --- margins for each family -------------------------------------------------
print("== margins ==")
lin = ModelSpec("linear")
data2 = Dataset([[1.0, 2.0], [2.0, -1.0]], [1.0, -1.0])
w = ParamVector([0.8, 0.4])
print("linear margins:", predict_margins(lin, w, data2))

deep = ModelSpec("deep-linear", depth=3, width=2)
data1 = Dataset([[1.0, 0.5]], [1.0])
wd = ParamVector(rng.standard_normal(deep.param_count(2)))
print("deep-linear margin:", predict_margins(deep, wd, data1))

relu = ModelSpec("two-layer-relu", width=3)
wr = ParamVector(rng.standard_normal(relu.param_count(2)))
print("two-layer-relu margins:", predict_margins(relu, wr, data2))

# --- homogeneity and the Euler identity --------------------------------------
print("\n== homogeneity / Euler identity ==")
for model, params, data, name in [
    (lin, w, data2, "linear (degree 1)"),
    (deep, wd, data1, "deep-linear depth 3 (degree 3)"),
    (relu, wr, data2, "two-layer-relu (degree 2)"),
]:
    h = check_homogeneity(model, params, data, alpha=2.0)
    e = euler_identity_residual(model, params, data)
    print(f"{name}: scaling defect {h:.2e}, Euler defect {e:.2e}")

# --- the loss quadruple -------------------------------------------------------
print("\n== losses ==")
for kind in ("exponential", "logistic"):
    loss = LossSpec(kind)
    q = np.array([0.5, 2.0, 10.0])
    print(f"{kind}: loss({q.tolist()}) = {loss_value(loss, q):.6f}")
    x = 3.0
    print(f"  g(f({x})) = {g_eval(loss, float(loss.f(np.array([x]))[0])):.12f}")

# log(1/loss) survives even when the loss itself underflows to zero
huge = np.array([1200.0, 1300.0])
loss = LossSpec("exponential")
print("underflowed loss:", loss_value(loss, huge),
      "but log(1/loss) =", log_inv_loss(loss, huge))
