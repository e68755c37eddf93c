# Differentiating the transition semigroup
#
# For the linear model R_t f(x) = E f(e^{tA} x + Z_A(t)). Because every mode
# has a smooth density, the derivative in x can be moved onto the density
# and estimated by Monte Carlo without differentiating f.

# %%
import numpy as np

from stable_spde import StableLaw, heat, ou

f = lambda z: np.tanh(z[..., 0])
h = np.array([1.0, 0.0, 0.0])
x = np.zeros(3)

for alpha in (0.8, 1.5, 2.0):
    model = heat.build_heat_model(heat.HeatModelConfig(1, 3), StableLaw(alpha))
    cmp = ou.finite_difference_gradient(model, f, x, h, 0.5, 400_000, seed=1)
    est = ou.gradient_estimator(model, f, x, h, 0.5, 400_000, seed=1)
    print(f"alpha={alpha}: score estimator {cmp.estimator:.4f}, finite difference {cmp.finite_difference:.4f}")
    print(f"    8 c C_t = {est.bound:.4f}   Cauchy-Schwarz bound = {est.l2_bound:.4f}")

# %% [markdown]
# The two estimates agree to Monte Carlo accuracy. The quick constant
# 8 c_alpha C_t is smaller than the true derivative for alpha >= 1 on this
# model. The Cauchy-Schwarz bound, which keeps the exact per-mode weights
# e^{-gamma_k t} h_k / c_k(t), holds everywhere.
