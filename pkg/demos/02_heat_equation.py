# A stochastic heat equation driven by stable noise
#
# On [0, pi] with Dirichlet conditions the Laplacian has eigenfunctions
# sqrt(2/pi) sin(n xi) and eigenvalues n^2. Each Fourier coefficient of the
# solution is an independent stable Ornstein-Uhlenbeck process, which we can
# sample exactly.

# %%
import math

import numpy as np
from scipy import integrate

from stable_spde import StableLaw, heat, ou

cfg = heat.HeatModelConfig(d=1, mode_cutoff=64)
model = heat.build_heat_model(cfg, StableLaw(1.5))
print("first eigenvalues:", model.gamma[:5])
print("sum beta^alpha / gamma:", ou.hypothesis_basic_check(model).to_dict())

# %%
times = np.linspace(0.0, 1.0, 101)
rec = ou.simulate(model, np.zeros(model.N), times, seed=42)
xi = np.linspace(0.0, math.pi, 512)
u = heat.field_evaluate(rec, cfg, -1, xi)
print("boundary values:", u[0], u[-1])
print("field L2 norm  :", math.sqrt(integrate.trapezoid(u**2, xi)))
print("coeff l2 norm  :", np.linalg.norm(rec.coeffs[-1]))

# %% [markdown]
# The mode scales c_n(t) settle at beta_n (alpha gamma_n)^(-1/alpha), so the
# high modes carry little mass. Large jumps still show up as spikes in single
# coefficients.

# %%
scales = ou.mode_scales(model, 1.0)
print("c_n(1) for n = 1, 2, 4, 8, 16:", np.array2string(scales[[0, 1, 3, 7, 15]], precision=4))
big = np.unravel_index(np.argmax(np.abs(np.diff(rec.coeffs, axis=0))), (100, model.N))
print("largest single-step move: step", big[0], "mode", big[1] + 1)

# %% [markdown]
# In which negative Sobolev space does the noise live? For beta = 1 the
# threshold is d/alpha; the truncated sums either keep growing or settle.

# %%
for d, alpha in ((1, 1.5), (2, 1.5), (2, 1.0)):
    res = heat.noise_space_exponent(heat.HeatModelConfig(d, 1), alpha)
    print(f"d={d} alpha={alpha}: critical p = {res['critical_p']:.3f}, "
          f"growth below {res['below']['growth_ratio']:.2f}, above {res['above']['growth_ratio']:.2f}")
