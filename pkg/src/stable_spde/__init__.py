"""Stable-noise spectral SPDE toolkit.

Symmetric alpha-stable laws, their infinite products, spectral
Ornstein-Uhlenbeck simulation, semilinear equations driven by cylindrical
stable noise, and the stochastic heat equation on a cube.
"""

__version__ = "0.1.0"

from .stable import QuadratureConfig, StableLaw, TailUndefinedError, absolute_moment  # noqa: E402
from .tails import Decision, PowerLaw, Verdict  # noqa: E402

__all__ = ["StableLaw", "QuadratureConfig", "TailUndefinedError", "absolute_moment", "Decision", "PowerLaw", "Verdict", "__version__"]
