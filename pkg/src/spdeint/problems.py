"""Preset problem definitions binding domain, noise, coefficients and data.

Four presets ship with the package:

* ``reacdiff1d``  -- 1d reaction-diffusion, kappa=1/100, f = 1-y,
                     b = (1-y)/(1+y^2), sine noise mu_j = j^-2, zero start.
* ``reacdiff_cos`` -- 1d reaction-diffusion whose noise eigenfunctions are
                     cosines (they do not commute with the Laplacian),
                     kappa=1/20, f = 1-y, b = y/(1+y^2), mu_j = j^-3 with
                     the constant mode silent, zero start.
* ``heat2d``      -- 2d linear heat equation with multiplicative noise,
                     kappa=1/50, b = y, tensor-sine noise
                     mu = (j1+j2)^-4, start 2 sin(pi x1) sin(pi x2).
* ``burgers``     -- 1d stochastic Burgers equation, kappa=1/100,
                     drift -v v_x, b = y, sine noise mu_j = j^-2,
                     start (3 sqrt(2)/5)(sin(pi x) + sin(2 pi x)).

Each preset carries its resolution coupling: the second-order scheme and
the splitting method use M = N^2 time steps and K = N noise modes per axis;
the Euler baseline uses M = N^euler_steps_power.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .basis import Field, SpectralBasis
from .coefficients import NemytskiiPair
from .noise import QWienerSpec

EULER_SCHEMES = ("implicit_euler", "exponential_euler")
SECOND_ORDER_SCHEMES = ("milstein", "splitting")


def _drift_one_minus_y(x, y):
    return 1.0 - y


def _drift_zero(x, y):
    return 0.0


def _diff_reacdiff(x, y):
    return (1.0 - y) / (1.0 + y * y)


def _diff_reacdiff_dy(x, y):
    return (y * y - 2.0 * y - 1.0) / (1.0 + y * y) ** 2


def _diff_bounded(x, y):
    return y / (1.0 + y * y)


def _diff_bounded_dy(x, y):
    return (1.0 - y * y) / (1.0 + y * y) ** 2


def _diff_linear(x, y):
    return y


def _diff_linear_dy(x, y):
    return 1.0


@dataclass(frozen=True)
class ProblemSpec:
    """A fully bound problem: domain, horizon, coefficients, noise, start."""

    name: str
    dimension: int
    kappa: float
    horizon: float
    pair: NemytskiiPair
    noise_family: str
    noise_decay: float
    #: closed-form initial value; exactly one of the two is set
    initial_spectral: Optional[Callable] = None  # (n,) -> coefficient array
    initial_fn: Optional[Callable] = None  # x tuple -> grid values
    burgers_drift: bool = False
    linear_multiplicative: bool = False
    euler_steps_power: int = 3
    baseline_euler: str = "implicit_euler"

    def basis(self, n: int) -> SpectralBasis:
        return SpectralBasis(self.dimension, n, self.kappa)

    def noise_spec(self, k: int, amplitude: float = 1.0) -> QWienerSpec:
        return QWienerSpec(self.noise_family, self.noise_decay, k, amplitude)

    def initial_field(self, basis: SpectralBasis) -> Field:
        if self.initial_spectral is not None:
            return Field(basis, spectral=self.initial_spectral(basis.modes_per_axis))
        return Field(basis, grid=self.initial_fn(basis.grid_coords()))

    def steps_for(self, scheme: str, n: int) -> int:
        """Recommended time-step count for a per-axis resolution n."""
        if scheme in SECOND_ORDER_SCHEMES:
            return n**2
        if scheme in EULER_SCHEMES:
            return n**self.euler_steps_power
        raise ValueError(f"unknown scheme {scheme!r}")

    def modes_for(self, n: int) -> int:
        """Recommended noise truncation for a per-axis resolution n."""
        return n


def _zero_start_1d(n):
    return np.zeros(n)


def _zero_start_2d(n):
    return np.zeros((n, n))


def _heat2d_start(n):
    c = np.zeros((n, n))
    c[0, 0] = 1.0  # the (1,1) eigenfunction is 2 sin(pi x1) sin(pi x2)
    return c


def _burgers_start(n):
    if n < 2:
        raise ValueError("burgers initial value needs at least 2 modes")
    c = np.zeros(n)
    c[0] = 0.6  # (3 sqrt(2)/5) sin(pi x)  = 0.6 e_1
    c[1] = 0.6  # (3 sqrt(2)/5) sin(2 pi x) = 0.6 e_2
    return c


_PRESETS = {
    "reacdiff1d": lambda: ProblemSpec(
        name="reacdiff1d",
        dimension=1,
        kappa=1.0 / 100.0,
        horizon=1.0,
        pair=NemytskiiPair(_drift_one_minus_y, _diff_reacdiff, _diff_reacdiff_dy),
        noise_family="sine",
        noise_decay=2.0,
        initial_spectral=_zero_start_1d,
        euler_steps_power=3,
    ),
    "reacdiff_cos": lambda: ProblemSpec(
        name="reacdiff_cos",
        dimension=1,
        kappa=1.0 / 20.0,
        horizon=1.0,
        pair=NemytskiiPair(_drift_one_minus_y, _diff_bounded, _diff_bounded_dy),
        noise_family="cosine",
        noise_decay=3.0,
        initial_spectral=_zero_start_1d,
        euler_steps_power=4,
    ),
    "heat2d": lambda: ProblemSpec(
        name="heat2d",
        dimension=2,
        kappa=1.0 / 50.0,
        horizon=1.0,
        pair=NemytskiiPair(_drift_zero, _diff_linear, _diff_linear_dy),
        noise_family="tensor_sine",
        noise_decay=4.0,
        initial_spectral=_heat2d_start,
        linear_multiplicative=True,
        euler_steps_power=4,
    ),
    "burgers": lambda: ProblemSpec(
        name="burgers",
        dimension=1,
        kappa=1.0 / 100.0,
        horizon=1.0,
        pair=NemytskiiPair(_drift_zero, _diff_linear, _diff_linear_dy),
        noise_family="sine",
        noise_decay=2.0,
        initial_spectral=_burgers_start,
        burgers_drift=True,
        euler_steps_power=3,
        baseline_euler="exponential_euler",
    ),
}


def preset_names():
    return sorted(_PRESETS)


def preset(name: str) -> ProblemSpec:
    """Return the named preset problem; unknown names list what exists."""
    try:
        factory = _PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; available presets: {', '.join(preset_names())}"
        ) from None
    return factory()
