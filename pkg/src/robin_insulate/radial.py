"""Closed-form radial solutions on balls with unit source and constant insulation.

Body profile ``u(r) = A - r^2/(2n)``. In the layer ``R < r < R + eps h`` the
solution is radially harmonic, ``C + B log r`` (n = 2) or ``C + B r^(2-n)``
(n >= 3), with ``eps u'(R+) = u'(R-) = -R/n`` and the outer condition
``eps u' + beta u = 0`` taken from the variational form of the layer energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def unit_ball_volume(n: int) -> float:
    """omega_n = pi^(n/2) / Gamma(n/2 + 1)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _check(R, n, **positive):
    if not R > 0:
        raise ValueError("R must be positive")
    if int(n) != n or n < 2:
        raise ValueError("n must be an integer >= 2")
    for name, value in positive.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class RadialSolution:
    R: float
    n: int
    beta: float | None
    h: float
    eps: float | None
    body_constant: float
    layer_coefficient: float = 0.0
    layer_constant: float = 0.0

    @property
    def outer_radius(self) -> float:
        return self.R + (self.eps * self.h if self.eps is not None else 0.0)

    def body_profile(self, r):
        r = np.asarray(r, dtype=float)
        return self.body_constant - r**2 / (2 * self.n)

    def layer_profile(self, r):
        r = np.asarray(r, dtype=float)
        if self.n == 2:
            return self.layer_constant + self.layer_coefficient * np.log(r)
        return self.layer_constant + self.layer_coefficient * r ** (2 - self.n)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.eps is None:
            return self.body_profile(r)
        return np.where(r <= self.R, self.body_profile(r), self.layer_profile(np.maximum(r, self.R)))

    def derivative(self, r, side: str = "body"):
        r = np.asarray(r, dtype=float)
        if side == "body":
            return -r / self.n
        return self.layer_coefficient * (1.0 / r if self.n == 2 else (2 - self.n) * r ** (1 - self.n))

    @property
    def boundary_value(self) -> float:
        """u on the body boundary r = R."""
        return float(self.body_profile(self.R))

    @property
    def outer_value(self) -> float:
        return float(self(self.outer_radius))

    @property
    def heat_content(self) -> float:
        """int_{B_R} u = omega_n (R^n A - R^(n+2) / (2(n+2)))."""
        w, R, n = unit_ball_volume(self.n), self.R, self.n
        return w * (R**n * self.body_constant - R ** (n + 2) / (2 * (n + 2)))

    @property
    def energy(self) -> float:
        """Minimum energy; equals minus half the heat content for unit source."""
        return -0.5 * self.heat_content


def limit_ball_solution(R: float, n: int, beta: float, h_const: float) -> RadialSolution:
    """Solution of the limit problem ``(1+beta h) du/dnu + beta u = 0``."""
    _check(R, n, beta=beta)
    if h_const < 0:
        raise ValueError("h must be non-negative")
    u_R = R * (1.0 + beta * h_const) / (n * beta)
    return RadialSolution(R, int(n), beta, h_const, None, u_R + R**2 / (2 * n))


def dirichlet_ball_solution(R: float, n: int, h_const: float) -> RadialSolution:
    """Solution of ``h du/dnu + u = 0`` (the beta -> infinity limit)."""
    _check(R, n, h=h_const)
    return RadialSolution(R, int(n), None, h_const, None, R * h_const / n + R**2 / (2 * n))


def layer_ball_solution(R: float, n: int, beta: float, h_const: float, eps: float) -> RadialSolution:
    """Solution of the thin-layer problem with constant thickness ``eps h``."""
    _check(R, n, beta=beta, h=h_const, eps=eps)
    n = int(n)
    r_out = R + eps * h_const
    # eps u'(r) = -R^n / (n r^(n-1)) throughout the layer
    if n == 2:
        b = -(R**2) / (2.0 * eps)
        basis = math.log
    else:
        b = R**n / (n * (n - 2) * eps)
        basis = lambda r: r ** (2 - n)  # noqa: E731
    u_out = R**n / (n * beta * r_out ** (n - 1))
    c = u_out - b * basis(r_out)
    u_R = c + b * basis(R)
    return RadialSolution(R, n, beta, h_const, eps, u_R + R**2 / (2 * n), b, c)


def robin_ball_solution(R: float, n: int, beta: float) -> RadialSolution:
    """Uninsulated Robin ball (h = 0)."""
    return limit_ball_solution(R, n, beta, 0.0)
