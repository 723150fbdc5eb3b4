"""Manufactured solutions with hand-coded derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class Manufactured:
    """Exact solution u with gradient and Laplacian, plus default coefficients."""

    name: str
    u: Callable
    grad: Callable  # (x, y) -> (u_x, u_y)
    lap: Callable
    default_b: tuple = (1.0, 1.0)
    default_eps: float = 1e-2

    def source(self, eps: float, b) -> Callable:
        bx, by = b

        def f(x, y):
            gx, gy = self.grad(x, y)
            return -eps * self.lap(x, y) + bx * gx + by * gy

        return f

    def normal_derivative(self, normal_of: Callable) -> Callable:
        def g2(x, y):
            gx, gy = self.grad(x, y)
            nx, ny = normal_of(x, y)
            return gx * nx + gy * ny

        return g2


def unit_square_normal(x, y):
    """Outward normal of (0,1)^2 at boundary points (corners resolved arbitrarily)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx = np.zeros(np.broadcast(x, y).shape)
    ny = np.zeros_like(nx)
    tol = 1e-12
    nx = np.where(np.abs(x) < tol, -1.0, np.where(np.abs(x - 1) < tol, 1.0, nx))
    on_side = nx != 0
    ny = np.where(~on_side & (np.abs(y) < tol), -1.0,
                  np.where(~on_side & (np.abs(y - 1) < tol), 1.0, ny))
    return nx, ny


def _s2():
    def w(x, y):
        return 2 * x**3 + y + 1

    def u(x, y):
        return -w(x, y) ** 2

    def grad(x, y):
        ww = w(x, y)
        return -12 * x**2 * ww, -2 * ww

    def lap(x, y):
        return -24 * x * w(x, y) - 72 * x**4 - 2

    return Manufactured("s2", u, grad, lap, (1.0, 1.0), 1e-2)


def _s5():
    def u(x, y):
        return (y**2 - y) * (1 + np.tanh(20 * x - 10))

    def grad(x, y):
        t = np.tanh(20 * x - 10)
        return (y**2 - y) * 20 * (1 - t**2), (2 * y - 1) * (1 + t)

    def lap(x, y):
        t = np.tanh(20 * x - 10)
        return -800 * (y**2 - y) * t * (1 - t**2) + 2 * (1 + t)

    return Manufactured("s5", u, grad, lap, (0.0, 1.0), 1e-3)


S2 = _s2()
S5 = _s5()

DEFAULT_POLY = ((1.0, 0, 0), (2.0, 1, 0), (3.0, 0, 1), (-1.0, 2, 0), (1.0, 1, 1))


def polynomial(terms: Sequence = DEFAULT_POLY, b=(1.0, 1.0), eps: float = 0.1) -> Manufactured:
    """u = sum c x^a y^b from (c, a, b) terms."""
    terms = tuple((float(c), int(a), int(e)) for c, a, e in terms)

    def mono(x, y, c, a, e):
        if a < 0 or e < 0:
            return 0.0 * x
        return c * x**a * y**e

    def u(x, y):
        return sum(mono(x, y, c, a, e) for c, a, e in terms) + 0.0 * x

    def grad(x, y):
        gx = sum(mono(x, y, c * a, a - 1, e) for c, a, e in terms) + 0.0 * x
        gy = sum(mono(x, y, c * e, a, e - 1) for c, a, e in terms) + 0.0 * y
        return gx, gy

    def lap(x, y):
        return (sum(mono(x, y, c * a * (a - 1), a - 2, e) for c, a, e in terms)
                + sum(mono(x, y, c * e * (e - 1), a, e - 2) for c, a, e in terms) + 0.0 * x)

    return Manufactured("poly", u, grad, lap, tuple(b), eps)
