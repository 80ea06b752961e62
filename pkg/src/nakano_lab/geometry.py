"""Wirtinger finite differences and quadrature over the fiber chart.

Fields are plain callables taking a 1-d complex coordinate array and
returning a scalar or an ndarray; derivatives act entrywise, so a field may
return a whole Gram matrix (or a vector of values over quadrature nodes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Field = Callable[[np.ndarray], "np.ndarray | complex | float"]


class IntegrationError(ArithmeticError):
    pass


class UnsupportedError(ValueError):
    pass


@dataclass(frozen=True)
class Stencil:
    step: float = 1e-3
    richardson_levels: int = 2

    def __post_init__(self):
        if not 1e-6 <= self.step <= 1e-1:
            raise ValueError(f"stencil step {self.step} outside [1e-6, 1e-1]")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")

    def halved(self) -> "Stencil":
        return Stencil(self.step / 2.0, self.richardson_levels)


DEFAULT_STENCIL = Stencil()


def _point(at) -> np.ndarray:
    p = np.atleast_1d(np.asarray(at, dtype=complex)).copy()
    if not np.all(np.isfinite(p)):
        raise ValueError("chart point has non-finite coordinates")
    return p


def _shift(p: np.ndarray, *moves: tuple[int, complex]) -> np.ndarray:
    q = p.copy()
    for idx, delta in moves:
        q[idx] += delta
    return q


def _richardson(rule: Callable[[float], np.ndarray], stencil: Stencil):
    # central differences: error series in h^2, h^4, ...
    h = stencil.step
    table = [np.asarray(rule(h / 2**level)) for level in range(stencil.richardson_levels)]
    for order in range(1, len(table)):
        factor = 4.0**order
        table = [
            (factor * table[n + 1] - table[n]) / (factor - 1.0) for n in range(len(table) - 1)
        ]
    return table[0]


def wirtinger_d1(field: Field, at, i: int, stencil: Stencil = DEFAULT_STENCIL):
    """``d field / d z_i`` as ``(d/dx_i - sqrt(-1) d/dy_i) / 2``."""
    p = _point(at)

    def central(h):
        fx = np.asarray(field(_shift(p, (i, h)))) - np.asarray(field(_shift(p, (i, -h))))
        fy = np.asarray(field(_shift(p, (i, 1j * h)))) - np.asarray(field(_shift(p, (i, -1j * h))))
        return (fx - 1j * fy) / (4.0 * h)

    return _richardson(central, stencil)


def mixed_ddbar(field: Field, at, i: int, j: int, stencil: Stencil = DEFAULT_STENCIL):
    """``d^2 field / dz_i dzbar_j``.

    The diagonal case uses the five-point Laplacian (``1/4`` of it); the
    off-diagonal case composes one-variable central differences in the real
    coordinates ``x_i, y_i, x_j, y_j``.
    """
    p = _point(at)

    if i == j:

        def rule(h):
            f0 = np.asarray(field(p))
            s = (
                np.asarray(field(_shift(p, (i, h))))
                + np.asarray(field(_shift(p, (i, -h))))
                + np.asarray(field(_shift(p, (i, 1j * h))))
                + np.asarray(field(_shift(p, (i, -1j * h))))
            )
            return (s - 4.0 * f0) / (4.0 * h * h)

        return _richardson(rule, stencil)

    def second(da: complex, db: complex, h: float):
        # d/da d/db along the real directions da (coord i) and db (coord j)
        fpp = np.asarray(field(_shift(p, (i, da * h), (j, db * h))))
        fpm = np.asarray(field(_shift(p, (i, da * h), (j, -db * h))))
        fmp = np.asarray(field(_shift(p, (i, -da * h), (j, db * h))))
        fmm = np.asarray(field(_shift(p, (i, -da * h), (j, -db * h))))
        return (fpp - fpm - fmp + fmm) / (4.0 * h * h)

    def rule(h):
        xx = second(1.0, 1.0, h)
        yy = second(1j, 1j, h)
        xy = second(1.0, 1j, h)
        yx = second(1j, 1.0, h)
        return (xx + yy + 1j * (xy - yx)) / 4.0

    return _richardson(rule, stencil)


def complex_hessian(field: Field, at, stencil: Stencil = DEFAULT_STENCIL) -> np.ndarray:
    """Matrix ``(d^2 field / dz_i dzbar_j)`` for a scalar field."""
    p = _point(at)
    n = p.size
    out = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            out[a, b] = complex(mixed_ddbar(field, p, a, b, stencil))
    return out


# --------------------------------------------------------------------------
# fiber quadrature


@dataclass(frozen=True)
class FiberQuadrature:
    """Product rule for ``int_{C^f} g dA`` with Lebesgue area measure.

    ``nodes`` has shape ``(N, f)``; ``weights`` already carry the Jacobian.
    """

    f: int
    radial_order: int
    angular_order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size

    def halved(self) -> "FiberQuadrature":
        return build_fiber_quadrature(
            self.f, max(self.radial_order // 2, 2), max(self.angular_order // 2, 2), _check=False
        )


def _plane_rule(radial_order: int, angular_order: int):
    # u = rho^2 / (1 + rho^2) maps (0, inf) to (0, 1); dA = du dtheta / (2 (1-u)^2)
    x, w = np.polynomial.legendre.leggauss(radial_order)
    u = (x + 1.0) / 2.0
    wu = w / 2.0
    rho = np.sqrt(u / (1.0 - u))
    radial_w = wu / (2.0 * (1.0 - u) ** 2)
    theta = 2.0 * np.pi * np.arange(angular_order) / angular_order
    ang_w = 2.0 * np.pi / angular_order
    nodes = (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = (radial_w[:, None] * ang_w * np.ones(angular_order)[None, :]).ravel()
    return nodes, weights


def build_fiber_quadrature(
    f: int, radial_order: int = 64, angular_order: int = 16, *, _check: bool = True
) -> FiberQuadrature:
    if f not in (1, 2):
        raise UnsupportedError(f"fiber dimension {f} not supported (1 or 2)")
    if _check and (radial_order < 4 or angular_order < 4):
        raise ValueError("quadrature orders must be >= 4")
    z, w = _plane_rule(radial_order, angular_order)
    if f == 1:
        nodes = z[:, None]
        weights = w
    else:
        nodes = np.stack(
            [np.repeat(z, z.size), np.tile(z, z.size)], axis=1
        )
        weights = np.repeat(w, w.size) * np.tile(w, w.size)
    return FiberQuadrature(f, radial_order, angular_order, nodes, weights)


def default_angular_order(k: int) -> int:
    return max(16, 4 * k + 8)


def fiber_integrate(density: Callable[[np.ndarray], np.ndarray], rule: FiberQuadrature):
    """Weighted sum of ``density`` over the rule's nodes.

    ``density`` is vectorized: it receives the ``(N, f)`` node array and
    returns values with leading axis ``N`` (trailing axes are kept, so a
    matrix-valued density integrates entrywise).
    """
    values = np.asarray(density(rule.nodes))
    if values.shape[:1] != (rule.size,):
        raise IntegrationError(
            f"density returned shape {values.shape}, expected leading axis {rule.size}"
        )
    flat = values.reshape(rule.size, -1)
    bad = ~np.all(np.isfinite(flat), axis=1)
    if np.any(bad):
        node = rule.nodes[int(np.argmax(bad))]
        raise IntegrationError(f"non-finite density at fiber node {tuple(node)}")
    out = np.tensordot(rule.weights, values, axes=(0, 0))
    return out[()] if out.ndim == 0 else out


def integration_delta(density, rule: FiberQuadrature) -> float:
    """``|I(rule) - I(rule at half the orders)|`` (max over entries)."""
    fine = np.asarray(fiber_integrate(density, rule))
    coarse = np.asarray(fiber_integrate(density, rule.halved()))
    return float(np.max(np.abs(fine - coarse))) if fine.size else 0.0
