"""L2 metric on the direct image of ``K_{Y/X} (x) O_{P(E)}(k + r)`` and its curvature.

The fibration ``Y = P(E) -> X`` is trivialized by the product chart
``(z, zeta)``; sections of the direct image are ``zeta^alpha d zeta`` times
the chart frame of the line bundle, and their L2 pairing is

    H[a, b](z) = int zeta^a conj(zeta)^b exp(-total(z, zeta)) dA(zeta)

with Lebesgue area measure on the fiber chart.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import geometry, linalg
from .bundles import (
    BundleSpec,
    CurvatureTensor,
    NakanoForm,
    UnsupportedError,
    curvature_from_gram,
    nakano_form,
    proj_weight,
)
from .geometry import FiberQuadrature, Stencil
from .oracles import section_count


@dataclass(frozen=True)
class Resolution:
    """Numerical knobs for one run: fiber quadrature orders and FD stencil."""

    radial_order: int = 64
    angular_order: int | None = None  # None: max(16, 4k + 8)
    step: float = 1e-3
    levels: int = 2

    @property
    def stencil(self) -> Stencil:
        return Stencil(self.step, self.levels)

    def rule(self, f: int, k: int) -> FiberQuadrature:
        ang = self.angular_order or geometry.default_angular_order(k)
        return geometry.build_fiber_quadrature(f, self.radial_order, ang)

    def refined(self) -> "Resolution":
        """Half the stencil step, twice the quadrature orders."""
        return replace(
            self,
            radial_order=2 * self.radial_order,
            angular_order=None if self.angular_order is None else 2 * self.angular_order,
            step=self.step / 2.0,
        )

    def angular_for(self, k: int) -> int:
        return self.angular_order or geometry.default_angular_order(k)


DEFAULT_RESOLUTION = Resolution()


@dataclass(frozen=True)
class SectionBasis:
    k: int
    r: int
    exponents: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.exponents)


def section_basis(k: int, r: int) -> SectionBasis:
    """Monomials ``zeta^alpha`` of total degree ``<= k`` in graded-lex order."""
    if r not in (2, 3):
        raise UnsupportedError(f"rank {r} not supported (2 or 3)")
    if k < 0:
        raise ValueError("k must be >= 0")
    f = r - 1
    exps = []
    for total in range(k + 1):
        if f == 1:
            exps.append((total,))
        else:
            exps.extend((total - b, b) for b in range(total + 1))
    assert len(exps) == section_count(k, r)
    return SectionBasis(k, r, tuple(exps))


def monomials(nodes: np.ndarray, basis: SectionBasis) -> np.ndarray:
    """``(N, dim)`` array of ``zeta^alpha`` at the fiber nodes."""
    out = np.ones((nodes.shape[0], basis.dim), dtype=complex)
    for col, alpha in enumerate(basis.exponents):
        for c, e in enumerate(alpha):
            if e:
                out[:, col] *= nodes[:, c] ** e
    return out


def _rule_for(E: BundleSpec, rule: FiberQuadrature):
    if rule.f != E.rank - 1:
        raise ValueError(f"quadrature built for f={rule.f}, bundle needs f={E.rank - 1}")


def gram_matrix(
    E: BundleSpec, k: int, z, rule: FiberQuadrature, basis: SectionBasis | None = None
) -> np.ndarray:
    _rule_for(E, rule)
    pw = proj_weight(E, k)
    basis = basis or section_basis(k, E.rank)
    mono = monomials(rule.nodes, basis)
    dens = np.exp(-pw(z, rule.nodes))

    def integrand(_nodes):
        return mono[:, :, None] * mono.conj()[:, None, :] * dens[:, None, None]

    h = geometry.fiber_integrate(integrand, rule)
    return linalg.hermitize(h)[0]


@dataclass(frozen=True)
class GramFamily:
    """``z -> H(z)``; ``frame`` (constant, invertible) re-expresses the basis.

    With ``frame = U`` the sections are ``t'_a = sum_g U[g, a] t_g``, so the
    family becomes ``U^T H(z) conj(U)``.
    """

    E: BundleSpec
    k: int
    rule: FiberQuadrature
    frame: np.ndarray | None = None

    def __post_init__(self):
        _rule_for(self.E, self.rule)

    @property
    def basis(self) -> SectionBasis:
        return section_basis(self.k, self.E.rank)

    def __call__(self, z) -> np.ndarray:
        h = gram_matrix(self.E, self.k, z, self.rule)
        if self.frame is not None:
            u = np.asarray(self.frame)
            h = u.T @ h @ u.conj()
        return h


def gram_family(E: BundleSpec, k: int, res: Resolution = DEFAULT_RESOLUTION, frame=None) -> GramFamily:
    return GramFamily(E, k, res.rule(E.rank - 1, k), frame)


def normal_frame_transform(family: Callable, xi, stencil: Stencil = geometry.DEFAULT_STENCIL):
    """Family in the holomorphic frame that is normal at ``xi``.

    Returns a callable ``z -> H'(z)`` with ``H'(xi) = I`` and
    ``dH'/dz_i (xi) = 0``; see ``bundles.NormalFrame``.
    """
    from .bundles import normal_frame

    return normal_frame(family, xi, stencil)


@dataclass(frozen=True)
class L2Curvature:
    tensor: CurvatureTensor
    form: NakanoForm
    eigen: linalg.EigenReport


def l2_curvature(
    E: BundleSpec, k: int, xi, res: Resolution = DEFAULT_RESOLUTION, frame=None
) -> L2Curvature:
    xi = _xi(E, xi)
    fam = gram_family(E, k, res, frame)
    tensor = curvature_from_gram(fam, xi, res.stencil)
    form = nakano_form(tensor)
    return L2Curvature(tensor, form, form.eigen())


def _xi(E: BundleSpec, xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(0 if xi is None else xi, dtype=complex))
    if xi.size == 1 and E.m > 1:
        xi = np.full(E.m, xi[0])
    if xi.size != E.m:
        raise ValueError(f"base point needs {E.m} coordinates, got {xi.size}")
    return xi


def _to_matrix(t: np.ndarray) -> np.ndarray:
    m, _, r, _ = t.shape
    return t.transpose(0, 2, 1, 3).reshape(m * r, m * r)


def first_term(E: BundleSpec, k: int, xi, res: Resolution = DEFAULT_RESOLUTION) -> np.ndarray:
    """Fiber integral of the horizontal curvature of the line-bundle weight.

    Entry ``[(i, a), (j, b)]`` is ``int d^2 total/dz_i dzbar_j (xi, zeta)
    zeta^a conj(zeta)^b exp(-total) dA``, then brought into the normal frame
    at ``xi`` by ``S = H(xi)^{-1/2}`` on the section indices.
    """
    xi = _xi(E, xi)
    pw = proj_weight(E, k)
    rule = res.rule(E.rank - 1, k)
    basis = section_basis(k, E.rank)
    mono = monomials(rule.nodes, basis)
    dens = np.exp(-pw(xi, rule.nodes))

    def over_nodes(z):
        return pw(z, rule.nodes)

    m = E.m
    r = basis.dim
    t1 = np.zeros((m, m, r, r), dtype=complex)
    for i in range(m):
        for j in range(m):
            hz = np.asarray(geometry.mixed_ddbar(over_nodes, xi, i, j, res.stencil))
            w = rule.weights * hz * dens
            t1[i, j] = np.einsum("n,na,nb->ab", w, mono, mono.conj())
    s = linalg.inv_sqrt(gram_matrix(E, k, xi, rule, basis))
    t1 = np.einsum("ac,ijcd,db->ijab", s, t1, s)
    return linalg.hermitize(_to_matrix(t1))[0]


def default_fiber_samples() -> list[complex]:
    radii = (0.0, 0.3, 0.7, 1.0, 1.6, 2.5)
    return [r * np.exp(2j * np.pi * q / 8) for r in radii for q in range(8 if r else 1)]


def harmonicity_residual(
    E: BundleSpec,
    k: int,
    xi,
    i: int,
    samples: Sequence[complex] | None = None,
    stencil: Stencil = geometry.DEFAULT_STENCIL,
) -> float:
    """``sup |Lambda_omega d eta_i|`` over fiber samples (rank 2 only).

    ``eta_i = (d^2 total/dz_i dzetabar) dzetabar`` is the contraction of the
    line-bundle curvature with the horizontal lift of ``d/dz_i``;
    ``omega = (d^2 total / dzeta dzetabar)`` is the fiber Kahler form.
    """
    if E.rank != 2:
        raise UnsupportedError("harmonicity residual is implemented for rank 2 only")
    xi = _xi(E, xi)
    pw = proj_weight(E, k)
    samples = default_fiber_samples() if samples is None else samples
    worst = 0.0
    for s in samples:
        zeta = np.array([complex(s)])

        def d_base(fiber):
            return geometry.wirtinger_d1(lambda z: pw(z, fiber), xi, i, stencil)

        # d/dzeta (d/dzetabar d/dz_i total) = (1/4) Laplacian_zeta (d/dz_i total)
        num = complex(geometry.mixed_ddbar(d_base, zeta, 0, 0, stencil))
        omega = complex(geometry.mixed_ddbar(lambda w: pw(xi, w), zeta, 0, 0, stencil)).real
        if omega <= 0:
            raise ArithmeticError(f"fiber metric degenerate at zeta={s} (omega={omega:.3e})")
        worst = max(worst, abs(num) / omega)
    return float(worst)


@dataclass(frozen=True)
class DecompositionReport:
    theta: np.ndarray
    first_term: np.ndarray
    residual: np.ndarray
    residual_norm_ratio: float
    harmonicity_sup: float | None


def second_term_residual(
    E: BundleSpec,
    k: int,
    xi,
    res: Resolution = DEFAULT_RESOLUTION,
    harmonicity_samples: Sequence[complex] | None = None,
) -> DecompositionReport:
    """Full curvature minus the fiber-integrated horizontal curvature."""
    xi = _xi(E, xi)
    theta = l2_curvature(E, k, xi, res).form.matrix
    t1 = first_term(E, k, xi, res)
    resid = theta - t1
    n1 = np.linalg.norm(t1)
    nr = np.linalg.norm(resid)
    ratio = 0.0 if nr == 0 else (float(nr / n1) if n1 > 0 else float("inf"))
    harm = None
    if E.rank == 2:
        harm = max(
            harmonicity_residual(E, k, xi, i, harmonicity_samples, res.stencil) for i in range(E.m)
        )
    return DecompositionReport(theta, t1, resid, ratio, harm)
