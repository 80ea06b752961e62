"""Metric models for split bundles over P1 and P1xP1 and their curvature.

Sign conventions (pinned by the Fubini-Study calibration test):

* a line-bundle metric is ``h = exp(-phi)`` and its curvature matrix is the
  complex Hessian of ``phi``, so positive degree means positive curvature;
* a Gram family ``H`` has curvature ``-d^2 H'/dz_i dzbar_j`` in a normal
  frame, which agrees with the above on rank one (``H = exp(-psi)``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import geometry, linalg
from .geometry import DEFAULT_STENCIL, Stencil
from .perturbation import Perturbation

BASES = {"P1": 1, "P1xP1": 2}


class UnsupportedError(ValueError):
    pass


class PreconditionViolation(ArithmeticError):
    def __init__(self, message: str, sample=None, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.sample = sample
        self.min_eigenvalue = min_eigenvalue


class SplitClass(str, enum.Enum):
    AMPLE = "AMPLE"
    NEF_NOT_AMPLE = "NEF_NOT_AMPLE"
    NOT_NEF = "NOT_NEF"


@dataclass(frozen=True)
class LineWeight:
    """``phi(z) = sum_t degrees[t] * log(1 + |z_t|^2) + perturbation(z)``."""

    degrees: tuple[int, ...]
    perturbation: Perturbation | None = None

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        if self.perturbation is not None and self.perturbation.arity > len(self.degrees):
            raise ValueError("perturbation uses a coordinate the base does not have")

    @property
    def m(self) -> int:
        return len(self.degrees)

    def __call__(self, z) -> float:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        val = 0.0
        for d, zt in zip(self.degrees, z):
            if d:
                val += d * np.log1p(abs(zt) ** 2)
        if self.perturbation is not None:
            val += self.perturbation(z)
        return float(val)


@dataclass(frozen=True)
class BundleSpec:
    base: str
    summands: tuple[LineWeight, ...]

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base {self.base!r}; expected one of {sorted(BASES)}")
        if not self.summands:
            raise ValueError("bundle needs at least one summand")
        m = BASES[self.base]
        for s in self.summands:
            if s.m != m:
                raise ValueError(f"summand degrees {s.degrees} do not match base {self.base}")

    @classmethod
    def split(cls, base: str, degrees, perturbations: Sequence[Perturbation | None] | None = None):
        """Build from per-summand degrees (ints for P1, pairs for P1xP1)."""
        degs = [tuple(d) if isinstance(d, (tuple, list)) else (d,) for d in degrees]
        perts = list(perturbations) if perturbations is not None else [None] * len(degs)
        if len(perts) != len(degs):
            raise ValueError("one perturbation entry per summand expected")
        return cls(base, tuple(LineWeight(d, p) for d, p in zip(degs, perts)))

    @property
    def m(self) -> int:
        return BASES[self.base]

    @property
    def rank(self) -> int:
        return len(self.summands)

    @property
    def degrees(self) -> tuple[tuple[int, ...], ...]:
        return tuple(s.degrees for s in self.summands)

    @property
    def ample(self) -> bool:
        return all(d > 0 for s in self.summands for d in s.degrees)

    @property
    def nef(self) -> bool:
        return all(d >= 0 for s in self.summands for d in s.degrees)

    @property
    def perturbed(self) -> bool:
        return any(s.perturbation is not None for s in self.summands)


def line_curvature(w: LineWeight, at, stencil: Stencil = DEFAULT_STENCIL) -> np.ndarray:
    hess = geometry.complex_hessian(w, at, stencil)
    return linalg.hermitize(hess)[0]


@dataclass(frozen=True)
class ProjWeight:
    """Weight of ``O_{P(E)}(k + r)`` in the chart ``w = (1, zeta_1, ..)``.

    ``total(z, zeta) = twist * log(sum_i |w_i|^2 exp(phi_i(z)))``; ``zeta``
    may be a single fiber point or an ``(N, f)`` array of them.
    """

    bundle: BundleSpec
    twist: int

    @property
    def f(self) -> int:
        return self.bundle.rank - 1

    def base_weights(self, z) -> np.ndarray:
        return np.array([s(z) for s in self.bundle.summands])

    def __call__(self, z, zeta):
        phis = self.base_weights(z)
        zeta = np.asarray(zeta, dtype=complex)
        single = zeta.ndim < 2
        zeta = zeta.reshape(-1, self.f)
        acc = np.exp(phis[0]) + (np.abs(zeta) ** 2 * np.exp(phis[1:])).sum(axis=1)
        val = self.twist * np.log(acc)
        return float(val[0]) if single else val

    def joint(self, coords) -> float:
        """``total`` as a function of the concatenated ``(z, zeta)`` coordinates."""
        coords = np.asarray(coords, dtype=complex)
        m = self.bundle.m
        return self(coords[:m], coords[m:])


def proj_weight(E: BundleSpec, k: int) -> ProjWeight:
    if E.rank not in (2, 3):
        raise UnsupportedError(f"rank {E.rank} not supported (2 or 3)")
    if k < 0:
        raise ValueError("k must be >= 0")
    return ProjWeight(E, k + E.rank)


@dataclass(frozen=True)
class TotalPositivity:
    verdict: linalg.Verdict
    min_eigenvalue: float
    worst_sample: tuple


def _fmt(point) -> str:
    return "(" + ", ".join(f"{complex(c):.4g}" for c in np.atleast_1d(point)) + ")"


def verify_total_positivity(
    pw: ProjWeight, samples, stencil: Stencil = DEFAULT_STENCIL, margin: float = 1e-8
) -> TotalPositivity:
    """Check the joint (base + fiber) complex Hessian of the weight at samples.

    Raises PreconditionViolation at the first sample where it is indefinite.
    """
    worst = np.inf
    worst_sample = None
    verdicts = []
    for z, zeta in samples:
        coords = np.concatenate([np.atleast_1d(z), np.atleast_1d(zeta)]).astype(complex)
        hess, _ = linalg.hermitize(geometry.complex_hessian(pw.joint, coords, stencil))
        verdict = linalg.pd_verdict(hess, margin)
        lam = linalg.eigvalsh(hess).min
        if verdict is linalg.Verdict.INDEFINITE:
            raise PreconditionViolation(
                f"weight Hessian indefinite at z={_fmt(z)}, zeta={_fmt(zeta)} "
                f"(min eigenvalue {lam:.3e})",
                sample=(z, zeta),
                min_eigenvalue=lam,
            )
        verdicts.append(verdict)
        if lam < worst:
            worst, worst_sample = lam, (z, zeta)
    overall = (
        linalg.Verdict.POSITIVE_DEFINITE
        if all(v is linalg.Verdict.POSITIVE_DEFINITE for v in verdicts)
        else linalg.Verdict.SEMIDEFINITE_WITHIN_MARGIN
    )
    return TotalPositivity(overall, float(worst), worst_sample)


def default_samples(E: BundleSpec, n: int = 5, radius: float = 1.5):
    """Deterministic grid of ``(z, zeta)`` samples; ``n`` points per real axis."""
    grid = np.linspace(-radius, radius, n)
    pts = [complex(x, y) for x in grid for y in grid]
    f = E.rank - 1
    zs = [np.full(E.m, p) for p in pts[:: max(1, len(pts) // 5)]]
    zetas = [np.full(f, p) for p in pts]
    return [(z, zeta) for z in zs for zeta in zetas]


# --------------------------------------------------------------------------
# curvature of Gram families


@dataclass(frozen=True)
class CurvatureTensor:
    """``entries[i, j, a, b]`` = ``c_{i jbar a b}``; ``asymmetry`` from hermitizing."""

    entries: np.ndarray
    asymmetry: float = 0.0

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def rank(self) -> int:
        return self.entries.shape[2]


@dataclass(frozen=True)
class NakanoForm:
    matrix: np.ndarray
    m: int
    rank: int

    def eigen(self) -> linalg.EigenReport:
        return linalg.eigvalsh(self.matrix)


def _tensor_to_matrix(c: np.ndarray) -> np.ndarray:
    m, _, r, _ = c.shape
    return c.transpose(0, 2, 1, 3).reshape(m * r, m * r)


def _matrix_to_tensor(a: np.ndarray, m: int, r: int) -> np.ndarray:
    return a.reshape(m, r, m, r).transpose(0, 2, 1, 3)


def hermitize_tensor(c: np.ndarray) -> CurvatureTensor:
    m, r = c.shape[0], c.shape[2]
    mat, asym = linalg.hermitize(_tensor_to_matrix(c))
    return CurvatureTensor(_matrix_to_tensor(mat, m, r).copy(), asym)


@dataclass
class NormalFrame:
    """Gram family rewritten in a holomorphic frame normal at ``xi``.

    Acts on a Hermitian-matrix-valued family ``K(z)``:
    ``K'(z) = G(z)^* K(z) G(z)``, ``G(z) = [I - sum_i K(xi)^{-1} dK_i (z_i - xi_i)] K(xi)^{-1/2}``.
    """

    family: Callable
    xi: np.ndarray
    k0: np.ndarray
    dk: list
    s0: np.ndarray = field(repr=False)
    k0_inv: np.ndarray = field(repr=False)

    def frame(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        lin = np.eye(self.k0.shape[0], dtype=complex)
        for i, dki in enumerate(self.dk):
            lin = lin - (self.k0_inv @ dki) * (z[i] - self.xi[i])
        return lin @ self.s0

    def __call__(self, z) -> np.ndarray:
        g = self.frame(z)
        return g.conj().T @ np.asarray(self.family(z)) @ g


def normal_frame(family: Callable, xi, stencil: Stencil = DEFAULT_STENCIL) -> NormalFrame:
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    k0 = linalg.check_hermitian(np.asarray(family(xi)), rtol=1e-9)
    s0 = linalg.inv_sqrt(k0)
    dk = [np.asarray(geometry.wirtinger_d1(family, xi, i, stencil)) for i in range(xi.size)]
    return NormalFrame(family, xi, k0, dk, s0, np.linalg.inv(k0))


def curvature_from_gram(family: Callable, xi, stencil: Stencil = DEFAULT_STENCIL) -> CurvatureTensor:
    """Chern curvature of a Gram family ``H[a, b] = <t_a, t_b>`` at ``xi``.

    The frame change ``t'_a = sum_g G[g, a] t_g`` acts on the transpose
    ``K = H^T`` as ``G^* K G``, so the normal frame is built for ``K`` and the
    result is transposed back on the bundle indices.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))

    def transposed(z):
        return np.asarray(family(z)).T

    nf = normal_frame(transposed, xi, stencil)
    m = xi.size
    r = nf.k0.shape[0]
    c = np.zeros((m, m, r, r), dtype=complex)
    for i in range(m):
        for j in range(m):
            c[i, j] = -np.asarray(geometry.mixed_ddbar(nf, xi, i, j, stencil)).T
    return hermitize_tensor(c)


def nakano_form(C: CurvatureTensor) -> NakanoForm:
    mat, _ = linalg.hermitize(_tensor_to_matrix(C.entries))
    return NakanoForm(mat, C.m, C.rank)


def _griffiths_at(c: np.ndarray, v: np.ndarray) -> float:
    mat = np.einsum("i,j,ijab->ab", v, v.conj(), c)
    return linalg.eigvalsh(linalg.hermitize(mat)[0]).min


def _sphere_point(t: float, phi: float) -> np.ndarray:
    return np.array([np.cos(t), np.exp(1j * phi) * np.sin(t)])


def griffiths_min(C: CurvatureTensor, grid: int = 200, refine: int = 6) -> float:
    """Minimum of ``Theta(v x e, v x e)`` over unit decomposable tensors.

    Deterministic sphere grid plus shrinking local grids around the best
    point, so the value approximates the true minimum from above.
    """
    c = C.entries
    if C.m == 1:
        return _griffiths_at(c, np.ones(1, dtype=complex))
    if C.m != 2:
        raise UnsupportedError("griffiths_min supports base dimension 1 or 2")
    # modulo an overall phase, S^3 is (t, phi) with t in [0, pi/2]
    nt = max(2, int(round(np.sqrt(grid / 2))))
    nphi = max(2, grid // nt)
    best = (np.inf, 0.0, 0.0)
    for t in np.linspace(0.0, np.pi / 2, nt):
        for phi in np.linspace(0.0, 2 * np.pi, nphi, endpoint=False):
            val = _griffiths_at(c, _sphere_point(t, phi))
            if val < best[0]:
                best = (val, t, phi)
    dt, dphi = (np.pi / 2) / max(nt - 1, 1), 2 * np.pi / nphi
    for _ in range(refine):
        _, t0, p0 = best
        for t in np.linspace(t0 - dt, t0 + dt, 5):
            t = min(max(t, 0.0), np.pi / 2)
            for phi in np.linspace(p0 - dphi, p0 + dphi, 5):
                val = _griffiths_at(c, _sphere_point(t, phi))
                if val < best[0]:
                    best = (val, t, phi)
        dt /= 2.5
        dphi /= 2.5
    return float(best[0])


def dual_curvature(C: CurvatureTensor) -> CurvatureTensor:
    """Curvature of the dual metric: minus the transpose on bundle indices."""
    return CurvatureTensor(-C.entries.transpose(0, 1, 3, 2).copy(), C.asymmetry)
