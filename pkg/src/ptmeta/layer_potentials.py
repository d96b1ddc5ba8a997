"""Single layer and Neumann-Poincare operators on disk/sphere boundaries.

Densities are expanded in circular harmonics exp(i n t), |n| <= N, on each
disk, or in spherical harmonics Y_l^m, l <= N, on each sphere.  An operator
matrix maps density coefficients to the coefficients of the boundary trace,
so the identity operator is the identity matrix.

Self-interaction of a resonator with the free-space kernel is diagonal in
this basis and is integrated in closed form.  Everything else (the other
resonator, lattice images, the smooth part of a periodic kernel) is a smooth
kernel handled by boundary quadrature and projected onto the harmonics.

Normal derivatives never need gradients of the kernel.  The smooth part of
a potential solves the Helmholtz equation inside each resonator, so its
normal derivative is the interior Dirichlet-to-Neumann map applied to its
trace, which is diagonal in the harmonic basis.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import (h1vp, hankel1, jv, jvp, roots_jacobi, spherical_jn, spherical_yn,
                           sph_harm_y, eval_legendre)

from .errors import ConfigurationError, IllConditionedError, SingularityError
from .geometry import BoundaryQuadrature, LatticeConfig, ResonatorShape, boundary_quadrature
from .greens import _free, check_wood_anomaly, green_periodic, green_quasi_ewald

logger = logging.getLogger(__name__)

DEFAULT_ORDER = {"disk": 6, "sphere": 8}
COND_MAX = 1e12


# ---------------------------------------------------------------------------
# Harmonic bases
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class HarmonicBasis:
    """Harmonic basis on one resonator boundary.

    Attributes
    ----------
    quadrature : BoundaryQuadrature
    degrees : ndarray of int
        |n| on a circle, l on a sphere.
    orders : ndarray of int
        n on a circle, m on a sphere.
    values : ndarray, shape (n_nodes, n_modes)
        Basis functions at the quadrature nodes.
    projector : ndarray, shape (n_modes, n_nodes)
        Maps node values to harmonic coefficients.
    """

    quadrature: BoundaryQuadrature
    degrees: np.ndarray
    orders: np.ndarray
    values: np.ndarray = field(repr=False)
    projector: np.ndarray = field(repr=False)

    @property
    def shape(self) -> ResonatorShape:
        return self.quadrature.shape

    @property
    def n_modes(self) -> int:
        return len(self.degrees)

    @property
    def constant_index(self) -> int:
        return int(np.flatnonzero(self.degrees == 0)[0])

    @property
    def constant_value(self) -> float:
        """Value of the degree-0 basis function."""
        return 1.0 if self.shape.dim == 2 else 1.0 / np.sqrt(4.0 * np.pi)

    @property
    def integrals(self) -> np.ndarray:
        """Boundary integral of each basis function."""
        out = np.zeros(self.n_modes)
        out[self.constant_index] = self.constant_value * self.shape.boundary_measure
        return out

    def constant(self, value=1.0) -> np.ndarray:
        """Coefficients of a constant function."""
        c = np.zeros(self.n_modes, dtype=complex)
        c[self.constant_index] = value / self.constant_value
        return c


def harmonic_basis(quad: BoundaryQuadrature) -> HarmonicBasis:
    """Build the circular or spherical harmonic basis on a quadrature."""
    N = quad.basis_order
    R = quad.shape.radius
    if quad.shape.kind == "disk":
        n = np.arange(-N, N + 1)
        vals = np.exp(1j * np.outer(quad.theta, n))
        proj = vals.conj().T / quad.n_nodes
        return HarmonicBasis(quad, np.abs(n), n, vals, proj)
    lm = [(l, m) for l in range(N + 1) for m in range(-l, l + 1)]
    ls = np.array([l for l, _ in lm])
    ms = np.array([m for _, m in lm])
    vals = np.stack([sph_harm_y(l, m, quad.theta, quad.phi) for l, m in lm], axis=-1)
    proj = (vals.conj() * (quad.weights / R**2)[:, None]).T
    return HarmonicBasis(quad, ls, ms, vals, proj)


@dataclass(frozen=True)
class Discretization:
    """Harmonic bases on a set of resonators (normally the two of a dimer)."""

    bases: tuple

    @property
    def dim(self) -> int:
        return self.bases[0].shape.dim

    @property
    def sizes(self):
        return [b.n_modes for b in self.bases]

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def size(self) -> int:
        return int(sum(self.sizes))

    @property
    def degrees(self) -> np.ndarray:
        return np.concatenate([b.degrees for b in self.bases])

    def block(self, i) -> slice:
        o = self.offsets
        return slice(int(o[i]), int(o[i + 1]))

    def indicator(self, i, value=1.0) -> np.ndarray:
        """Coefficients of value * chi_{dD_i}."""
        c = np.zeros(self.size, dtype=complex)
        c[self.block(i)] = self.bases[i].constant(value)
        return c

    def integral_weights(self, i=None) -> np.ndarray:
        """Row vector w with w @ coeffs = integral over dD_i (or all of dD)."""
        w = np.zeros(self.size)
        for j, b in enumerate(self.bases):
            if i is None or i == j:
                w[self.block(j)] = b.integrals
        return w

    def project(self, func: Callable) -> np.ndarray:
        """Coefficients of the boundary trace of ``func(points, normals, i)``."""
        out = np.zeros(self.size, dtype=complex)
        for i, b in enumerate(self.bases):
            q = b.quadrature
            out[self.block(i)] = b.projector @ func(q.nodes, q.normals, i)
        return out


def discretize(shapes: Sequence[ResonatorShape], basis_order: Optional[int] = None,
               n_nodes: Optional[int] = None) -> Discretization:
    """Harmonic discretization of a set of resonators.

    Parameters
    ----------
    shapes : sequence of ResonatorShape
    basis_order : int, optional
        Defaults to 6 for disks and 8 for spheres.
    n_nodes : int, optional
        Quadrature size override, see ``boundary_quadrature``.
    """
    shapes = tuple(shapes)
    if not shapes:
        raise ConfigurationError("need at least one resonator")
    if len({s.kind for s in shapes}) != 1:
        raise ConfigurationError("mixed disk/sphere sets are not supported")
    order = DEFAULT_ORDER[shapes[0].kind] if basis_order is None else basis_order
    for i, a in enumerate(shapes):
        for b in shapes[i + 1:]:
            d = np.linalg.norm(np.subtract(a.center, b.center))
            if d <= a.radius + b.radius:
                raise SingularityError("resonators overlap or touch: coincident boundary nodes")
    return Discretization(tuple(harmonic_basis(boundary_quadrature(s, order, n_nodes))
                                for s in shapes))


# ---------------------------------------------------------------------------
# Closed-form self interactions
# ---------------------------------------------------------------------------
def _sph_h(l, z, derivative=False):
    return spherical_jn(l, z, derivative) + 1j * spherical_yn(l, z, derivative)


def self_single_layer(basis: HarmonicBasis, k) -> np.ndarray:
    """Eigenvalues of the free-space S^k on its own circle/sphere."""
    R = basis.shape.radius
    deg = basis.degrees
    if basis.shape.dim == 2:
        if k == 0:
            out = np.where(deg == 0, R * np.log(R), -R / (2.0 * np.maximum(deg, 1)))
            return out.astype(complex)
        n = basis.orders
        return -0.5j * np.pi * R * jv(n, k * R) * hankel1(n, k * R)
    if k == 0:
        return (-R / (2.0 * deg + 1.0)).astype(complex)
    return -1j * k * R**2 * spherical_jn(deg, k * R) * _sph_h(deg, k * R)


def self_exterior_flux(basis: HarmonicBasis, k) -> np.ndarray:
    """Eigenvalues of 1/2 I + K^{k,*} for a lone circle/sphere."""
    R = basis.shape.radius
    deg = basis.degrees
    if basis.shape.dim == 2:
        if k == 0:
            return np.where(deg == 0, 1.0, 0.5).astype(complex)
        n = basis.orders
        return -0.5j * np.pi * k * R * jv(n, k * R) * h1vp(n, k * R)
    if k == 0:
        return ((deg + 1.0) / (2.0 * deg + 1.0)).astype(complex)
    return -1j * k**2 * R**2 * spherical_jn(deg, k * R) * _sph_h(deg, k * R, True)


def interior_dtn(basis: HarmonicBasis, k) -> np.ndarray:
    """Interior Dirichlet-to-Neumann eigenvalues (outward normal) for Helmholtz k."""
    R = basis.shape.radius
    deg = basis.degrees
    if k == 0:
        return (deg / R).astype(complex)
    if basis.shape.dim == 2:
        n = basis.orders
        num, den = k * jvp(n, k * R), jv(n, k * R)
    else:
        num, den = k * spherical_jn(deg, k * R, True), spherical_jn(deg, k * R)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / den
    if not np.all(np.isfinite(ratio)) or np.any(np.abs(ratio) > 1e10 * (1.0 + deg) / R):
        raise SingularityError(f"k = {k} is at an interior Dirichlet eigenvalue")
    return ratio


def zonal_self_eigenvalues(basis: HarmonicBasis, f: Callable, sqrt_singular: bool = False):
    """Self-block eigenvalues of a kernel f(|x - y|) on a circle or sphere.

    Uses the Funk-Hecke formula.  With ``sqrt_singular`` the kernel is taken
    to vanish like |x - y| at coincidence and a Gauss-Jacobi rule absorbs
    the square-root behaviour in the cosine variable.
    """
    R = basis.shape.radius
    deg = basis.degrees
    if basis.shape.dim == 3:
        if sqrt_singular:
            t, w = roots_jacobi(64, 0.5, 0.0)
            g = f(R * np.sqrt(2.0 - 2.0 * t)) / np.sqrt(1.0 - t)
        else:
            t, w = np.polynomial.legendre.leggauss(64)
            g = f(R * np.sqrt(2.0 - 2.0 * t))
        return np.array([2.0 * np.pi * R**2 * np.sum(w * g * eval_legendre(l, t)) for l in deg],
                        dtype=complex)
    # circle: integrate over the angle difference on (0, 2 pi), kink at the ends
    t, w = np.polynomial.legendre.leggauss(256)
    s = np.pi * (t + 1.0)
    g = f(2.0 * R * np.abs(np.sin(s / 2.0))) * np.pi
    return np.array([R * np.sum(w * g * np.cos(n * s)) for n in basis.orders], dtype=complex)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BoundaryOperator:
    """Dense operator in the harmonic basis of a Discretization.

    ``self_diagonal`` holds the closed-form self-interaction eigenvalues that
    are included in ``matrix``; the remainder ``matrix - diag`` is the smooth
    part, used to derive normal derivatives.
    """

    matrix: np.ndarray = field(repr=False)
    kind: str
    k: complex
    discretization: Discretization = field(repr=False)
    alpha: Optional[np.ndarray] = None
    lattice: Optional[LatticeConfig] = None
    self_diagonal: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.discretization.size:
            raise ConfigurationError(f"operator matrix has shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise SingularityError("operator matrix has non-finite entries")

    @property
    def smooth_part(self) -> np.ndarray:
        if self.self_diagonal is None:
            return self.matrix
        return self.matrix - np.diag(self.self_diagonal)

    def __matmul__(self, other):
        return self.matrix @ other


def _assemble(disc: Discretization, kernel: Callable, regular_kernel: Optional[Callable],
              self_diag: Callable) -> tuple:
    """Generic Galerkin assembly.

    kernel(diff) gives the interaction between different resonators,
    regular_kernel(diff) the smooth self remainder (or None), and
    self_diag(basis) the closed-form self eigenvalues.
    """
    n = disc.size
    A = np.zeros((n, n), dtype=complex)
    diag = np.zeros(n, dtype=complex)
    reg_cache = []  # translation-invariant kernels: congruent self blocks coincide
    for i, bi in enumerate(disc.bases):
        X = bi.quadrature.nodes
        for j, bj in enumerate(disc.bases):
            Y = bj.quadrature.nodes
            src = bj.values * bj.quadrature.weights[:, None]
            diff = X[:, None, :] - Y[None, :, :]
            if i == j:
                d = self_diag(bi)
                diag[disc.block(i)] = d
                blk = np.diag(d)
                if regular_kernel is not None:
                    rel = X - np.asarray(bi.shape.center, dtype=float)
                    hit = next((b for r, b in reg_cache if r.shape == rel.shape
                                and np.allclose(r, rel, rtol=0, atol=1e-14 * bi.shape.radius)), None)
                    if hit is None:
                        hit = bi.projector @ (regular_kernel(diff) @ src)
                        reg_cache.append((rel, hit))
                    blk = blk + hit
            else:
                blk = bi.projector @ (kernel(diff) @ src)
            A[disc.block(i), disc.block(j)] = blk
    return A, diag


def assemble_single_layer(disc: Discretization, k=0.0) -> BoundaryOperator:
    """Free-space single layer operator S_D^k.

    Parameters
    ----------
    disc : Discretization
    k : complex
        Wavenumber; complex values are allowed for resonance searches.
    """
    dim = disc.dim

    def kern(diff):
        return _free(np.linalg.norm(diff, axis=-1), k, dim)

    A, diag = _assemble(disc, kern, None, lambda b: self_single_layer(b, k))
    return BoundaryOperator(A, "single_layer", k, disc, self_diagonal=diag)


def assemble_single_layer_quasi(disc: Discretization, alpha, k: float,
                                lattice: LatticeConfig) -> BoundaryOperator:
    """Quasiperiodic single layer S_D^{alpha,k}; alpha = None with k = 0 gives S_D^{0,0}.

    The singular self part uses the free kernel in closed form; G^{alpha,k} - G^k
    is smooth and is integrated by quadrature.
    """
    if disc.dim != lattice.ambient_dim:
        raise ConfigurationError("discretization and lattice dimensions differ")
    dim = disc.dim
    if alpha is None:
        if k != 0:
            raise ConfigurationError("periodic kernel requires k = 0")

        def kern(diff):
            return green_periodic(diff, lattice).astype(complex)

        def reg(diff):
            return green_periodic(diff, lattice, regular=True).astype(complex)

        A, diag = _assemble(disc, kern, reg, lambda b: self_single_layer(b, 0.0))
        return BoundaryOperator(A, "single_layer", 0.0, disc, None, lattice, diag)

    alpha = lattice.fold(alpha)
    check_wood_anomaly(alpha, k, lattice)

    def kern(diff):
        return green_quasi_ewald(diff, alpha, k, lattice)

    def reg(diff):
        return green_quasi_ewald(diff, alpha, k, lattice, regular=True)

    A, diag = _assemble(disc, kern, reg, lambda b: self_single_layer(b, k))
    logger.debug("assembled S^{alpha,k}: alpha=%s k=%s size=%d", alpha, k, disc.size)
    return BoundaryOperator(A, "single_layer", k, disc, alpha, lattice, diag)


def exterior_flux_operator(S: BoundaryOperator) -> np.ndarray:
    """Matrix of 1/2 I + K^* derived from an assembled single layer operator.

    The analytic self part contributes its closed-form exterior flux; the
    smooth remainder solves the Helmholtz equation inside every resonator,
    so its normal derivative is the interior DtN map of its trace.
    """
    disc = S.discretization
    dtn = np.concatenate([interior_dtn(b, S.k) for b in disc.bases])
    flux = np.concatenate([self_exterior_flux(b, S.k) for b in disc.bases])
    return np.diag(flux) + dtn[:, None] * S.smooth_part


def assemble_neumann_poincare(disc: Discretization, k=0.0, variant="free", alpha=None,
                              lattice: Optional[LatticeConfig] = None,
                              single_layer: Optional[BoundaryOperator] = None) -> BoundaryOperator:
    """Adjoint Neumann-Poincare operator K^{k,*}.

    Parameters
    ----------
    variant : {"free", "quasi", "periodic"}
    single_layer : BoundaryOperator, optional
        Reuse an assembled single layer with the same kernel.
    """
    if single_layer is None:
        if variant == "free":
            single_layer = assemble_single_layer(disc, k)
        elif variant == "quasi":
            single_layer = assemble_single_layer_quasi(disc, alpha, k, lattice)
        elif variant == "periodic":
            single_layer = assemble_single_layer_quasi(disc, None, 0.0, lattice)
        else:
            raise ConfigurationError(f"unknown Neumann-Poincare variant {variant!r}")
    K = exterior_flux_operator(single_layer) - 0.5 * np.eye(disc.size)
    return BoundaryOperator(K, "neumann_poincare", single_layer.k, disc,
                            single_layer.alpha, single_layer.lattice)


def assemble_kernel_operator(disc: Discretization, kernel: Callable,
                             self_zonal: Optional[Callable] = None,
                             sqrt_singular: bool = False) -> BoundaryOperator:
    """Operator of an explicit kernel kernel(x, y, nu_x) by direct quadrature.

    Suitable for smooth kernels (for example the k^3 term of the
    Neumann-Poincare expansion).  Kernels with a kink at x = y on a circle or
    sphere pass ``self_zonal(r)`` so the self blocks use Funk-Hecke.
    """
    n = disc.size
    A = np.zeros((n, n), dtype=complex)
    for i, bi in enumerate(disc.bases):
        qi = bi.quadrature
        for j, bj in enumerate(disc.bases):
            qj = bj.quadrature
            if i == j and self_zonal is not None:
                blk = np.diag(zonal_self_eigenvalues(bi, self_zonal, sqrt_singular))
            else:
                K = kernel(qi.nodes[:, None, :], qj.nodes[None, :, :], qi.normals[:, None, :])
                blk = bi.projector @ (K @ (bj.values * qj.weights[:, None]))
            A[disc.block(i), disc.block(j)] = blk
    return BoundaryOperator(A, "kernel", 0.0, disc)


# ---------------------------------------------------------------------------
# Densities and solves
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Density:
    """Harmonic coefficients of a boundary density."""

    coefficients: np.ndarray
    discretization: Discretization = field(repr=False)
    condition: float = float("nan")
    multiplier: complex = 0.0

    def __post_init__(self):
        if len(self.coefficients) != self.discretization.size:
            raise ConfigurationError("density length does not match the discretization")

    def restrict(self, i) -> np.ndarray:
        return self.coefficients[self.discretization.block(i)]

    def node_values(self, i) -> np.ndarray:
        return self.discretization.bases[i].values @ self.restrict(i)

    def integral(self, i=None) -> complex:
        """Integral over dD_i, or over all of dD."""
        return complex(self.discretization.integral_weights(i) @ self.coefficients)

    def moment(self, func: Callable) -> complex:
        """Integral of func(y) * density(y) over dD."""
        total = 0.0 + 0.0j
        for i, b in enumerate(self.discretization.bases):
            q = b.quadrature
            total += np.sum(q.weights * func(q.nodes) * self.node_values(i))
        return complex(total)


def solve_density(op, rhs, constraint: Optional[str] = None,
                  cond_max: float = COND_MAX) -> Density:
    """Dense LU solve of op @ x = rhs.

    Parameters
    ----------
    op : BoundaryOperator
    rhs : ndarray
        Trace coefficients.
    constraint : {None, "mean_zero"}
        ``"mean_zero"`` solves the saddle system [[S, chi], [w^T, 0]] that
        adds a constant multiplier and enforces a zero total integral.  This
        is used for the rank-deficient 2D Laplace and periodic operators.
    cond_max : float
        Raise ``IllConditionedError`` above this condition number.
    """
    disc = op.discretization
    A = np.asarray(op.matrix)
    b = np.asarray(rhs, dtype=complex)
    if b.shape != (disc.size,):
        raise ConfigurationError(f"rhs has shape {b.shape}, expected ({disc.size},)")
    if constraint == "mean_zero":
        ones = sum(disc.indicator(i) for i in range(len(disc.bases)))
        w = disc.integral_weights()
        A = np.block([[A, ones[:, None]], [w[None, :], np.zeros((1, 1))]])
        b = np.concatenate([b, [0.0]])
    elif constraint is not None:
        raise ConfigurationError(f"unknown constraint {constraint!r}")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_max:
        raise IllConditionedError(
            f"condition number {cond:.3e} exceeds {cond_max:.1e}"
            + ("" if constraint else "; a mean-zero constrained solve may be needed"), cond)
    x = np.linalg.solve(A, b)
    if constraint == "mean_zero":
        return Density(x[:-1], disc, float(cond), complex(x[-1]))
    return Density(x, disc, float(cond))


# ---------------------------------------------------------------------------
# Evaluation off the boundary
# ---------------------------------------------------------------------------
def evaluate_single_layer(density: Density, points, k=0.0) -> np.ndarray:
    """Free-space single layer potential S_D^k[density] at arbitrary points.

    Uses the exact multipole field of each resonator, valid inside and outside.
    """
    disc = density.discretization
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.zeros(len(pts), dtype=complex)
    for i, b in enumerate(disc.bases):
        c = density.restrict(i)
        R = b.shape.radius
        d = pts - np.asarray(b.shape.center)
        r = np.linalg.norm(d, axis=-1)
        inside = r < R
        if disc.dim == 2:
            t = np.arctan2(d[:, 1], d[:, 0])
            n = b.orders
            ang = np.exp(1j * np.outer(t, n))
            if k == 0:
                rin, rout = np.minimum(r, R), np.maximum(r, R)
                radial = np.where(n == 0, R * np.log(rout)[:, None],
                                  -R / (2.0 * np.maximum(np.abs(n), 1))
                                  * (rin[:, None] / rout[:, None])**np.abs(n))
            else:
                jin = jv(n, k * np.where(inside, r, R)[:, None])
                hout = hankel1(n, k * np.where(inside, R, r)[:, None])
                radial = -0.5j * np.pi * R * jin * hout
        else:
            ct = np.clip(d[:, 2] / np.maximum(r, 1e-300), -1.0, 1.0)
            th = np.arccos(ct)
            ph = np.arctan2(d[:, 1], d[:, 0])
            ang = np.stack([sph_harm_y(l, m, th, ph) for l, m in zip(b.degrees, b.orders)], -1)
            l = b.degrees
            if k == 0:
                # inside -R/(2l+1) (r/R)^l, outside -R/(2l+1) (R/r)^(l+1)
                radial = np.where(inside[:, None], -R / (2.0 * l + 1.0) * (r[:, None] / R)**l,
                                  -R / (2.0 * l + 1.0) * (R / np.maximum(r, R)[:, None])**(l + 1))
            else:
                jin = spherical_jn(l, k * np.where(inside, r, R)[:, None])
                hout = _sph_h(l, k * np.where(inside, R, r)[:, None])
                radial = -1j * k * R**2 * jin * hout
        out += (radial * ang) @ c
    return out
