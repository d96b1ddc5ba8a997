"""Resonator geometry, PT-symmetric dimers, lattices and boundary quadrature.

Conventions
-----------
A dimer is built from a template shape and a surface-to-surface ``gap``.
Resonator 1 sits at ``-(gap/2 + R) e_axis`` and resonator 2 at
``+(gap/2 + R) e_axis``, so D1 = -D2.  The default axis is the last
coordinate, which for a lattice is the direction normal to the screen.

Material coefficients follow v_1^2 delta_1 = a + ib, v_2^2 delta_2 = a - ib
with a common wave speed v inside and outside the resonators.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12

_DIM_OF_KIND = {"disk": 2, "sphere": 3}


@dataclass(frozen=True)
class ResonatorShape:
    """A disk (2D) or a sphere (3D).

    Attributes
    ----------
    kind : {"disk", "sphere"}
    radius : float
        Positive radius.
    center : tuple of float
        Length 2 for disks, 3 for spheres.
    """

    kind: str
    radius: float
    center: Tuple[float, ...] = None

    def __post_init__(self):
        if self.kind not in _DIM_OF_KIND:
            raise ConfigurationError(f"shape.kind must be 'disk' or 'sphere', got {self.kind!r}")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise ConfigurationError(f"shape.radius must be > 0, got {self.radius}")
        dim = _DIM_OF_KIND[self.kind]
        center = (0.0,) * dim if self.center is None else tuple(float(c) for c in self.center)
        if len(center) != dim:
            raise ConfigurationError(
                f"shape.center has {len(center)} components, {self.kind} needs {dim}")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return _DIM_OF_KIND[self.kind]

    @property
    def volume(self) -> float:
        """Area of a disk or volume of a ball."""
        R = self.radius
        return np.pi * R**2 if self.dim == 2 else 4.0 * np.pi * R**3 / 3.0

    @property
    def boundary_measure(self) -> float:
        """Perimeter of a disk or surface area of a sphere."""
        R = self.radius
        return 2.0 * np.pi * R if self.dim == 2 else 4.0 * np.pi * R**2

    def moved(self, center) -> "ResonatorShape":
        return ResonatorShape(self.kind, self.radius, tuple(center))

    def reflected(self) -> "ResonatorShape":
        """Image under the parity map x -> -x."""
        return self.moved(tuple(-c for c in self.center))


@dataclass(frozen=True)
class MaterialParams:
    """Gain/loss material data.

    Attributes
    ----------
    a : float
        Common real part of v_i^2 delta_i, > 0.
    b : float
        Gain/loss magnitude, >= 0.
    v : float
        Wave speed, shared by the background and both resonators.
    """

    a: float
    b: float = 0.0
    v: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.a) or self.a <= 0:
            raise ConfigurationError(f"a must be > 0, got {self.a}")
        if not np.isfinite(self.b) or self.b < 0:
            raise ConfigurationError(f"b must be >= 0, got {self.b}")
        if not np.isfinite(self.v) or self.v <= 0:
            raise ConfigurationError(f"v must be > 0, got {self.v}")

    @property
    def coefficients(self) -> Tuple[complex, complex]:
        """(v_1^2 delta_1, v_2^2 delta_2) = (a + ib, a - ib)."""
        return complex(self.a, self.b), complex(self.a, -self.b)

    @property
    def deltas(self) -> Tuple[complex, complex]:
        """Contrast parameters delta_i with v_i = v."""
        c1, c2 = self.coefficients
        return c1 / self.v**2, c2 / self.v**2

    @property
    def delta_scale(self) -> float:
        """|delta_1|, used only for asymptotic bookkeeping."""
        return abs(self.deltas[0])

    def scaled(self, factor: float) -> "MaterialParams":
        """Same material with a and b multiplied by ``factor``."""
        return MaterialParams(self.a * factor, self.b * factor, self.v)

    def with_b(self, b: float) -> "MaterialParams":
        return MaterialParams(self.a, b, self.v)


@dataclass(frozen=True)
class DimerConfig:
    """Template shape, surface-to-surface gap and materials.

    ``axis`` is the coordinate along which the two resonators are placed;
    ``None`` selects the last coordinate.
    """

    shape: ResonatorShape
    gap: float
    materials: MaterialParams
    axis: Optional[int] = None

    def __post_init__(self):
        if not np.isfinite(self.gap) or self.gap <= 0:
            raise ConfigurationError(f"gap must be > 0 (resonators overlap or touch), got {self.gap}")
        axis = self.shape.dim - 1 if self.axis is None else int(self.axis)
        if not 0 <= axis < self.shape.dim:
            raise ConfigurationError(f"axis {axis} out of range for dimension {self.shape.dim}")
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True)
class PTDimer:
    """Two resonators related by parity, with conjugate-paired materials."""

    resonators: Tuple[ResonatorShape, ResonatorShape]
    materials: MaterialParams
    axis: int

    @property
    def dim(self) -> int:
        return self.resonators[0].dim

    @property
    def radius(self) -> float:
        return self.resonators[0].radius

    @property
    def volume(self) -> float:
        """|D_1|."""
        return self.resonators[0].volume

    @property
    def coefficients(self) -> Tuple[complex, complex]:
        return self.materials.coefficients

    @property
    def center_distance(self) -> float:
        c1, c2 = (np.asarray(r.center) for r in self.resonators)
        return float(np.linalg.norm(c2 - c1))

    @property
    def gap(self) -> float:
        return self.center_distance - 2.0 * self.radius

    def with_materials(self, materials: MaterialParams) -> "PTDimer":
        return PTDimer(self.resonators, materials, self.axis)

    def swapped(self) -> "PTDimer":
        """Dimer with the resonator positions exchanged."""
        r1, r2 = self.resonators
        return PTDimer((r2, r1), self.materials, self.axis)


def build_pt_dimer(cfg: DimerConfig) -> PTDimer:
    """Place two copies of ``cfg.shape`` symmetrically about the origin.

    Parameters
    ----------
    cfg : DimerConfig

    Returns
    -------
    PTDimer
        Resonator 1 at ``-(gap/2 + R) e_axis``, resonator 2 at its mirror
        image; coefficients ``(a + ib, a - ib)``.
    """
    R = cfg.shape.radius
    offset = np.zeros(cfg.shape.dim)
    offset[cfg.axis] = 0.5 * cfg.gap + R
    d1 = cfg.shape.moved(tuple(-offset))
    d2 = cfg.shape.moved(tuple(offset))
    dimer = PTDimer((d1, d2), cfg.materials, cfg.axis)
    logger.debug("built dimer: centers %s, %s", d1.center, d2.center)
    return dimer


def validate_pt_symmetry(shapes, coefficients, tol: float = SYMMETRY_TOL) -> bool:
    """Check D1 = -D2 and coefficient 1 = conj(coefficient 2).

    Parameters
    ----------
    shapes : pair of ResonatorShape
    coefficients : pair of complex
    tol : float
        Absolute tolerance on centers, radii and coefficients.
    """
    s1, s2 = shapes
    if s1.kind != s2.kind or abs(s1.radius - s2.radius) > tol:
        return False
    if np.max(np.abs(np.asarray(s1.reflected().center) - np.asarray(s2.center))) > tol:
        return False
    c1, c2 = coefficients
    return abs(complex(c1) - np.conj(complex(c2))) <= tol


@dataclass(frozen=True)
class LatticeConfig:
    """Square lattice of period L.

    ambient_dim = 2 gives a chain of disk dimers along x1;
    ambient_dim = 3 gives a square lattice of sphere dimers in the (x1, x2) plane.
    """

    period: float
    ambient_dim: int = 2

    def __post_init__(self):
        if not np.isfinite(self.period) or self.period <= 0:
            raise ConfigurationError(f"L must be > 0, got {self.period}")
        if self.ambient_dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.ambient_dim}")

    @property
    def lattice_dim(self) -> int:
        return self.ambient_dim - 1

    @property
    def cell_measure(self) -> float:
        """L in 2D, L^2 in 3D."""
        return self.period ** self.lattice_dim

    def fold(self, alpha) -> np.ndarray:
        """Map quasi-momentum components into [-pi/L, pi/L]."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if alpha.shape != (self.lattice_dim,):
            raise ConfigurationError(
                f"alpha needs {self.lattice_dim} component(s), got shape {alpha.shape}")
        g = 2.0 * np.pi / self.period
        folded = alpha - g * np.round(alpha / g)
        # keep +pi/L rather than -pi/L on the zone boundary
        folded[np.isclose(folded, -np.pi / self.period, rtol=0, atol=1e-14)] = np.pi / self.period
        return folded

    def check_dimer(self, dimer: PTDimer) -> None:
        """Require the dimer to fit in the unit cell and lie along the normal."""
        if dimer.dim != self.ambient_dim:
            raise ConfigurationError(
                f"dimer dimension {dimer.dim} does not match lattice dimension {self.ambient_dim}")
        if dimer.axis != self.ambient_dim - 1:
            raise ConfigurationError("lattice dimers must be oriented along the screen normal")
        if 2.0 * dimer.radius >= self.period:
            raise ConfigurationError(
                f"resonator diameter {2 * dimer.radius} does not fit in period {self.period}")


@dataclass(frozen=True)
class BoundaryQuadrature:
    """Nodes, weights and outward normals on one resonator boundary.

    For disks the nodes are ``center + R (cos t, sin t)`` on a uniform
    t-grid.  For spheres they form a Gauss-Legendre (in cos theta) times
    uniform-azimuth product grid.  ``theta`` and ``phi`` hold the angles.
    """

    shape: ResonatorShape
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    basis_order: int
    theta: np.ndarray = field(repr=False, default=None)
    phi: np.ndarray = field(repr=False, default=None)

    @property
    def n_nodes(self) -> int:
        return len(self.weights)


def default_node_count(kind: str, basis_order: int) -> int:
    """Nodes per disk, or Gauss-Legendre points in theta for a sphere."""
    if kind == "disk":
        n = max(64, 8 * (basis_order + 1))
        return n + (n % 2)
    return 2 * (basis_order + 1)


def boundary_quadrature(shape: ResonatorShape, basis_order: int,
                        n_nodes: Optional[int] = None) -> BoundaryQuadrature:
    """Quadrature on the boundary of a disk or sphere.

    Parameters
    ----------
    shape : ResonatorShape
    basis_order : int
        Harmonic truncation N_mp >= 1 (|n| <= N on a circle, l <= N on a sphere).
    n_nodes : int, optional
        Disk: number of nodes.  Sphere: number of polar Gauss points; the
        azimuthal grid uses twice as many points.

    Returns
    -------
    BoundaryQuadrature
    """
    if int(basis_order) != basis_order or basis_order < 1:
        raise ConfigurationError(f"basis_order must be an integer >= 1, got {basis_order}")
    basis_order = int(basis_order)
    n = default_node_count(shape.kind, basis_order) if n_nodes is None else int(n_nodes)
    R = shape.radius
    c = np.asarray(shape.center)
    if shape.kind == "disk":
        if n < 2 * basis_order + 1:
            raise ConfigurationError(f"{n} nodes cannot resolve basis order {basis_order}")
        t = 2.0 * np.pi * np.arange(n) / n
        normals = np.stack([np.cos(t), np.sin(t)], axis=-1)
        weights = np.full(n, 2.0 * np.pi * R / n)
        return BoundaryQuadrature(shape, c + R * normals, weights, normals, basis_order,
                                  theta=t, phi=None)
    if shape.kind == "sphere":
        if n < basis_order + 1:
            raise ConfigurationError(f"{n} polar points cannot resolve degree {basis_order}")
        x, w = roots_legendre(n)
        nph = 2 * n
        th = np.arccos(x)
        ph = 2.0 * np.pi * np.arange(nph) / nph
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        W = np.outer(w, np.full(nph, 2.0 * np.pi / nph))
        normals = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)],
                           axis=-1).reshape(-1, 3)
        return BoundaryQuadrature(shape, c + R * normals, R**2 * W.ravel(), normals,
                                  basis_order, theta=TH.ravel(), phi=PH.ravel())
    raise ConfigurationError(f"unsupported shape kind {shape.kind!r}")
