"""Capacitance matrices of finite and periodic PT-symmetric dimers.

C_ij = -int_{dD_i} psi_j with S[psi_j] = chi_{dD_j}.  The same recipe with
the quasiperiodic kernel gives C^alpha; the periodic (alpha = 0, k = 0)
kernel gives C^0 through a mean-zero constrained solve.

In 2D every L^2 (area of the unit cell) becomes L (length of the unit cell).
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import ConfigurationError, IllConditionedError, SymmetryError
from .geometry import LatticeConfig, MaterialParams, PTDimer
from .layer_potentials import (DEFAULT_ORDER, Density, Discretization, assemble_single_layer,
                               assemble_single_layer_quasi, discretize, solve_density)

logger = logging.getLogger(__name__)

ORDER_TOL = 1e-8
MAX_ORDER = {"disk": 48, "sphere": 16}
ALPHA_MIN_FRACTION = 1e-3


def _cap_from_operator(op, disc: Discretization, constraint=None) -> np.ndarray:
    C = np.zeros((2, 2), dtype=complex)
    for j in range(2):
        psi = solve_density(op, disc.indicator(j), constraint=constraint)
        for i in range(2):
            C[i, j] = -psi.integral(i)
    return C


def _adaptive(compute, kind: str, basis_order: Optional[int], adaptive: bool):
    """Double the basis order until every entry changes by < ORDER_TOL relative."""
    order = DEFAULT_ORDER[kind] if basis_order is None else int(basis_order)
    C = compute(order)
    if not adaptive:
        return C, order
    while 2 * order <= MAX_ORDER[kind]:
        C2 = compute(2 * order)
        change = np.max(np.abs(C2 - C)) / np.max(np.abs(C2))
        logger.debug("order %d -> %d: relative change %.2e", order, 2 * order, change)
        C, order = C2, 2 * order
        if change < ORDER_TOL:
            return C, order
    logger.warning("capacitance not converged to %.0e at basis order %d", ORDER_TOL, order)
    return C, order


def capacitance_matrix(dimer: PTDimer, basis_order: Optional[int] = None,
                       adaptive: bool = True) -> np.ndarray:
    """Capacitance matrix of a finite dimer.

    Parameters
    ----------
    dimer : PTDimer
    basis_order : int, optional
        Starting harmonic order (6 for disks, 8 for spheres).
    adaptive : bool
        Double the order until entries change by less than 1e-8 relative.

    Returns
    -------
    ndarray, shape (2, 2), real
    """
    kind = dimer.resonators[0].kind

    def compute(order):
        disc = discretize(dimer.resonators, order)
        S = assemble_single_layer(disc, 0.0)
        try:
            return _cap_from_operator(S, disc)
        except IllConditionedError:
            if dimer.dim != 2:
                raise
            logger.warning("2D Laplace single layer is singular; using the mean-zero solve")
            return _cap_from_operator(S, disc, constraint="mean_zero")

    C, _ = _adaptive(compute, kind, basis_order, adaptive)
    if np.max(np.abs(C.imag)) > 1e-10 * np.max(np.abs(C)):
        raise SymmetryError("finite capacitance matrix is not real")
    return C.real


def weighted_capacitance(C, materials: MaterialParams) -> np.ndarray:
    """C^v = diag(a + ib, a - ib) C."""
    V = np.diag(materials.coefficients)
    return V @ np.asarray(C, dtype=complex)


def quasiperiodic_capacitance(dimer: PTDimer, lattice: LatticeConfig, alpha,
                              basis_order: Optional[int] = None,
                              adaptive: bool = False) -> np.ndarray:
    """Quasiperiodic capacitance C^alpha built from S_D^{alpha,0}.

    Raises
    ------
    ConfigurationError
        If |alpha| is below 1e-3 pi/L; use ``periodic_capacitance`` there.
    """
    lattice.check_dimer(dimer)
    alpha = lattice.fold(alpha)
    if np.linalg.norm(alpha) < ALPHA_MIN_FRACTION * np.pi / lattice.period:
        raise ConfigurationError("|alpha| too small for C^alpha; use periodic_capacitance")
    kind = dimer.resonators[0].kind

    def compute(order):
        disc = discretize(dimer.resonators, order)
        S = assemble_single_layer_quasi(disc, alpha, 0.0, lattice)
        return _cap_from_operator(S, disc)

    C, _ = _adaptive(compute, kind, basis_order, adaptive)
    return C


@dataclass(frozen=True)
class PeriodicCapacitance:
    """C^0_11 and the density psi_1^0 of the periodic problem."""

    C0_11: float
    psi1_0: Density = field(repr=False)
    multiplier: complex = 0.0

    @property
    def matrix(self) -> np.ndarray:
        """C^0 = C^0_11 [[1, -1], [-1, 1]] (zero row sums)."""
        return self.C0_11 * np.array([[1.0, -1.0], [-1.0, 1.0]])


def periodic_capacitance(dimer: PTDimer, lattice: LatticeConfig,
                         basis_order: Optional[int] = None) -> PeriodicCapacitance:
    """Solve S^{0,0}[psi] = chi_1/2 - chi_2/2 with int psi = 0.

    Returns
    -------
    PeriodicCapacitance
        C^0_11 = -int_{dD_1} psi and the (real) density psi_1^0.
    """
    lattice.check_dimer(dimer)
    disc = discretize(dimer.resonators, basis_order)
    S = assemble_single_layer_quasi(disc, None, 0.0, lattice)
    rhs = 0.5 * disc.indicator(0) - 0.5 * disc.indicator(1)
    psi = solve_density(S, rhs, constraint="mean_zero")
    vals = np.concatenate([psi.node_values(i) for i in range(2)])
    if np.max(np.abs(vals.imag)) > 1e-10 * np.max(np.abs(vals)):
        raise SymmetryError("periodic density psi_1^0 is not real")
    C0 = -psi.integral(0).real
    logger.debug("C0_11 = %.12g (multiplier %.2e)", C0, abs(psi.multiplier))
    return PeriodicCapacitance(float(C0), psi, psi.multiplier)


def dipole_coefficient(psi1_0: Density, normal_axis: Optional[int] = None,
                       tol: float = 1e-9) -> float:
    """c = int y_n psi_1^0 dsigma along the screen normal.

    Raises
    ------
    SymmetryError
        If an in-plane component exceeds ``tol`` relative to max(|c|, 1).
    """
    dim = psi1_0.discretization.dim
    axis = dim - 1 if normal_axis is None else normal_axis
    comps = np.array([psi1_0.moment(lambda y, j=j: y[:, j]) for j in range(dim)])
    c = comps[axis]
    inplane = np.delete(comps, axis)
    if np.max(np.abs(inplane)) > tol * max(abs(c), 1.0) or abs(c.imag) > tol * max(abs(c), 1.0):
        raise SymmetryError(f"dipole coefficient has in-plane or imaginary parts: {comps}")
    return float(c.real)


def c1_matrix(lattice: LatticeConfig, alpha0, c: float) -> np.ndarray:
    """Closed form of C^{1,alpha0}.

    -(i w3 L^2 / 2) [[1, 1], [1, 1]] - (i w3 c^2 / (2 L^2)) [[1, -1], [-1, 1]],
    with w3 = sqrt(1 - |alpha0|^2) and L^2 replaced by L in 2D.
    """
    alpha0 = np.atleast_1d(np.asarray(alpha0, dtype=float))
    if np.linalg.norm(alpha0) >= 1:
        raise ConfigurationError("|alpha0| must be < 1")
    w3 = np.sqrt(1.0 - alpha0 @ alpha0)
    cell = lattice.cell_measure
    ones = np.ones((2, 2))
    dip = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return -0.5j * w3 * cell * ones - 0.5j * w3 * c**2 / cell * dip


# ---------------------------------------------------------------------------
# Independent oracle
# ---------------------------------------------------------------------------
def image_charge_capacitance(radius: float, center_distance: float, reflections: int = 30):
    """(C11, C12) of two equal spheres by iterated Kelvin image charges.

    Sphere 1 is held at unit potential and sphere 2 grounded; charges are
    measured in the units where Cap(sphere) = 4 pi R.
    """
    a, d = float(radius), float(center_distance)
    if d <= 2 * a:
        raise ConfigurationError("spheres overlap")
    # positions along the axis from sphere 1's center; charges alternate spheres
    q, x = 4.0 * np.pi * a, 0.0
    c11, c21 = q, 0.0
    for n in range(reflections):
        if n % 2 == 0:
            s = d - x
            q, x = -q * a / s, d - a * a / s
            c21 += q
        else:
            s = x
            q, x = -q * a / s, a * a / s
            c11 += q
    return c11, c21


# ---------------------------------------------------------------------------
# Aggregate
# ---------------------------------------------------------------------------
@dataclass
class CapacitanceSet:
    """All capacitance objects of one configuration.

    C^alpha values are cached per folded alpha; the cache is guarded by a
    lock so concurrent insert-or-read is safe.
    """

    C: Optional[np.ndarray] = None
    Cv: Optional[np.ndarray] = None
    C0_11: Optional[float] = None
    c: Optional[float] = None
    C1_matrix: Optional[np.ndarray] = None
    _alpha_cache: Dict[tuple, np.ndarray] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def C_alpha(self, dimer, lattice, alpha, **kw) -> np.ndarray:
        key = tuple(np.round(lattice.fold(alpha), 14))
        with self._lock:
            hit = self._alpha_cache.get(key)
        if hit is not None:
            return hit
        val = quasiperiodic_capacitance(dimer, lattice, alpha, **kw)
        with self._lock:
            return self._alpha_cache.setdefault(key, val)

    def check_invariants(self, tol: float = 1e-8) -> None:
        """Raise SymmetryError if a structural property fails."""
        if self.C is not None:
            C = self.C
            s = np.max(np.abs(C))
            if abs(C[0, 1] - C[1, 0]) > tol * s or abs(C[0, 0] - C[1, 1]) > tol * s:
                raise SymmetryError("C is not symmetric with equal diagonal")
            if not (C[0, 1] < 0 < C[0, 0] + C[0, 1]):
                raise SymmetryError("C violates C12 < 0 < C11 + C12")
        for Ca in list(self._alpha_cache.values()):
            s = np.max(np.abs(Ca))
            if abs(Ca[0, 0] - Ca[1, 1]) > tol * s or abs(Ca[0, 0].imag) > tol * s \
                    or abs(Ca[0, 1] - np.conj(Ca[1, 0])) > tol * s:
                raise SymmetryError("C^alpha lacks its conjugate structure")

    def as_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            v = np.asarray(v)
            if np.iscomplexobj(v):
                return {"re": v.real.tolist(), "im": v.imag.tolist()}
            return v.tolist()

        return {
            "C": enc(self.C),
            "Cv": enc(self.Cv),
            "C0_11": self.C0_11,
            "c": self.c,
            "C1_matrix": enc(self.C1_matrix),
            "C_alpha": [{"alpha": list(k), "value": enc(v)} for k, v in self._alpha_cache.items()],
        }
