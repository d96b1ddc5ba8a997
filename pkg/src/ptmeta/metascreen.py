"""Scattering by a PT-symmetric metascreen.

Two routes: the low-frequency closed form of the scattering matrix, and a
full boundary-integral solve with the quasiperiodic kernel from which the
outgoing plane-wave amplitudes are read off.

Convention: S = [[r_+, t_-], [t_+, r_-]].  (r_+, t_+) belong to the wave
incident from the positive normal side, exp(i k_- . x) with k_- = (alpha, -k_3).
In 2D the cell area L^2 becomes the cell length L throughout.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .capacitance import dipole_coefficient, periodic_capacitance
from .errors import ConfigurationError, SingularityError, UnsupportedRegimeError
from .geometry import LatticeConfig, MaterialParams, PTDimer
from .greens import check_wood_anomaly, propagating_orders
from .layer_potentials import (assemble_single_layer_quasi, discretize,
                               exterior_flux_operator, interior_dtn)

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_POINTS = 400


@dataclass(frozen=True)
class ScatteringMatrix:
    r_plus: complex
    t_plus: complex
    r_minus: complex
    t_minus: complex
    omega: float = float("nan")
    lambda_star: float = float("nan")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.r_plus, self.t_minus], [self.t_plus, self.r_minus]])

    @property
    def R_plus(self) -> float:
        return abs(self.r_plus) ** 2

    @property
    def R_minus(self) -> float:
        return abs(self.r_minus) ** 2

    @property
    def T_plus(self) -> float:
        return abs(self.t_plus) ** 2

    @property
    def T_minus(self) -> float:
        return abs(self.t_minus) ** 2


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave direction w (unit, normal component last) and frequency."""

    direction: Tuple[float, ...]
    omega: float

    def __post_init__(self):
        w = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(w) - 1.0) > 1e-12:
            raise ConfigurationError("incident direction must be a unit vector")
        if w[-1] == 0:
            raise ConfigurationError("incident direction must have a normal component")
        if not self.omega > 0:
            raise ConfigurationError("omega must be > 0")

    @property
    def w_parallel(self) -> np.ndarray:
        return np.asarray(self.direction[:-1], dtype=float)

    @property
    def w3(self) -> float:
        return abs(float(self.direction[-1]))


FIG5_DIRECTION = (-np.sqrt(3.0) / 2.0, 0.5)


# ---------------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------------
def asymptotic_scattering_matrix(lambda_star: float, k3: float, a: float, b: float, c: float,
                                 L: float, dim: int = 3, omega: float = float("nan")
                                 ) -> ScatteringMatrix:
    """Leading-order scattering matrix near the second band.

    S = [ik3(b^2 L^2/a - a c^2/L^2) - lambda*]^{-1}
        [[lambda* - 2 k3 b c, ik3(b^2 L^2/a + a c^2/L^2)],
         [ik3(b^2 L^2/a + a c^2/L^2), lambda* + 2 k3 b c]]

    Raises
    ------
    SingularityError
        On the extraordinary-transmission locus where the denominator vanishes.
    """
    cell = L ** (dim - 1)
    p, q = b**2 * cell / a, a * c**2 / cell
    den = 1j * k3 * (p - q) - lambda_star
    scale = abs(lambda_star) + abs(k3) * (p + q)
    if abs(den) <= 1e-14 * scale or den == 0:
        raise SingularityError("scattering matrix denominator vanishes (|b L^2| = |a c|, lambda* = 0)")
    off = 1j * k3 * (p + q) / den
    return ScatteringMatrix((lambda_star - 2 * k3 * b * c) / den, off,
                            (lambda_star + 2 * k3 * b * c) / den, off, omega, lambda_star)


def reflection_zeros(k3: float, b: float, c: float) -> Tuple[float, float]:
    """(lambda_+, lambda_-) = (2 k3 b c, -2 k3 b c)."""
    return 2 * k3 * b * c, -2 * k3 * b * c


def reflection_zero_frequencies(lambda2_0: float, volume: float, w3: float, b: float,
                                c: float) -> Tuple[float, float]:
    """Frequencies of the zeros of r_+ and r_-.

    Solves omega^2 |D_1| - lambda_2^0 = +/- 2 (omega w3) b c for omega > 0,
    so that k3 is evaluated at the zero itself.
    """
    out = []
    for s in (1.0, -1.0):
        h = s * w3 * b * c
        out.append((h + np.sqrt(h * h + volume * lambda2_0)) / volume)
    return out[0], out[1]


def energy_relation_residual(S: ScatteringMatrix) -> float:
    """|R_+ R_- + 2 sqrt(T_+ T_-) - T_+ T_- - 1|."""
    return abs(S.R_plus * S.R_minus + 2 * np.sqrt(S.T_plus * S.T_minus)
               - S.T_plus * S.T_minus - 1.0)


def extraordinary_gain(a: float, c: float, L: float, dim: int = 3) -> float:
    """b = |a c| / L^2 (L in 2D), where extraordinary transmission occurs."""
    return abs(a * c) / L ** (dim - 1)


# ---------------------------------------------------------------------------
# Full numerical solve
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ScreenModel:
    """Geometry-level data reused across frequencies: C^0_11, c, lambda_2^0."""

    dimer: PTDimer
    lattice: LatticeConfig
    C0_11: float
    c: float
    basis_order: Optional[int] = None

    @property
    def lambda2_0(self) -> float:
        return 2 * self.dimer.materials.a * self.C0_11

    def omega2_0(self) -> float:
        return float(np.sqrt(self.lambda2_0 / self.dimer.volume))


def screen_model(dimer: PTDimer, lattice: LatticeConfig,
                 basis_order: Optional[int] = None) -> ScreenModel:
    pc = periodic_capacitance(dimer, lattice, basis_order)
    c = dipole_coefficient(pc.psi1_0, dimer.axis)
    return ScreenModel(dimer, lattice, pc.C0_11, c, basis_order)


@dataclass(frozen=True)
class ScreenOperators:
    """Material-independent pieces of the screen problem at one frequency.

    Gain/loss enters only through the per-resonator factors delta_i, so a
    b-scan reuses these operators and only repeats a small dense solve.
    """

    omega: float
    k3: float
    S: np.ndarray
    T: np.ndarray
    dtn: np.ndarray
    u_in: np.ndarray
    dn_u_in: np.ndarray
    far: np.ndarray
    cell: float
    sizes: tuple

    def solve(self, materials: MaterialParams) -> ScatteringMatrix:
        deltas = np.concatenate([np.full(n, d) for n, d in zip(self.sizes, materials.deltas)])
        M = self.dtn[:, None] * self.S - deltas[:, None] * self.T
        rhs = deltas[:, None] * self.dn_u_in - self.dtn[:, None] * self.u_in
        sol = np.linalg.solve(M, rhs)
        # far[:, 0] projects onto exp(-i k_+ . y), far[:, 1] onto exp(-i k_- . y)
        amp = (self.far.T @ sol) / (2j * self.k3 * self.cell)
        up0, down0 = amp[0, 0], amp[1, 0]  # incident from above
        up1, down1 = amp[0, 1], amp[1, 1]  # incident from below
        return ScatteringMatrix(complex(up0), complex(1.0 + down0), complex(down1),
                                complex(1.0 + up1), self.omega)


def screen_operators(dimer: PTDimer, lattice: LatticeConfig, wave: IncidentWave,
                     disc=None, basis_order: Optional[int] = None) -> ScreenOperators:
    """Assemble S^{alpha,k}, 1/2 + K^{alpha,k,*}, the interior DtN maps and the
    incident data for alpha = k w_parallel.

    Raises
    ------
    UnsupportedRegimeError
        If more than one diffraction order propagates.
    """
    lattice.check_dimer(dimer)
    omega = float(wave.omega)
    k = omega / dimer.materials.v
    alpha = k * wave.w_parallel
    k3 = k * wave.w3
    check_wood_anomaly(alpha, k, lattice)
    if propagating_orders(alpha, k, lattice) != 1:
        raise UnsupportedRegimeError("exactly one propagating diffraction order is required")
    disc = discretize(dimer.resonators, basis_order) if disc is None else disc
    S = assemble_single_layer_quasi(disc, alpha, k, lattice)
    T = exterior_flux_operator(S)
    dtn = np.concatenate([interior_dtn(bs, k) for bs in disc.bases])
    k_minus = np.append(alpha, -k3)
    k_plus = np.append(alpha, k3)
    u_cols, dn_cols = [], []
    for kvec in (k_minus, k_plus):
        u_cols.append(disc.project(lambda p, n, i, kv=kvec: np.exp(1j * p @ kv)))
        dn_cols.append(disc.project(lambda p, n, i, kv=kvec: 1j * (n @ kv) * np.exp(1j * p @ kv)))
    # row vectors w with w @ coeffs = int exp(-i k . y) psi(y) dsigma
    far = np.zeros((disc.size, 2), dtype=complex)
    for col, kvec in enumerate((k_plus, k_minus)):
        for i, bs in enumerate(disc.bases):
            q = bs.quadrature
            far[disc.block(i), col] = (q.weights * np.exp(-1j * q.nodes @ kvec)) @ bs.values
    return ScreenOperators(omega, k3, S.matrix, T, dtn, np.column_stack(u_cols),
                           np.column_stack(dn_cols), far, lattice.cell_measure, tuple(disc.sizes))


def numerical_scattering(dimer: PTDimer, lattice: LatticeConfig,
                         materials: Optional[MaterialParams], wave: IncidentWave,
                         basis_order: Optional[int] = None, disc=None) -> ScatteringMatrix:
    """Scattering matrix from the full transmission problem at one frequency.

    The exterior density psi solves
    (Lambda_i S^{alpha,k} - delta_i (1/2 + K^{alpha,k,*})) psi = delta_i du_in/dnu - Lambda_i u_in,
    with Lambda_i the interior DtN map, for both incidence sides at once.
    Outgoing amplitudes are A_+/- = (2 i k3 L^2)^{-1} int exp(-i k_+/- . y) psi dsigma.
    """
    if materials is not None:
        dimer = dimer.with_materials(materials)
    ops = screen_operators(dimer, lattice, wave, disc, basis_order)
    return ops.solve(dimer.materials)


def scattering_sweep(dimer: PTDimer, lattice: LatticeConfig, direction, omegas,
                     basis_order: Optional[int] = None) -> List[ScatteringMatrix]:
    """Numerical scattering matrices at each frequency (one discretization)."""
    disc = discretize(dimer.resonators, basis_order)
    return [screen_operators(dimer, lattice, IncidentWave(tuple(direction), float(w)), disc)
            .solve(dimer.materials) for w in omegas]


def refine_extremum(func: Callable[[float], float], grid, values, maximize: bool = False,
                    xtol: float = 1e-12) -> Tuple[float, float]:
    """Golden-section refinement of the grid extremum of ``func``.

    Returns the refined (x, func(x)); falls back to the grid point when the
    extremum sits on the grid boundary.
    """
    grid = np.asarray(grid, dtype=float)
    sgn = -1.0 if maximize else 1.0
    vals = sgn * np.asarray(values, dtype=float)
    j = int(np.argmin(vals))
    if j == 0 or j == len(grid) - 1:
        return float(grid[j]), float(values[j])
    res = minimize_scalar(lambda x: sgn * func(x), bracket=(grid[j - 1], grid[j], grid[j + 1]),
                          method="golden", tol=xtol)
    if sgn * res.fun > vals[j]:
        return float(grid[j]), float(values[j])
    return float(res.x), float(sgn * res.fun)


def band_window(model: ScreenModel, half_width: float = 0.05) -> Tuple[float, float]:
    """Frequency window (1 -/+ half_width) omega_2^0 around the second band edge."""
    w2 = model.omega2_0()
    return (1.0 - half_width) * w2, (1.0 + half_width) * w2


def extraordinary_scan(dimer: PTDimer, lattice: LatticeConfig, a: float, b_grid: Sequence[float],
                       omega_window: Tuple[float, float], direction=FIG5_DIRECTION,
                       n_omega: int = DEFAULT_SWEEP_POINTS,
                       basis_order: Optional[int] = None) -> List[Tuple[float, float]]:
    """Peak transmittance T_+ over the window for every b.

    Returns
    -------
    list of (b, peak T_+)
    """
    if np.any(np.asarray(b_grid) < 0):
        raise ConfigurationError("b_grid must be non-negative")
    omegas = np.linspace(omega_window[0], omega_window[1], n_omega)
    disc = discretize(dimer.resonators, basis_order)
    ops = [screen_operators(dimer, lattice, IncidentWave(tuple(direction), float(w)), disc)
           for w in omegas]
    out = []
    for b in b_grid:
        mat = MaterialParams(a, float(b), dimer.materials.v)

        def T(w, mat=mat):
            return screen_operators(dimer, lattice, IncidentWave(tuple(direction), w),
                                    disc).solve(mat).T_plus

        vals = [op.solve(mat).T_plus for op in ops]
        _, peak = refine_extremum(T, omegas, vals, maximize=True)
        logger.info("b = %.4g: peak T = %.4g", b, peak)
        out.append((float(b), float(peak)))
    return out
