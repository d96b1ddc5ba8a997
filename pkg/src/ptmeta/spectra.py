"""Resonant frequencies, exceptional points and band structures.

Leading order: the eigenvalues of the weighted capacitance matrix give
omega_i = sqrt(lambda_i / |D_1|).  Full solve: Muller's method on the
determinant of the discretized transmission problem, reduced onto the two
monopole modes by a Schur complement.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .capacitance import ALPHA_MIN_FRACTION, capacitance_matrix, quasiperiodic_capacitance
from .errors import ConfigurationError, ConvergenceError
from .geometry import LatticeConfig, MaterialParams, PTDimer
from .layer_potentials import assemble_single_layer, discretize, exterior_flux_operator, interior_dtn

logger = logging.getLogger(__name__)

DEFAULT_BAND_POINTS = 200


# ---------------------------------------------------------------------------
# Leading order
# ---------------------------------------------------------------------------
def _check_cap(C11, C12):
    if not C11 > abs(C12):
        raise ConfigurationError(f"invalid capacitance: need C11 > |C12|, got {C11}, {C12}")


DISCRIMINANT_ULPS = 8


def _discriminant(a, b, C11, absC12):
    """a^2 |C12|^2 - b^2 (C11^2 - |C12|^2), snapped to 0 at the rounding level."""
    p, q = a**2 * absC12**2, b**2 * (C11**2 - absC12**2)
    d = p - q
    if abs(d) <= DISCRIMINANT_ULPS * np.finfo(float).eps * (p + b**2 * (C11**2 + absC12**2)):
        return 0.0
    return d


def capacitance_eigs(a: float, b: float, C11: float, C12) -> Tuple[complex, complex]:
    """lambda_{1,2} = a C11 -/+ sqrt(a^2 |C12|^2 - b^2 (C11^2 - |C12|^2)).

    ``C12`` may be complex (quasiperiodic case); only |C12| enters.  The
    square root takes the branch with non-negative real part.
    """
    C11 = float(np.real(C11))
    absC12 = abs(C12)
    _check_cap(C11, absC12)
    root = np.sqrt(complex(_discriminant(a, b, C11, absC12)))
    return a * C11 - root, a * C11 + root


def exceptional_gain(a: float, C11: float, C12) -> float:
    """b_0 = a |C12| / sqrt(C11^2 - |C12|^2), returned as a magnitude."""
    C11 = float(np.real(C11))
    absC12 = abs(C12)
    _check_cap(C11, absC12)
    return a * absC12 / np.sqrt(C11**2 - absC12**2)


def eigenvectors(a: float, b: float, C11: float, C12, lambdas) -> np.ndarray:
    """Columns v_i = (-C12, C11 - mu_i) with mu_i = lambda_i / (a + ib), normalized."""
    coef = complex(a, b)
    vecs = np.array([[-C12, -C12], [C11 - lambdas[0] / coef, C11 - lambdas[1] / coef]],
                    dtype=complex)
    return vecs / np.linalg.norm(vecs, axis=0)


def eigenvector_angle(vecs: np.ndarray) -> float:
    """Angle between the two (complex) column vectors, in radians."""
    v1, v2 = vecs[:, 0], vecs[:, 1]
    cos = abs(np.vdot(v1, v2)) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    # asin of the sine is accurate for nearly parallel vectors
    sin = np.sqrt(max(0.0, (1 - cos) * (1 + cos)))
    return float(np.arcsin(min(1.0, sin)))


@dataclass(frozen=True)
class ResonantPair:
    """Two resonant frequencies with their capacitance eigenvectors."""

    omega1: complex
    omega2: complex
    modes: Optional[np.ndarray] = field(default=None, repr=False)
    source: str = "leading_order"

    def __post_init__(self):
        for w in (self.omega1, self.omega2):
            if np.real(w) < 0:
                raise ConfigurationError("resonant frequencies must have Re >= 0")


def leading_order_frequencies(Cv_eigs, volume: float, modes=None) -> ResonantPair:
    """omega_i = sqrt(lambda_i / |D_1|), principal branch."""
    if volume <= 0:
        raise ConfigurationError("volume must be > 0")
    w = [np.sqrt(complex(lam) / volume) for lam in Cv_eigs]
    return ResonantPair(w[0], w[1], modes, "leading_order")


def dimer_leading_order(dimer: PTDimer, C: Optional[np.ndarray] = None) -> ResonantPair:
    """Leading-order pair for a finite dimer (C computed if not given)."""
    C = capacitance_matrix(dimer) if C is None else C
    m = dimer.materials
    lams = capacitance_eigs(m.a, m.b, C[0, 0], C[0, 1])
    vecs = eigenvectors(m.a, m.b, C[0, 0], C[0, 1], lams)
    return leading_order_frequencies(lams, dimer.volume, vecs)


# ---------------------------------------------------------------------------
# Band structure
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BandPoint:
    alpha: np.ndarray
    omega1: complex
    omega2: complex
    below_ep: bool
    lambdas: Tuple[complex, complex] = (0j, 0j)
    C_alpha: Optional[np.ndarray] = field(default=None, repr=False)


def gamma_m_path(lattice: LatticeConfig, n_points: int = DEFAULT_BAND_POINTS) -> np.ndarray:
    """Quasimomenta from near Gamma to M, skipping |alpha| < 1e-3 pi/L."""
    if n_points < 2:
        raise ConfigurationError("need at least 2 path points")
    L = lattice.period
    d = lattice.lattice_dim
    direction = np.ones(d) / np.sqrt(d)
    t_max = np.pi / L * np.sqrt(d)
    t = np.linspace(ALPHA_MIN_FRACTION * np.pi / L, t_max, n_points)
    return t[:, None] * direction


def band_point(dimer: PTDimer, lattice: LatticeConfig, alpha, a: float, b: float,
               **cap_kw) -> BandPoint:
    Ca = quasiperiodic_capacitance(dimer, lattice, alpha, **cap_kw)
    lams = capacitance_eigs(a, b, Ca[0, 0], Ca[0, 1])
    disc = _discriminant(a, b, Ca[0, 0].real, abs(Ca[0, 1]))
    w = leading_order_frequencies(lams, dimer.volume)
    return BandPoint(np.atleast_1d(np.asarray(alpha, float)), w.omega1, w.omega2,
                     bool(disc > 0), lams, Ca)


def band_structure(dimer: PTDimer, lattice: LatticeConfig, alpha_path, a: float,
                   b: float, **cap_kw) -> List[BandPoint]:
    """Leading-order quasiperiodic bands along ``alpha_path``."""
    lattice.check_dimer(dimer)
    return [band_point(dimer, lattice, al, a, b, **cap_kw) for al in alpha_path]


def exceptional_profile(dimer: PTDimer, lattice: LatticeConfig, alpha, a: float) -> float:
    """b_0(alpha) = a |C12^alpha| / sqrt((C11^alpha)^2 - |C12^alpha|^2)."""
    Ca = quasiperiodic_capacitance(dimer, lattice, alpha)
    return exceptional_gain(a, Ca[0, 0].real, Ca[0, 1])


def exceptional_quasimomentum(dimer: PTDimer, lattice: LatticeConfig, a: float, b: float,
                              alpha_path=None, rtol: float = 1e-10,
                              max_iter: int = 200) -> Optional[np.ndarray]:
    """Quasimomentum alpha_0 on the path with b_0(alpha_0) = b, or None.

    The path is scanned for a sign change of b_0(alpha) - b, which is then
    refined by bisection along the segment.
    """
    if b <= 0:
        return None
    path = gamma_m_path(lattice, 41) if alpha_path is None else np.asarray(alpha_path, float)
    path = path.reshape(len(path), -1)
    vals = np.array([exceptional_profile(dimer, lattice, al, a) - b for al in path])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if len(idx) == 0:
        return None
    if len(idx) > 1:
        logger.warning("b_0(alpha) crosses b %d times; returning the first crossing", len(idx))
    j = idx[0]
    lo, hi = path[j], path[j + 1]
    flo = vals[j]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = exceptional_profile(dimer, lattice, mid, a) - b
        if abs(fm) < rtol * b:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    raise ConvergenceError("exceptional quasimomentum bisection did not converge", [])


# ---------------------------------------------------------------------------
# Full solve
# ---------------------------------------------------------------------------
def muller(f: Callable[[complex], complex], x0: complex, x1: complex, x2: complex,
           tol: float = 1e-12, max_iter: int = 50) -> complex:
    """Muller's method for a complex root of ``f``.

    Raises
    ------
    ConvergenceError
        If |step| does not fall below ``tol * |x|`` within ``max_iter`` steps.
    """
    f0, f1, f2 = f(x0), f(x1), f(x2)
    history = []
    for _ in range(max_iter):
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        bq = a * h2 + d2
        disc = np.sqrt(complex(bq * bq - 4 * f2 * a))
        den = bq + disc if abs(bq + disc) >= abs(bq - disc) else bq - disc
        if den == 0:
            raise ConvergenceError("Muller denominator vanished", history)
        step = -2 * f2 / den
        x0, x1, x2 = x1, x2, x2 + step
        f0, f1, f2 = f1, f2, f(x2)
        history.append((complex(x2), float(abs(f2))))
        if abs(step) < tol * abs(x2) or f2 == 0:
            return x2
    raise ConvergenceError(f"Muller did not converge in {max_iter} iterations", history)


def transmission_matrix(dimer: PTDimer, omega: complex, basis_order: Optional[int] = None,
                        disc=None) -> Tuple[np.ndarray, object]:
    """Matrix of (Lambda_i S^k - delta_i (1/2 + K^{k,*})) on the dimer boundary.

    With interior trace f = u|_+ the interior field is fixed by its DtN map,
    so the two-density transmission system reduces to this single operator
    acting on the exterior density.
    """
    disc = discretize(dimer.resonators, basis_order) if disc is None else disc
    v = dimer.materials.v
    k = omega / v
    S = assemble_single_layer(disc, k)
    T = exterior_flux_operator(S)
    dtn = np.concatenate([interior_dtn(bs, k) for bs in disc.bases])
    deltas = np.concatenate([np.full(n, d) for n, d in zip(disc.sizes, dimer.materials.deltas)])
    return dtn[:, None] * S.matrix - deltas[:, None] * T, disc


def _monopole_schur(M: np.ndarray, disc) -> np.ndarray:
    mono = np.array([off + bs.constant_index for off, bs in zip(disc.offsets, disc.bases)])
    rest = np.setdiff1d(np.arange(disc.size), mono)
    A = M[np.ix_(mono, mono)]
    B = M[np.ix_(mono, rest)]
    Cm = M[np.ix_(rest, mono)]
    D = M[np.ix_(rest, rest)]
    return A - B @ np.linalg.solve(D, Cm)


def resonance_determinant(dimer: PTDimer, basis_order: Optional[int] = None):
    """omega -> det of the monopole Schur complement of the transmission matrix."""
    disc = discretize(dimer.resonators, basis_order)

    def f(omega):
        M, _ = transmission_matrix(dimer, omega, disc=disc)
        return np.linalg.det(_monopole_schur(M, disc))

    return f


def muller_resonances(dimer: PTDimer, materials: Optional[MaterialParams] = None,
                      omega_guess: Optional[ResonantPair] = None,
                      basis_order: Optional[int] = None, tol: float = 1e-12) -> ResonantPair:
    """Refine the leading-order pair by Muller's method on the full system.

    The second root is sought on the deflated function f(w) / (w - w_1) so
    that nearly coalescent roots are not found twice.
    """
    if materials is not None:
        dimer = dimer.with_materials(materials)
    guess = dimer_leading_order(dimer) if omega_guess is None else omega_guess
    f = resonance_determinant(dimer, basis_order)
    roots = []
    for w0 in (guess.omega1, guess.omega2):
        g = f if not roots else (lambda w, r=roots[0]: f(w) / (w - r))
        x = muller(g, w0, w0 * (1 + 1e-3), w0 * (1 - 1e-3), tol=tol)
        roots.append(x)
    roots.sort(key=lambda w: (w.real, w.imag))
    logger.debug("Muller roots %s (leading order %s, %s)", roots, guess.omega1, guess.omega2)
    return ResonantPair(roots[0], roots[1], guess.modes, "full_muller")
