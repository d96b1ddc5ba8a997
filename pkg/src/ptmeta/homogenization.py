"""Point-scatterer clouds, their homogenized limit, and the PT-dimer polarizability.

A small resonator D_0^r = r D_0 + z acts, at the pinned frequency
omega^2 = a Cap/|D_0|, as a point scatterer with amplitude A:
u - u_in = A G^k(x - z) u_in(z).  N of them in a ball Omega are coupled by
Foldy-Lax; as N grows with r^{1 - eps1} N = Lambda fixed, the microfield
approaches the solution of (Delta + k^2 - (i Lambda a Cap / b) V) u = 0 with
V = 1/|Omega| on Omega, solved here by a partial-wave series.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import eval_legendre, spherical_jn, spherical_yn

from .errors import ConfigurationError, IllConditionedError, SingularityError
from .greens import green_free

logger = logging.getLogger(__name__)

EPSILON1 = 0.5
EPSILON0 = 0.5
EPSILON3 = 1.0 / 6.0
UNIT_SPHERE_VOLUME = 4.0 * np.pi / 3.0
UNIT_SPHERE_CAP = 4.0 * np.pi


# ---------------------------------------------------------------------------
# Single small resonator
# ---------------------------------------------------------------------------
def pinned_frequency(a: float, cap: float = UNIT_SPHERE_CAP,
                     volume: float = UNIT_SPHERE_VOLUME) -> float:
    """omega with omega^2 = a Cap_{D_0} / |D_0|."""
    return float(np.sqrt(a * cap / volume))


def point_polarizability_single(omega: float, r: float, a: float, b: float,
                                epsilon1: float = EPSILON1, cap: float = UNIT_SPHERE_CAP,
                                volume: float = UNIT_SPHERE_VOLUME) -> complex:
    """A = r Cap omega^2 / (omega^2 - omega_*^2), omega_*^2 = (a + i r^eps1 b) Cap / |D_0|.

    Raises
    ------
    SingularityError
        If omega^2 = omega_*^2 (e.g. b = 0 at the pinned frequency).
    """
    w_star_sq = complex(a, r**epsilon1 * b) * cap / volume
    den = omega**2 - w_star_sq
    if abs(den) <= 1e-14 * abs(omega**2):
        raise SingularityError("point polarizability is singular (omega = omega_*)")
    return r * cap * omega**2 / den


# ---------------------------------------------------------------------------
# Clouds
# ---------------------------------------------------------------------------
def generate_cloud(omega_radius: float, N: int, eta: float = 1.0, mode: str = "grid",
                   seed: Optional[int] = None) -> np.ndarray:
    """Points in the ball |x| < omega_radius with min separation >= eta N^{-1/3}.

    ``grid``: cell centres of an n^3 lattice (n = round(N^{1/3})) on the
    circumscribing cube, clipped to the ball; the returned count is the
    number of surviving points.  ``poisson``: N points by dart throwing.

    Raises
    ------
    ConfigurationError
        If dart throwing fails after 10^4 N attempts.
    """
    if N < 1 or omega_radius <= 0:
        raise ConfigurationError("need N >= 1 and omega_radius > 0")
    if N == 1:
        return np.zeros((1, 3))
    dmin = eta * N ** (-1.0 / 3.0)
    if mode == "grid":
        n = int(round(N ** (1.0 / 3.0)))
        h = 2.0 * omega_radius / n
        if h < dmin:
            raise ConfigurationError(f"grid spacing {h:.3g} below eta N^-1/3 = {dmin:.3g}")
        c = -omega_radius + h * (np.arange(n) + 0.5)
        X = np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1).reshape(-1, 3)
        return X[np.linalg.norm(X, axis=1) < omega_radius]
    if mode == "poisson":
        rng = np.random.default_rng(seed)
        pts = []
        attempts = 0
        while len(pts) < N:
            attempts += 1
            if attempts > 10_000 * N:
                raise ConfigurationError("packing infeasible: dart throwing exhausted its attempts")
            x = rng.uniform(-omega_radius, omega_radius, 3)
            if x @ x >= omega_radius**2:
                continue
            if pts and np.min(np.linalg.norm(np.asarray(pts) - x, axis=1)) < dmin:
                continue
            pts.append(x)
        return np.asarray(pts)
    raise ConfigurationError(f"unknown cloud mode {mode!r}")


def min_separation(points: np.ndarray) -> float:
    if len(points) < 2:
        return np.inf
    d, _ = cKDTree(points).query(points, k=2)
    return float(np.min(d[:, 1]))


def pair_sum(points: np.ndarray, x: np.ndarray, h: float) -> float:
    """sum_{|x - z_j| >= h} |x - z_j|^{-2}, for spot checks of the regularity bound."""
    d = np.linalg.norm(points - np.asarray(x, dtype=float), axis=1)
    d = d[d >= h]
    return float(np.sum(d ** -2.0))


@dataclass(frozen=True)
class CavityEnsemble:
    """Small resonators in a ball, with the scaling r^{1 - eps1} N = Lambda."""

    omega_radius: float
    positions: np.ndarray = field(repr=False)
    r: float
    epsilon1: float
    Lambda: float
    eta: float
    a: float
    b: float
    cap_D0: float = UNIT_SPHERE_CAP
    volume_D0: float = UNIT_SPHERE_VOLUME

    @property
    def N(self) -> int:
        return len(self.positions)

    def check(self, tol: float = 1e-12) -> None:
        if abs(self.r ** (1 - self.epsilon1) * self.N - self.Lambda) > tol * self.Lambda:
            raise ConfigurationError("ensemble violates r^(1 - eps1) N = Lambda")
        if min_separation(self.positions) < self.eta * self.N ** (-1.0 / 3.0) * (1 - 1e-12):
            raise ConfigurationError("ensemble violates the minimum-separation bound")
        if np.any(np.linalg.norm(self.positions, axis=1) + self.r >= self.omega_radius):
            raise ConfigurationError("resonators must lie inside Omega")


def build_ensemble(omega_radius: float, N: int, Lambda: float, a: float, b: float,
                   epsilon1: float = EPSILON1, eta: float = 1.0, mode: str = "grid",
                   seed: Optional[int] = None) -> CavityEnsemble:
    """Cloud plus radius r = (Lambda / N_actual)^{1/(1 - eps1)}."""
    if not 0 < epsilon1 < 1:
        raise ConfigurationError("epsilon1 must lie in (0, 1)")
    pts = generate_cloud(omega_radius, N, eta, mode, seed)
    r = (Lambda / len(pts)) ** (1.0 / (1.0 - epsilon1))
    ens = CavityEnsemble(omega_radius, pts, r, epsilon1, Lambda, eta, a, b)
    ens.check()
    return ens


# ---------------------------------------------------------------------------
# Foldy-Lax
# ---------------------------------------------------------------------------
def plane_wave(k: float, direction=(0.0, 0.0, 1.0)) -> Callable:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return lambda x: np.exp(1j * k * (np.asarray(x) @ d))


@dataclass(frozen=True)
class FoldyLaxSolution:
    amplitude: complex
    positions: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    k: float
    condition: float
    u_in: Callable = field(repr=False)

    def field(self, points) -> np.ndarray:
        """u^N(x) = u_in(x) + A sum_j G^k(x - z_j) u_j."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        G = green_free(x[:, None, :] - self.positions[None, :, :], self.k, 3)
        return self.u_in(x) + self.amplitude * (G @ self.u)


def foldy_lax_solve(ensemble: CavityEnsemble, omega: float, u_in: Callable,
                    cond_max: float = 1e12) -> FoldyLaxSolution:
    """Solve u_j = u_in(z_j) + sum_{i != j} A G^k(z_j - z_i) u_i.

    Raises
    ------
    IllConditionedError
        Near a collective resonance of the cloud.
    """
    k = omega
    A = point_polarizability_single(omega, ensemble.r, ensemble.a, ensemble.b,
                                    ensemble.epsilon1, ensemble.cap_D0, ensemble.volume_D0)
    Z = ensemble.positions
    n = len(Z)
    M = np.eye(n, dtype=complex)
    if n > 1:
        diff = Z[:, None, :] - Z[None, :, :]
        off = ~np.eye(n, dtype=bool)
        M[off] -= A * green_free(diff[off], k, 3)
    cond = float(np.linalg.cond(M))
    if cond > cond_max:
        raise IllConditionedError("Foldy-Lax system is near a collective resonance", cond)
    u = np.linalg.solve(M, u_in(Z))
    return FoldyLaxSolution(A, Z, u, k, cond, u_in)


def probe_points(omega_radius: float, n: int = 64, factor: float = 1.5) -> np.ndarray:
    """Fibonacci points on the sphere of radius factor * omega_radius."""
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = np.pi * (1 + 5**0.5) * i
    pts = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)
    return factor * omega_radius * pts


# ---------------------------------------------------------------------------
# Effective medium: penetrable ball
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EffectivePotential:
    """Constant V = 1/|Omega| with coefficient i Lambda a Cap / b."""

    Lambda: float
    a: float
    b: float
    omega_radius: float
    cap_D0: float = UNIT_SPHERE_CAP

    @property
    def coefficient(self) -> complex:
        if self.b == 0:
            raise SingularityError("effective coefficient needs b != 0")
        return 1j * self.Lambda * self.a * self.cap_D0 / self.b

    @property
    def V(self) -> float:
        return 1.0 / (4.0 / 3.0 * np.pi * self.omega_radius**3)

    def interior_wavenumber(self, k: float) -> complex:
        """sqrt(k^2 - coefficient V), branch with positive real part."""
        kk = np.sqrt(complex(k * k - self.coefficient * self.V))
        return kk if kk.real >= 0 else -kk


def _h1(l, z, derivative=False):
    return spherical_jn(l, z, derivative) + 1j * spherical_yn(l, z, derivative)


@dataclass(frozen=True)
class BallSolution:
    """Partial-wave solution for a plane wave exp(i k d.x) hitting the ball."""

    k: float
    k_int: complex
    R: float
    direction: np.ndarray
    interior: np.ndarray = field(repr=False)
    scattered: np.ndarray = field(repr=False)
    min_denominator: float = 0.0

    def field(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(x, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(r > 0, (x @ self.direction) / np.where(r > 0, r, 1), 1.0)
        out = np.zeros(len(x), dtype=complex)
        inside = r < self.R
        ls = np.arange(len(self.interior))
        for l in ls:
            P = eval_legendre(l, cos)
            if np.any(inside):
                out[inside] += self.interior[l] * spherical_jn(l, self.k_int * r[inside]) * P[inside]
            if np.any(~inside):
                ro = r[~inside]
                out[~inside] += ((2 * l + 1) * 1j**l * spherical_jn(l, self.k * ro)
                                 + self.scattered[l] * _h1(l, self.k * ro)) * P[~inside]
        return out


def effective_medium_solve(omega_radius: float, k: float, potential: EffectivePotential,
                           direction=(0.0, 0.0, 1.0), tol: float = 1e-16,
                           max_degree: int = 200) -> BallSolution:
    """Exact partial-wave solution with u and du/dr continuous on |x| = R."""
    if not k > 0:
        raise ConfigurationError("k must be > 0")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    R = omega_radius
    ki = potential.interior_wavenumber(k) if potential.Lambda != 0 else complex(k)
    x, xi = k * R, ki * R
    lmax = int(np.ceil(abs(xi) + x)) + 10
    interior, scattered, dens = [], [], []
    for l in range(max_degree + 1):
        A = (2 * l + 1) * 1j**l
        j, jp = spherical_jn(l, x), spherical_jn(l, x, True)
        h, hp = _h1(l, x), _h1(l, x, True)
        ji, jip = spherical_jn(l, xi), spherical_jn(l, xi, True)
        den = k * hp * ji - ki * jip * h
        dens.append(abs(den) / (abs(k * hp * ji) + abs(ki * jip * h)))
        s = A * (ki * jip * j - k * jp * ji) / den
        c = A * (k * hp * j - k * jp * h) / den
        scattered.append(s)
        interior.append(c)
        if l >= lmax and abs(s) < tol * max(1.0, abs(scattered[0])) \
                and abs(c * ji) < tol * max(1.0, abs(interior[0] * spherical_jn(0, xi))):
            break
    return BallSolution(k, ki, R, d, np.asarray(interior), np.asarray(scattered), float(min(dens)))


def admissible_lambda(omega_radius: float, k: float, a: float, b: float, Lambda: float,
                      min_denominator: float = 1e-8, max_halvings: int = 60) -> float:
    """Largest Lambda / 2^j for which the effective problem is well conditioned.

    Gain (b > 0) can place the ball at a lasing threshold where a partial-wave
    denominator vanishes; Lambda is halved until every normalized
    denominator exceeds ``min_denominator``.
    """
    lam = Lambda
    for _ in range(max_halvings):
        sol = effective_medium_solve(omega_radius, k, EffectivePotential(lam, a, b, omega_radius))
        if sol.min_denominator > min_denominator:
            if lam != Lambda:
                logger.info("Lambda reduced from %g to %g for conditioning", Lambda, lam)
            return lam
        lam /= 2.0
    raise IllConditionedError("no admissible Lambda found", sol.min_denominator)


@dataclass(frozen=True)
class CavityResult:
    N: int
    sup_error: float
    Lambda: float
    condition: float


def cavity_convergence(N_list, omega_radius: float = 1.0, Lambda: float = 1.0, a: float = 1.0 / 3.0,
                       b: float = -1.0, epsilon1: float = EPSILON1, mode: str = "grid",
                       seed: Optional[int] = None, n_probe: int = 64) -> list:
    """Sup-norm error between Foldy-Lax microfields and the effective field.

    The frequency is pinned at omega^2 = a Cap/|D_0| (omega = 1 for a = 1/3
    and the unit sphere template); probes sit on a sphere of radius 1.5 R.
    """
    omega = pinned_frequency(a)
    if b > 0:
        Lambda = admissible_lambda(omega_radius, omega, a, b, Lambda)
    u_in = plane_wave(omega)
    eff = effective_medium_solve(omega_radius, omega, EffectivePotential(Lambda, a, b, omega_radius))
    probes = probe_points(omega_radius, n_probe)
    ref = eff.field(probes)
    out = []
    for N in N_list:
        ens = build_ensemble(omega_radius, N, Lambda, a, b, epsilon1, mode=mode, seed=seed)
        sol = foldy_lax_solve(ens, omega, u_in)
        err = float(np.max(np.abs(sol.field(probes) - ref)))
        logger.info("N = %d (actual %d): sup error %.3e", N, ens.N, err)
        out.append(CavityResult(ens.N, err, Lambda, sol.condition))
    return out


# ---------------------------------------------------------------------------
# PT dimer as a point scatterer
# ---------------------------------------------------------------------------
def pt_dimer_polarizability(omega, a: float, C11: float, C12: float, volume: float):
    """m(omega) = Cap (a^2 C11 C12/|D_1|^2 x^2 + a Cap/(2|D_1|) x + 1), x = 1/(omega^2 - omega_1^2).

    Cap = 2 (C11 + C12) and omega_1^2 = a C11 / |D_1|.

    Raises
    ------
    SingularityError
        At omega = omega_1.
    """
    w1sq = a * C11 / volume
    den = np.asarray(omega, dtype=complex) ** 2 - w1sq
    if np.any(den == 0):
        raise SingularityError("m(omega) has a pole at omega_1")
    x = 1.0 / den
    cap = 2.0 * (C11 + C12)
    m = cap * (a**2 * C11 * C12 / volume**2 * x**2 + a * cap / (2 * volume) * x + 1.0)
    if np.isrealobj(omega) or np.all(np.imag(omega) == 0):
        m = m.real
    return m[()] if np.ndim(m) == 0 else m


def dimer_q_coefficients(lam, a: float, b0: float, C11: float, C12: float) -> np.ndarray:
    """Q = (lambda I - C^v)^{-1} at the exceptional point, entrywise in closed form."""
    lam1 = a * C11
    e = lam - lam1
    if e == 0:
        raise SingularityError("Q has a pole at lambda_1")
    coef = complex(a, b0)
    return np.array([
        [1j * b0 * C11 / e**2 + 1 / e, C12 * coef / e**2],
        [b0**2 * C11**2 / (coef * C12) / e**2, -1j * b0 * C11 / e**2 + 1 / e],
    ])


def polarizability_from_q(Q: np.ndarray, a: float, b0: float, C11: float, C12: float) -> complex:
    """Cap (1 + (Cap/4) 1^T Q w) with w = (a + i b0, a - i b0)."""
    cap = 2.0 * (C11 + C12)
    w = np.array([complex(a, b0), complex(a, -b0)])
    return cap * (1.0 + cap / 4.0 * np.sum(Q @ w))
