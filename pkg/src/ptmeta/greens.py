"""Free-space, quasiperiodic and periodic Helmholtz Green's functions.

Sign convention: G^k(x) = -exp(ik|x|)/(4 pi |x|) in 3D and
G^k(x) = -(i/4) H_0^(1)(k|x|) in 2D, so Delta G = delta.

The lattice is periodic in the first ``dim - 1`` coordinates with period L;
the last coordinate is normal to the screen.  Three evaluators are provided:

* ``green_quasi_spectral``: plane-wave (Rayleigh) sum, fast for |x_normal| > 0.
* ``green_quasi_spatial``: direct image sum, Wynn-accelerated.
* ``green_quasi_ewald``: Ewald split, uniformly fast; used by the assembly code.

The first two are independent of the third and serve as its oracles.
"""

import logging
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import erf, erfc, erfcx, exp1, hankel1

from ._series import wynn_epsilon
from .errors import ConfigurationError, SingularityError, UnsupportedRegimeError, WoodAnomalyError
from .geometry import LatticeConfig

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
WOOD_TOL = 1e-10


@dataclass(frozen=True)
class LatticeSumPolicy:
    """Truncation control for the direct lattice sums.

    Attributes
    ----------
    spatial_cutoff : int
        Initial image cutoff M_sp (|m| <= M_sp); raised automatically.
    spectral_cutoff : int
        Initial dual cutoff M_q (|q| <= 2 pi M_q / L); raised automatically.
    target_tol : float
        Requested absolute accuracy of the truncated sums.
    max_cutoff : int
        Hard ceiling for automatic raising.
    """

    spatial_cutoff: int = 64
    spectral_cutoff: int = 16
    target_tol: float = 1e-9
    max_cutoff: int = 4096

    def __post_init__(self):
        if self.spatial_cutoff < 1 or self.spectral_cutoff < 1:
            raise ConfigurationError("lattice-sum cutoffs must be >= 1")
        if not self.target_tol > 0:
            raise ConfigurationError("target_tol must be > 0")


DEFAULT_POLICY = LatticeSumPolicy()


# ---------------------------------------------------------------------------
# Free space
# ---------------------------------------------------------------------------
def _free(r, k, dim):
    r = np.asarray(r, dtype=float)
    if dim == 3:
        return -np.exp(1j * k * r) / (4.0 * np.pi * r)
    if k == 0:
        return np.log(r) / (2.0 * np.pi) + 0j
    return -0.25j * hankel1(0, k * r)


def green_free(x, k: float, dim: int):
    """Outgoing free-space Green's function.

    Parameters
    ----------
    x : array_like, shape (..., dim)
    k : float
        Wavenumber, >= 0.
    dim : {2, 3}

    Returns
    -------
    complex or ndarray of complex
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ConfigurationError(f"point has {x.shape[-1]} components, expected {dim}")
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularityError("free-space Green's function evaluated at x = 0")
    val = _free(r, k, dim)
    return val[()] if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# Dual lattice helpers
# ---------------------------------------------------------------------------
def _gamma(beta_sq, k):
    """sqrt(|beta|^2 - k^2) with Re >= 0; -i sqrt(k^2 - |beta|^2) if propagating."""
    beta_sq = np.asarray(beta_sq, dtype=float)
    return np.where(beta_sq < k * k,
                    -1j * np.sqrt(np.maximum(k * k - beta_sq, 0.0)),
                    np.sqrt(np.maximum(beta_sq - k * k, 0.0)) + 0j)


def _dual_grid(alpha, L, nmax, ldim):
    n = np.arange(-nmax, nmax + 1)
    if ldim == 1:
        return (alpha[0] + 2.0 * np.pi * n / L)[:, None]
    q1, q2 = np.meshgrid(n, n, indexing="ij")
    return np.stack([alpha[0] + 2.0 * np.pi * q1.ravel() / L,
                     alpha[1] + 2.0 * np.pi * q2.ravel() / L], axis=-1)


def check_wood_anomaly(alpha, k, lattice: LatticeConfig, tol: float = WOOD_TOL):
    """Raise if k = |alpha + q| for a dual lattice vector q."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    nmax = int(np.ceil(k * lattice.period / (2.0 * np.pi))) + 2
    beta = _dual_grid(alpha, lattice.period, nmax, lattice.lattice_dim)
    if np.any(np.abs(np.linalg.norm(beta, axis=-1) - k) < tol):
        raise WoodAnomalyError(f"Wood anomaly: k = {k} equals |alpha + q| for alpha = {alpha}")


def propagating_orders(alpha, k, lattice: LatticeConfig) -> int:
    """Number of dual vectors q with |alpha + q| < k."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    nmax = int(np.ceil(k * lattice.period / (2.0 * np.pi))) + 2
    beta = _dual_grid(alpha, lattice.period, nmax, lattice.lattice_dim)
    return int(np.sum(np.linalg.norm(beta, axis=-1) < k))


def _split(x, lattice):
    x = np.asarray(x, dtype=float)
    d = lattice.ambient_dim
    if x.shape[-1] != d:
        raise ConfigurationError(f"point has {x.shape[-1]} components, expected {d}")
    return x[..., :d - 1], x[..., d - 1]


def _prep_alpha(alpha, lattice):
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    if alpha.shape != (lattice.lattice_dim,):
        raise ConfigurationError(f"alpha needs {lattice.lattice_dim} component(s)")
    return alpha


# ---------------------------------------------------------------------------
# Spectral representation
# ---------------------------------------------------------------------------
def green_quasi_spectral(x, alpha, k: float, lattice: LatticeConfig,
                         policy: LatticeSumPolicy = DEFAULT_POLICY, return_error: bool = False):
    """Plane-wave representation of the quasiperiodic Green's function.

    G = -(1/(2 L^{d-1})) sum_q exp(i(alpha+q).x') exp(-gamma_q |x_n|) / gamma_q.

    Parameters
    ----------
    x : array_like, shape (dim,)
    alpha : array_like
        Quasi-momentum (1 component in 2D, 2 in 3D).
    k : float
    lattice : LatticeConfig
    policy : LatticeSumPolicy
        The dual cutoff is raised until the first omitted shell is below
        ``target_tol``.
    return_error : bool
        Also return the tail estimate.
    """
    alpha = _prep_alpha(alpha, lattice)
    check_wood_anomaly(alpha, k, lattice)
    xp, xn = _split(x, lattice)
    z = abs(float(xn))
    L = lattice.period
    cell = lattice.cell_measure
    if z == 0:
        logger.warning("spectral sum at |x_normal| = 0 converges only conditionally")
    nmax = policy.spectral_cutoff
    if z > 0:
        need = int(np.ceil(-np.log(policy.target_tol * 1e-2) * L / (2.0 * np.pi * z))) + 2
        nmax = max(nmax, need)
    if nmax > policy.max_cutoff:
        raise UnsupportedRegimeError(
            f"spectral sum needs {nmax} terms at |x_n| = {z}; use the spatial or Ewald evaluator")
    beta = _dual_grid(alpha, L, nmax, lattice.lattice_dim)
    g = _gamma(np.sum(beta**2, axis=-1), k)
    terms = np.exp(1j * (beta @ np.atleast_1d(xp)) - g * z) / g
    val = -np.sum(terms) / (2.0 * cell)
    # magnitude of the outermost shell
    edge = np.max(np.abs(beta), axis=-1) > 2.0 * np.pi * (nmax - 0.5) / L + np.max(np.abs(alpha))
    err = float(np.sum(np.abs(terms[edge]))) / (2.0 * cell) if np.any(edge) else 0.0
    return (complex(val), err) if return_error else complex(val)


# ---------------------------------------------------------------------------
# Spatial representation
# ---------------------------------------------------------------------------
def _row_partial_sums(terms, center):
    """Symmetric partial sums sum_{|m| <= j} for j = 0..M."""
    head = terms[..., center:center + 1]
    pairs = terms[..., center + 1:] + terms[..., center - 1::-1]
    return np.cumsum(np.concatenate([head, pairs], axis=-1), axis=-1)


def _accelerate(partial, start):
    return wynn_epsilon(partial[..., start:])


def green_quasi_spatial(x, alpha, k: float, lattice: LatticeConfig,
                        policy: LatticeSumPolicy = DEFAULT_POLICY, return_error: bool = False):
    """Image sum sum_m G^k(x - m) exp(i alpha.m), Wynn-accelerated.

    For real k the raw sum converges only conditionally, so symmetric partial
    sums are extrapolated with the epsilon algorithm (row by row, then over
    rows, in 3D).  The cutoff is doubled until the extrapolation error
    estimate falls below ``policy.target_tol``.

    Returns
    -------
    complex, or (complex, float) with ``return_error``.
    """
    alpha = _prep_alpha(alpha, lattice)
    check_wood_anomaly(alpha, k, lattice)
    if k == 0 and np.allclose(alpha, 0.0):
        raise ConfigurationError("alpha = 0, k = 0 image sum diverges; use green_periodic")
    xp, xn = _split(x, lattice)
    xp = np.atleast_1d(xp)
    L = lattice.period
    dim = lattice.ambient_dim
    M = policy.spatial_cutoff
    history = []
    while True:
        m = np.arange(-M, M + 1)
        start = M // 4
        if dim == 2:
            R = np.hypot(xp[0] - m * L, xn)
            if np.any(R == 0):
                raise SingularityError("evaluation point coincides with a lattice image")
            terms = _free(R, k, 2) * np.exp(1j * alpha[0] * m * L)
            val, err = _accelerate(_row_partial_sums(terms, M), start)
        else:
            m1, m2 = np.meshgrid(m, m, indexing="ij")
            R = np.sqrt((xp[0] - m1 * L)**2 + (xp[1] - m2 * L)**2 + xn**2)
            if np.any(R == 0):
                raise SingularityError("evaluation point coincides with a lattice image")
            T = _free(R, k, 3) * np.exp(1j * L * (alpha[0] * m1 + alpha[1] * m2))
            if abs(alpha[0]) > abs(alpha[1]):
                # inner sums must run along the oscillating direction
                T = T.T
            row_vals, row_err = _accelerate(_row_partial_sums(T, M), start)
            val, err = _accelerate(_row_partial_sums(row_vals, M), start)
        # the epsilon-table spread underestimates the true error by a few times
        err = 10.0 * err
        history.append((M, err))
        if err < policy.target_tol or 2 * M > policy.max_cutoff // (4 if dim == 3 else 1):
            break
        M *= 2
    if err >= policy.target_tol:
        logger.warning("spatial sum reached cutoff %d with error estimate %.2e", M, err)
    return (complex(val), float(err)) if return_error else complex(val)


# ---------------------------------------------------------------------------
# Ewald representation (vectorized workhorse)
# ---------------------------------------------------------------------------
def ewald_parameter(lattice: LatticeConfig) -> float:
    return np.sqrt(np.pi) / lattice.period


def _exp_erfc(s, w):
    """exp(s) * erfc(w) without overflow for large Re(w)."""
    s = np.asarray(s, dtype=complex)
    w = np.asarray(w, dtype=complex)
    out = np.empty(np.broadcast(s, w).shape, dtype=complex)
    s, w = np.broadcast_arrays(s, w)
    pos = w.real >= 0
    out[pos] = np.exp(s[pos] - w[pos]**2) * erfcx(w[pos])
    out[~pos] = np.exp(s[~pos]) * erfc(w[~pos])
    return out


def _cutoffs(xp, z, lattice, E):
    L = lattice.period
    span = float(np.max(np.abs(xp))) if np.size(xp) else 0.0
    zmax = float(np.max(np.abs(z))) if np.size(z) else 0.0
    m_cut = 4 + int(np.ceil(span / L))
    q_cut = 4 + int(np.ceil(E * E * zmax * L / np.pi))
    return m_cut, q_cut


def _spectral_part(xp, z, alpha, k, lattice, E, q_cut, skip_zero_order=False):
    """Ewald reciprocal part (without the leading minus sign)."""
    L = lattice.period
    beta = _dual_grid(alpha, L, q_cut, lattice.lattice_dim)
    g = _gamma(np.sum(beta**2, axis=-1), k)
    if skip_zero_order:
        keep = np.linalg.norm(beta, axis=-1) > 1e-14
        beta, g = beta[keep], g[keep]
    acc = np.zeros(z.shape, dtype=complex)
    for bj, gj in zip(beta, g):
        phase = np.exp(1j * (xp @ bj))
        bracket = (_exp_erfc(gj * z, gj / (2 * E) + z * E)
                   + _exp_erfc(-gj * z, gj / (2 * E) - z * E))
        acc += phase * bracket / gj
    return acc / (4.0 * lattice.cell_measure)


def _spatial_terms(R, k, E, dim):
    """Ewald real-space kernel for one image (without the leading minus sign)."""
    if dim == 3:
        a = 1j * k / (2.0 * E)
        return (np.exp(1j * k * R) * erfc(R * E + a) + np.exp(-1j * k * R) * erfc(R * E - a)) \
            / (8.0 * np.pi * R)
    x = (R * E)**2
    En = exp1(x)
    acc = En.astype(complex)
    ratio = (k / (2.0 * E))**2
    ex = np.exp(-x)
    q = 1
    while True:
        c = ratio**q / factorial(q)
        if c < 1e-18:
            break
        # upward recurrence; its error growth is damped by c
        En = (ex - x * En) / q
        acc += c * En
        q += 1
    return acc / (4.0 * np.pi)


def _image_grid(m_cut, ldim):
    m = np.arange(-m_cut, m_cut + 1)
    if ldim == 1:
        return m[:, None]
    m1, m2 = np.meshgrid(m, m, indexing="ij")
    return np.stack([m1.ravel(), m2.ravel()], axis=-1)


def _spatial_part(xp, z, alpha, k, lattice, E, m_cut, skip_origin=False):
    L = lattice.period
    dim = lattice.ambient_dim
    ms = _image_grid(m_cut, lattice.lattice_dim)
    if skip_origin:
        ms = ms[np.any(ms != 0, axis=1)]
    d = xp[None, ...] - L * ms.reshape((len(ms),) + (1,) * z.ndim + (ms.shape[1],))
    R = np.sqrt(np.sum(d * d, axis=-1) + (z * z)[None])
    if np.any(R == 0):
        raise SingularityError("evaluation point coincides with a lattice image")
    # images with (R E)^2 - (k / 2E)^2 > 45 contribute below e^-45
    live = (R * E) ** 2 - (k / (2.0 * E)) ** 2 < 45.0
    terms = np.zeros(R.shape, dtype=complex)
    terms[live] = _spatial_terms(R[live], k, E, dim)
    phase = np.exp(1j * L * (ms @ alpha)).reshape((len(ms),) + (1,) * z.ndim)
    return np.sum(phase * terms, axis=0)


def _self_limit(k, E, dim):
    """lim_{x -> 0} [Ewald real-space origin term + G^k(x)]."""
    if dim == 3:
        a = 1j * k / (2.0 * E)
        return (-2j * k * (1.0 + erf(a)) - 4.0 * E / np.sqrt(np.pi) * np.exp(-a * a)) / (8.0 * np.pi)
    val = (-EULER_GAMMA - 2.0 * np.log(E)) / (4.0 * np.pi)
    if k > 0:
        val += (2.0 * EULER_GAMMA + 2.0 * np.log(k / 2.0)) / (4.0 * np.pi) - 0.25j
        ratio = (k / (2.0 * E))**2
        q = 1
        while True:
            c = ratio**q / (q * factorial(q))
            if c < 1e-18:
                break
            val += c / (4.0 * np.pi)
            q += 1
    return complex(val)


def green_quasi_ewald(x, alpha, k: float, lattice: LatticeConfig, regular: bool = False):
    """Quasiperiodic Green's function by Ewald summation (vectorized).

    Parameters
    ----------
    x : array_like, shape (..., dim)
    alpha : array_like
    k : float
    lattice : LatticeConfig
    regular : bool
        If True return the smooth remainder G^{alpha,k}(x) - G^k(x), which
        is finite at x = 0.

    Returns
    -------
    ndarray of complex, shape x.shape[:-1]
    """
    alpha = _prep_alpha(alpha, lattice)
    check_wood_anomaly(alpha, k, lattice)
    xp, xn = _split(x, lattice)
    xp = np.asarray(xp).reshape(xn.shape + (lattice.lattice_dim,))
    z = np.abs(xn)
    E = ewald_parameter(lattice)
    m_cut, q_cut = _cutoffs(xp, z, lattice, E)
    spec = _spectral_part(xp, z, alpha, k, lattice, E, q_cut)
    spat = _spatial_part(xp, z, alpha, k, lattice, E, m_cut, skip_origin=regular)
    if not regular:
        return -(spec + spat)
    r = np.sqrt(np.sum(xp * xp, axis=-1) + z * z)
    origin = np.empty(z.shape, dtype=complex)
    tiny = r < 1e-10 * lattice.period
    origin[tiny] = _self_limit(k, E, lattice.ambient_dim)
    rr = r[~tiny]
    origin[~tiny] = _spatial_terms(rr, k, E, lattice.ambient_dim) + _free(rr, k, lattice.ambient_dim)
    return -(spec + spat + origin)


# ---------------------------------------------------------------------------
# Periodic (alpha = 0, k = 0) Green's function
# ---------------------------------------------------------------------------
def _periodic_core(x, lattice, regular=False):
    xp, xn = _split(x, lattice)
    xp = np.asarray(xp).reshape(xn.shape + (lattice.lattice_dim,))
    z = np.abs(xn)
    L = lattice.period
    if lattice.ambient_dim == 2:
        u = 2.0 * np.pi * xp[..., 0] / L
        v = 2.0 * np.pi * z / L
        # 2(cosh v - cos u) = 4 (sinh^2(v/2) + sin^2(u/2)), written to avoid cancellation
        arg = 4.0 * (np.sinh(v / 2)**2 + np.sin(u / 2)**2)
        r = np.sqrt(xp[..., 0]**2 + z**2)
        if not regular:
            if np.any(arg == 0):
                raise SingularityError("evaluation point coincides with a lattice image")
            return np.log(arg) / (4.0 * np.pi)
        # remove the log|x|/(2 pi) singularity at the origin image
        out = np.empty(z.shape)
        tiny = r < 1e-8 * L
        out[tiny] = np.log(2.0 * np.pi / L) / (2.0 * np.pi)
        rr = r[~tiny]
        out[~tiny] = (np.log(arg[~tiny]) - 2.0 * np.log(rr)) / (4.0 * np.pi)
        return out
    E = ewald_parameter(lattice)
    alpha = np.zeros(2)
    m_cut, q_cut = _cutoffs(xp, z, lattice, E)
    spec = _spectral_part(xp, z, alpha, 0.0, lattice, E, q_cut, skip_zero_order=True)
    # finite part of the q = 0 term
    fin = (-z * erf(z * E) - np.exp(-(z * E)**2) / (E * np.sqrt(np.pi))) / (2.0 * lattice.cell_measure)
    spat = _spatial_part(xp, z, alpha, 0.0, lattice, E, m_cut, skip_origin=regular)
    if regular:
        r = np.sqrt(np.sum(xp * xp, axis=-1) + z * z)
        origin = np.empty(z.shape, dtype=complex)
        tiny = r < 1e-10 * L
        origin[tiny] = _self_limit(0.0, E, 3)
        rr = r[~tiny]
        origin[~tiny] = _spatial_terms(rr, 0.0, E, 3) + _free(rr, 0.0, 3)
        spat = spat + origin
    return -(spec + fin + spat).real


def green_periodic(x, lattice: LatticeConfig, regular: bool = False):
    """Periodic Laplace Green's function G^{0,0}.

    Equals |x_n|/(2 L^{d-1}) minus the evanescent k = 0 plane-wave sum.
    In 2D the closed form (1/4 pi) log(2(cosh(2 pi x2/L) - cos(2 pi x1/L)))
    is used; in 3D an Ewald split with the finite part of the zero order.

    Parameters
    ----------
    x : array_like, shape (..., dim)
    lattice : LatticeConfig
    regular : bool
        Return G^{0,0} - G^0 (finite at the origin) instead.

    Returns
    -------
    float or ndarray of float
    """
    val = np.asarray(_periodic_core(x, lattice, regular=regular), dtype=float)
    return val[()] if val.ndim == 0 else val


def green_periodic_spectral(x, lattice: LatticeConfig, policy: LatticeSumPolicy = DEFAULT_POLICY):
    """Plane-wave form |x_n|/(2 L^{d-1}) - sum_{q != 0} exp(iq.x') exp(-|q||x_n|)/(2|q| L^{d-1})."""
    xp, xn = _split(x, lattice)
    z = abs(float(xn))
    if z == 0:
        raise ConfigurationError("plane-wave form of G^{0,0} needs |x_n| > 0")
    L = lattice.period
    nmax = max(policy.spectral_cutoff,
               int(np.ceil(-np.log(policy.target_tol * 1e-2) * L / (2.0 * np.pi * z))) + 2)
    beta = _dual_grid(np.zeros(lattice.lattice_dim), L, nmax, lattice.lattice_dim)
    nb = np.linalg.norm(beta, axis=-1)
    keep = nb > 0
    beta, nb = beta[keep], nb[keep]
    s = np.sum(np.exp(1j * (beta @ np.atleast_1d(xp)) - nb * z) / nb)
    return float((z / 2.0 - s.real / 2.0) / lattice.cell_measure)


# ---------------------------------------------------------------------------
# Low-frequency expansion
# ---------------------------------------------------------------------------
def green_low_freq_terms(x, alpha0, omega: float, lattice: LatticeConfig) -> dict:
    """First three terms of G^{omega alpha0, omega} as omega -> 0.

    Returns ``{"singular": 1/(2 i omega w3 L^{d-1}), "periodic": G^{0,0}(x),
    "linear": alpha0 . x' / (2 w3 L^{d-1})}`` with w3 = sqrt(1 - |alpha0|^2).
    """
    alpha0 = _prep_alpha(alpha0, lattice)
    if np.linalg.norm(alpha0) >= 1:
        raise UnsupportedRegimeError("|alpha0| >= 1 gives an evanescent incident wave")
    if not omega > 0:
        raise ConfigurationError("omega must be > 0")
    w3 = np.sqrt(1.0 - alpha0 @ alpha0)
    cell = lattice.cell_measure
    xp, _ = _split(x, lattice)
    return {
        "singular": 1.0 / (2j * omega * w3 * cell),
        "periodic": float(green_periodic(x, lattice)),
        "linear": float(alpha0 @ np.atleast_1d(xp)) / (2.0 * w3 * cell),
        "w3": float(w3),
    }
