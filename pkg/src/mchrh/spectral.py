"""Uniformized spectral parameter, phase functions, and Lax coefficient matrices.

Everything downstream (Volterra marching, jump assembly, reconstruction)
is written in terms of the uniformizing parameter mu, in which both the
original parameter lambda = -(mu + 1/mu)/2 and the root sqrt(1-lambda^2)
are rational: sqrt(1-lambda^2) = 2ik = i(mu^2-1)/(2mu) on the working
sheet.  The root is never evaluated directly, so no branch bookkeeping
happens anywhere in the package.

All functions are pure and accept numpy-broadcastable complex input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

#: singular points of the uniformization / coefficient matrices
SINGULAR_POINTS = (0.0 + 0.0j, 1.0 + 0.0j, -1.0 + 0.0j, 1.0j, -1.0j)

#: default exclusion radius around the singular points
DELTA_SING = 1e-6


class SingularMuError(ValueError):
    """Evaluation requested inside an exclusion disk around 0, +-1 or +-i."""


@dataclass(frozen=True)
class SpectralPoint:
    """A point on the uniformized spectral curve.

    lambda = -(mu + 1/mu)/2 and k = (mu - 1/mu)/4, so that
    1 - lambda^2 = (2ik)^2 identically.
    """

    mu: complex
    lam: complex
    k: complex

    @property
    def two_ik(self) -> complex:
        return 2j * self.k


@dataclass(frozen=True)
class FieldSample:
    """Pointwise physical data entering the Lax coefficients.

    m is the momentum variable (positive by standing assumption), u the
    field, ux its space derivative, omega = u^2 - ux^2 + 2u the flux
    velocity.
    """

    m: float
    u: float = 0.0
    ux: float = 0.0
    omega: float | None = None

    def __post_init__(self):
        if self.omega is None:
            object.__setattr__(self, "omega", self.u**2 - self.ux**2 + 2.0 * self.u)

    @property
    def w(self) -> float:
        return self.omega


def _guard(mu, points, delta=DELTA_SING, what="coefficient"):
    mu_arr = np.asarray(mu, dtype=complex)
    for p in points:
        if np.any(np.abs(mu_arr - p) < delta):
            raise SingularMuError(
                f"{what} evaluation within {delta:g} of mu={p}; "
                "use the mu -> 1/mu symmetry or local expansion data instead"
            )


def uniformize(mu: complex, delta: float = DELTA_SING) -> SpectralPoint:
    """Map mu to the spectral triple (mu, lambda, k).

    Raises SingularMuError at mu = 0 (use the mu -> 1/mu symmetry for the
    punctured disk).
    """
    _guard(mu, (0.0,), delta, "uniformization")
    mu = complex(mu)
    lam = -0.5 * (mu + 1.0 / mu)
    k = 0.25 * (mu - 1.0 / mu)
    return SpectralPoint(mu=mu, lam=lam, k=k)


def two_ik(mu):
    """sqrt(1 - lambda^2) on the working sheet, rational in mu."""
    mu = np.asarray(mu, dtype=complex)
    return 1j * (mu * mu - 1.0) / (2.0 * mu)


def phase_hat(y, t, mu):
    """Phase driving every jump matrix, as a function of the (y, t) parameters.

    p_hat = i(mu^2-1)/(2mu) * (y/2 - 4 mu^2 t/(mu^2+1)^2).  Purely imaginary
    for real mu and real (y, t); singular at mu in {0, +-i} when t != 0.
    """
    mu = np.asarray(mu, dtype=complex)
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr != 0.0):
        _guard(mu, (0.0, 1j, -1j), what="phase")
    else:
        _guard(mu, (0.0,), what="phase")
    pref = 1j * (mu * mu - 1.0) / (2.0 * mu)
    tpart = 4.0 * mu * mu / (mu * mu + 1.0) ** 2 if np.any(t_arr != 0.0) else 0.0
    return pref * (np.asarray(y, dtype=float) / 2.0 - tpart * t_arr)


def phase_zero(x, t, mu):
    """Same rational phase with the space variable x in place of y."""
    return phase_hat(x, t, mu)


def _check_coeff_mu(pt: SpectralPoint, exclude, delta):
    _guard(pt.mu, exclude, delta)


def u_inf(f: FieldSample, pt: SpectralPoint, delta: float = DELTA_SING) -> np.ndarray:
    """x-equation coefficient in the large-mu normalization.

    Traceless; vanishes identically on the unit background m = 1.
    Singular at mu = +-1 where 2ik vanishes.
    """
    _check_coeff_mu(pt, (1.0, -1.0), delta)
    tik = pt.two_ik
    c_rot = pt.lam * (f.m - 1.0) / (2.0 * tik)
    c_diag = (f.m - 1.0) / (2.0 * tik)
    out = np.zeros((2, 2), dtype=complex)
    out[0, 1] = c_rot
    out[1, 0] = -c_rot
    out[0, 0] = c_diag
    out[1, 1] = -c_diag
    return out


def v_inf(f: FieldSample, pt: SpectralPoint, delta: float = DELTA_SING) -> np.ndarray:
    """t-equation coefficient in the large-mu normalization.

    Singular at mu = +-1 (2ik = 0) and mu = +-i (lambda = 0).
    """
    _check_coeff_mu(pt, (1.0, -1.0, 1j, -1j), delta)
    tik = pt.two_ik
    lam = pt.lam
    w1 = (lam * f.w * (f.m - 1.0) + 2.0 * f.u / lam) / (2.0 * tik)
    w2 = f.ux / lam
    w3 = (f.u + 0.5 * (f.m - 1.0) * f.w) / tik
    out = np.zeros((2, 2), dtype=complex)
    out[0, 1] = -w1 + w2
    out[1, 0] = w1 + w2
    out[0, 0] = -w3
    out[1, 1] = w3
    return out


def u_zero(f: FieldSample, pt: SpectralPoint, delta: float = DELTA_SING) -> np.ndarray:
    """x-equation coefficient in the normalization regular at mu = +-i.

    Exactly zero at mu = +-i for every field sample; singular at mu = +-1.
    """
    _check_coeff_mu(pt, (1.0, -1.0), delta)
    mu = pt.mu
    dm = f.m - 1.0
    z_rot = 1j * (mu * mu + 1.0) * dm / (2.0 * (mu * mu - 1.0))
    z_diag = dm * (1j * mu / (mu * mu - 1.0) + 1j * (mu * mu - 1.0) / (4.0 * mu))
    out = np.zeros((2, 2), dtype=complex)
    out[0, 1] = z_rot
    out[1, 0] = -z_rot
    out[0, 0] = -z_diag
    out[1, 1] = z_diag
    return out


def v_zero(f: FieldSample, pt: SpectralPoint, delta: float = DELTA_SING) -> np.ndarray:
    """t-equation coefficient paired with u_zero: v_inf plus the diagonal
    omega*m correction."""
    _check_coeff_mu(pt, (0.0, 1.0, -1.0, 1j, -1j), delta)
    mu = pt.mu
    corr = 1j * (mu * mu - 1.0) / (4.0 * mu) * f.w * f.m
    out = v_inf(f, pt, delta)
    out[0, 0] += corr
    out[1, 1] -= corr
    return out


# Vectorized variants used by the Volterra marchers: mu is an array and the
# field sample a scalar; entries returned as separate arrays so each marcher
# can apply its own exponential weights.

def u_inf_entries(f: FieldSample, mu: np.ndarray):
    """(diag, off12, off21) of u_inf over an array of mu."""
    mu = np.asarray(mu, dtype=complex)
    tik = two_ik(mu)
    lam = -0.5 * (mu + 1.0 / mu)
    dm = f.m - 1.0
    rot = lam * dm / (2.0 * tik)
    return dm / (2.0 * tik), rot, -rot


def v_inf_entries(f: FieldSample, mu: np.ndarray):
    """(diag, off12, off21) of v_inf over an array of mu."""
    mu = np.asarray(mu, dtype=complex)
    tik = two_ik(mu)
    lam = -0.5 * (mu + 1.0 / mu)
    w1 = (lam * f.w * (f.m - 1.0) + 2.0 * f.u / lam) / (2.0 * tik)
    w2 = f.ux / lam
    w3 = (f.u + 0.5 * (f.m - 1.0) * f.w) / tik
    return -w3, -w1 + w2, w1 + w2


def u_zero_entries(f: FieldSample, mu: np.ndarray):
    mu = np.asarray(mu, dtype=complex)
    dm = f.m - 1.0
    z_rot = 1j * (mu * mu + 1.0) * dm / (2.0 * (mu * mu - 1.0))
    z_diag = dm * (1j * mu / (mu * mu - 1.0) + 1j * (mu * mu - 1.0) / (4.0 * mu))
    return -z_diag, z_rot, -z_rot


def v_zero_entries(f: FieldSample, mu: np.ndarray):
    mu = np.asarray(mu, dtype=complex)
    d, o12, o21 = v_inf_entries(f, mu)
    corr = 1j * (mu * mu - 1.0) / (4.0 * mu) * f.w * f.m
    return d + corr, o12, o21


def conj_pauli1(x: np.ndarray) -> np.ndarray:
    """sigma1 * conj(X) * sigma1 for stacked 2x2 arrays."""
    xc = np.conj(x)
    out = np.empty_like(xc)
    out[..., 0, 0] = xc[..., 1, 1]
    out[..., 1, 1] = xc[..., 0, 0]
    out[..., 0, 1] = xc[..., 1, 0]
    out[..., 1, 0] = xc[..., 0, 1]
    return out


def sandwich(sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """sigma * X * sigma for a Pauli matrix sigma and stacked X."""
    return sigma @ x @ sigma
