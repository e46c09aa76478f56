"""Physical input data: initial profile on the half-line and boundary triple.

CSV schemas (UTF-8, '.' decimal):
  initial:  header ``x,u0,m0`` (either the u0 or the m0 column may be empty)
  boundary: header ``t,v0,v1,v2``

Validation config keys (JSON): ``decay_tol`` (default 1e-8),
``positivity_margin`` (default 0), ``sign_case`` ("auto" | "nonpositive" |
"nonnegative").
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

OMEGA_NONPOSITIVE = "omega_nonpositive"
OMEGA_NONNEGATIVE = "omega_nonnegative"


class ProfileError(ValueError):
    """Schema or invariant violation in input data."""


class SignCaseError(ProfileError):
    """omega(0, t) changes sign; split the time interval into bands first."""


@dataclass
class ValidationConfig:
    decay_tol: float = 1e-8
    positivity_margin: float = 0.0
    sign_case: str = "auto"

    @classmethod
    def from_json(cls, path) -> "ValidationConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {"decay_tol", "positivity_margin", "sign_case"}
        unknown = set(raw) - known
        if unknown:
            raise ProfileError(f"unknown validation config keys: {sorted(unknown)}")
        return cls(**raw)


@dataclass
class InitialProfile:
    """Momentum and field samples of the initial data on [0, X_max]."""

    grid: np.ndarray
    u0: np.ndarray
    m0: np.ndarray
    x_max: float
    decay_tol: float = 1e-8

    def sample(self, j: int):
        from .spectral import FieldSample

        return FieldSample(m=float(self.m0[j]), u=float(self.u0[j]))

    @property
    def n(self) -> int:
        return self.grid.size


@dataclass
class BoundaryProfile:
    """Boundary triple (v0, v1, v2) on [0, T] with a fixed flux-velocity sign."""

    tgrid: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    T: float
    sign_case: str = OMEGA_NONPOSITIVE

    @property
    def omega0(self) -> np.ndarray:
        return self.v0**2 - self.v1**2 + 2.0 * self.v0

    @property
    def m_at_0(self) -> np.ndarray:
        return self.v0 - self.v2 + 1.0

    @property
    def n(self) -> int:
        return self.tgrid.size


def _read_csv(path_or_buf, header: str):
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ProfileError("empty input file")
    got = [c.strip() for c in lines[0].split(",")]
    want = header.split(",")
    if got != want:
        raise ProfileError(f"bad header {got!r}, expected {want!r}")
    ncol = len(want)
    rows = []
    for k, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != ncol:
            raise ProfileError(f"line {k}: expected {ncol} columns, got {len(cells)}")
        rows.append([float(c) if c else np.nan for c in cells])
    return np.asarray(rows, dtype=float)


def _check_strictly_increasing(x, name):
    if x.size < 4:
        raise ProfileError(f"{name} grid too short ({x.size} nodes)")
    if np.any(np.diff(x) <= 0):
        j = int(np.argmax(np.diff(x) <= 0))
        raise ProfileError(f"{name} grid not strictly increasing at node {j} ({x[j]})")


def second_derivative(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """4th-order second derivative on a uniform grid, one-sided at the ends."""
    h = x[1] - x[0]
    if np.max(np.abs(np.diff(x) - h)) > 1e-9 * h:
        # non-uniform fallback: spline curvature
        from scipy.interpolate import CubicSpline

        return CubicSpline(x, f)(x, 2)
    n = f.size
    d2 = np.empty(n)
    d2[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    # 4th-order one-sided stencils; an even derivative keeps the same
    # coefficients under mirroring
    c = np.array([45, -154, 214, -156, 61, -10]) / (12 * h * h)
    d2[0] = c @ f[:6]
    d2[1] = c @ f[1:7]
    d2[-1] = c @ f[:-7:-1]
    d2[-2] = c @ f[-2:-8:-1]
    return d2


def green_u_from_m(x: np.ndarray, m_minus_1: np.ndarray):
    """Decaying solution of (1 - d^2/dx^2) u = m - 1 on the grid.

    Exponential-kernel product integration with cubic interpolation of the
    data per panel; O(n), 4th order.  Returns (u, ux).
    """
    g = np.asarray(m_minus_1, dtype=float)
    n = g.size
    h = np.diff(x)
    iplus = np.zeros(n)   # int_x^X e^{x-y} g(y) dy
    iminus = np.zeros(n)  # int_0^x e^{y-x} g(y) dy
    w_far, w_near = _exp_panel_weights(h)
    # iminus carries the kernel peak at the upper panel end, iplus at the lower
    for j in range(n - 1):
        iminus[j + 1] = np.exp(-h[j]) * iminus[j] + w_far[j] * g[j] + w_near[j] * g[j + 1]
    for j in range(n - 2, -1, -1):
        iplus[j] = np.exp(-h[j]) * iplus[j + 1] + w_far[j] * g[j + 1] + w_near[j] * g[j]
    u2, ux2 = 0.5 * (iplus + iminus), 0.5 * (iplus - iminus)
    # one Richardson level on a doubled grid for 4th order
    xm = 0.5 * (x[:-1] + x[1:])
    from scipy.interpolate import CubicSpline

    gs = CubicSpline(x, g)
    xf = np.empty(2 * n - 1)
    xf[0::2] = x
    xf[1::2] = xm
    gf = gs(xf)
    hf = np.diff(xf)
    wff, wnf = _exp_panel_weights(hf)
    ipf = np.zeros(xf.size)
    imf = np.zeros(xf.size)
    for j in range(xf.size - 1):
        imf[j + 1] = np.exp(-hf[j]) * imf[j] + wff[j] * gf[j] + wnf[j] * gf[j + 1]
    for j in range(xf.size - 2, -1, -1):
        ipf[j] = np.exp(-hf[j]) * ipf[j + 1] + wff[j] * gf[j + 1] + wnf[j] * gf[j]
    u4 = 0.5 * (ipf + imf)[0::2]
    ux4 = 0.5 * (ipf - imf)[0::2]
    u = (4.0 * u4 - u2) / 3.0
    ux = (4.0 * ux4 - ux2) / 3.0
    return u, ux


def _exp_panel_weights(h: np.ndarray):
    """Per-panel weights for the exponential-kernel integral of a linear
    interpolant.

    With s measured from the kernel peak, the sample at the peak end gets
    w_near = (h - 1 + e^{-h})/h and the sample at the opposite end gets
    w_far = (1 - e^{-h}(1+h))/h.  Returns (w_far, w_near).
    """
    e = np.exp(-h)
    small = h < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        w_far = (1.0 - e * (1.0 + h)) / h
        w_near = (h - 1.0 + e) / h
    hs = h[small]
    w_far[small] = hs / 2 - hs**2 / 3
    w_near[small] = hs / 2 - hs**2 / 6
    return w_far, w_near


def load_initial(path, options: ValidationConfig | None = None) -> InitialProfile:
    """Load and validate an initial profile.

    If only u0 is given m0 is filled in by discrete second differences, and
    if only m0 is given u0 comes from the decaying-branch inversion.
    """
    cfg = options or ValidationConfig()
    data = _read_csv(path, "x,u0,m0")
    x = data[:, 0]
    _check_strictly_increasing(x, "x")
    u0, m0 = data[:, 1], data[:, 2]
    have_u = not np.all(np.isnan(u0))
    have_m = not np.all(np.isnan(m0))
    if not have_u and not have_m:
        raise ProfileError("need at least one of u0, m0")
    if have_u and np.any(np.isnan(u0)):
        raise ProfileError("u0 column partially filled")
    if have_m and np.any(np.isnan(m0)):
        raise ProfileError("m0 column partially filled")
    if not have_m:
        m0 = u0 - second_derivative(x, u0) + 1.0
    if not have_u:
        u0, _ = green_u_from_m(x, m0 - 1.0)
    bad = np.where(m0 <= cfg.positivity_margin)[0]
    if bad.size:
        j = int(bad[0])
        raise ProfileError(f"m0 must stay positive: node {j} (x={x[j]:g}) has m0={m0[j]:g}")
    if abs(u0[-1]) > cfg.decay_tol or abs(m0[-1] - 1.0) > cfg.decay_tol:
        raise ProfileError(
            f"profile not decayed at X_max={x[-1]:g}: |u0|={abs(u0[-1]):.3g}, "
            f"|m0-1|={abs(m0[-1] - 1.0):.3g} exceed decay_tol={cfg.decay_tol:g}"
        )
    if have_u and have_m:
        h = np.max(np.diff(x))
        resid = m0 - (u0 - second_derivative(x, u0) + 1.0)
        tol = max(100.0 * h * h * max(1.0, float(np.max(np.abs(u0)))), 1e-7)
        j = int(np.argmax(np.abs(resid)))
        if abs(resid[j]) > tol:
            raise ProfileError(
                f"m0 and u0 inconsistent at node {j} (x={x[j]:g}): residual "
                f"{resid[j]:.3g} exceeds {tol:.3g}"
            )
    return InitialProfile(grid=x, u0=np.asarray(u0), m0=np.asarray(m0),
                          x_max=float(x[-1]), decay_tol=cfg.decay_tol)


def load_boundary(path, options: ValidationConfig | None = None) -> BoundaryProfile:
    """Load and validate a boundary triple, detecting or checking the sign case."""
    cfg = options or ValidationConfig()
    data = _read_csv(path, "t,v0,v1,v2")
    t = data[:, 0]
    _check_strictly_increasing(t, "t")
    if np.any(np.isnan(data)):
        raise ProfileError("boundary table has missing entries")
    v0, v1, v2 = data[:, 1], data[:, 2], data[:, 3]
    mb = v0 - v2 + 1.0
    bad = np.where(mb <= cfg.positivity_margin)[0]
    if bad.size:
        j = int(bad[0])
        raise ProfileError(
            f"v0 - v2 + 1 must stay positive: node {j} (t={t[j]:g}) has {mb[j]:g}"
        )
    om = v0**2 - v1**2 + 2.0 * v0
    tolz = 1e-12 + 1e-9 * float(np.max(np.abs(om), initial=0.0))
    nonpos = np.all(om <= tolz)
    nonneg = np.all(om >= -tolz)
    if not (nonpos or nonneg):
        raise SignCaseError(
            "omega(0,t) = v0^2 - v1^2 + 2 v0 changes sign on [0,T]; split the "
            "interval into bands of fixed sign and run each band separately"
        )
    if cfg.sign_case == "auto":
        sign_case = OMEGA_NONPOSITIVE if nonpos else OMEGA_NONNEGATIVE
    else:
        want = OMEGA_NONPOSITIVE if cfg.sign_case == "nonpositive" else OMEGA_NONNEGATIVE
        ok = nonpos if want == OMEGA_NONPOSITIVE else nonneg
        if not ok:
            raise SignCaseError(f"declared sign case {cfg.sign_case!r} contradicts the data")
        sign_case = want
    # on any interval where omega vanishes the triple must be self-consistent
    zero = np.abs(om) <= tolz
    if np.count_nonzero(zero) >= 3:
        dt = np.gradient(t)
        d0 = np.gradient(v0, t)
        d2 = np.gradient(v2, t)
        cons = d0 - d2 + 2.0 * v1 * mb**2
        mask = zero.copy()
        # interior-only, gradient is low order at the ends
        mask[0] = mask[-1] = False
        if np.any(mask):
            worst = float(np.max(np.abs(cons[mask])))
            scale = max(1.0, float(np.max(np.abs(v0))), float(np.max(np.abs(v2))))
            if worst > 1e-3 * scale + 10.0 * float(np.max(dt)) ** 2:
                raise ProfileError(
                    "boundary triple inconsistent on the omega=0 set: "
                    f"|v0' - v2' + 2 v1 (v0-v2+1)^2| reaches {worst:.3g}"
                )
    return BoundaryProfile(tgrid=t, v0=v0, v1=v1, v2=v2, T=float(t[-1]),
                           sign_case=sign_case)


def _spline_quad(x: np.ndarray, f: np.ndarray):
    """Integral of the cubic-spline interpolant over the whole grid, plus the
    cumulative integral at the nodes."""
    from scipy.interpolate import CubicSpline

    sp = CubicSpline(x, f)
    anti = sp.antiderivative()
    cum = anti(x) - anti(x[0])
    return float(cum[-1]), cum


def nu0(p: InitialProfile):
    """Mass of m0 - 1 over [0, X_max] and a reported (not added) tail bound.

    The tail beyond X_max is estimated from an exponential fit to the last
    decade of |m0 - 1|.
    """
    total, _ = _spline_quad(p.grid, p.m0 - 1.0)
    tail = _exp_tail_bound(p.grid, p.m0 - 1.0)
    return total, tail


def _exp_tail_bound(x, g):
    absg = np.abs(g)
    mask = absg > 1e-300
    n = x.size
    sel = np.arange(max(0, n - max(8, n // 10)), n)
    sel = sel[mask[sel]]
    if sel.size < 3 or absg[sel[-1]] == 0.0:
        return 0.0
    # fit log|g| ~ c - kappa x on the tail window
    A = np.vstack([np.ones(sel.size), -x[sel]]).T
    coef, *_ = np.linalg.lstsq(A, np.log(absg[sel]), rcond=None)
    c, kappa = coef
    if kappa <= 0:
        return float(absg[sel[-1]] * (x[-1] - x[0]))  # no decay detected; crude bound
    return float(np.exp(c - kappa * x[-1]) / kappa)


def eta(b: BoundaryProfile, t: float) -> float:
    """Accumulated boundary flux eta(t) = -int_0^t (m omega)(0, tau) dtau."""
    if t < b.tgrid[0] - 1e-12 or t > b.T + 1e-12:
        raise ProfileError(f"t={t:g} outside [0, {b.T:g}]")
    integrand = -(b.v0 - b.v2 + 1.0) * (b.v0**2 - b.v1**2 + 2.0 * b.v0)
    from scipy.interpolate import CubicSpline

    sp = CubicSpline(b.tgrid, integrand)
    anti = sp.antiderivative()
    return float(anti(t) - anti(b.tgrid[0]))


def eta_cumulative(b: BoundaryProfile) -> np.ndarray:
    """eta at every tgrid node (shared quadrature with eta())."""
    integrand = -(b.v0 - b.v2 + 1.0) * (b.v0**2 - b.v1**2 + 2.0 * b.v0)
    _, cum = _spline_quad(b.tgrid, integrand)
    return cum


def flux_cumulative(b: BoundaryProfile) -> np.ndarray:
    """Cumulative int_0^t (m omega)(0, s) ds on tgrid (equals -eta)."""
    return -eta_cumulative(b)


def save_initial(path, p: InitialProfile):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,u0,m0\n")
        for x, u, m in zip(p.grid, p.u0, p.m0):
            fh.write(f"{x!r},{u!r},{m!r}\n")


def save_boundary(path, b: BoundaryProfile):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,v0,v1,v2\n")
        for t, a, c, d in zip(b.tgrid, b.v0, b.v1, b.v2):
            fh.write(f"{t!r},{a!r},{c!r},{d!r}\n")


def initial_from_arrays(x, m0=None, u0=None, decay_tol=1e-8) -> InitialProfile:
    """Build a profile in memory through the same validation as load_initial."""
    buf = io.StringIO()
    buf.write("x,u0,m0\n")
    n = np.asarray(x).size
    uc = ["" for _ in range(n)] if u0 is None else [repr(float(v)) for v in u0]
    mc = ["" for _ in range(n)] if m0 is None else [repr(float(v)) for v in m0]
    for j in range(n):
        buf.write(f"{float(np.asarray(x)[j])!r},{uc[j]},{mc[j]}\n")
    buf.seek(0)
    return load_initial(buf, ValidationConfig(decay_tol=decay_tol))


def boundary_from_arrays(t, v0, v1, v2, sign_case="auto") -> BoundaryProfile:
    buf = io.StringIO()
    buf.write("t,v0,v1,v2\n")
    for row in zip(np.asarray(t), np.asarray(v0), np.asarray(v1), np.asarray(v2)):
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    buf.seek(0)
    return load_boundary(buf, ValidationConfig(sign_case=sign_case))
