"""Generic solver for 2x2 matrix factorization problems on oriented contours.

The unknown is the weighted additive density v together with two rational
coefficients:

    M(z) = I + (1/2 pi i) int v(s) (s^2 + 1) / ((s^2 - 1)(s - z)) ds
             + S_plus/(z - 1) + S_minus/(z + 1),

i.e. the plain density is w = v (s^2+1)/(s^2-1): the zeros of the weight at
+-1 carry the simple poles of the solution class, while the (s^2+1)-factor
keeps v decaying like w at infinity so the logarithmic ray panels resolve
the tails of the contour.

The weight and the rational terms carry the simple poles the solutions
develop at +-1 (contours may pass straight through those points, where the
limits from the two sides have different residue structures).  Partial
fractions reduce every evaluation to the standard Cauchy matrix plus two
fixed principal-value rows K(+-1):

    C w (z) = a1(z) K1 v + a2(z) Km1 v + a3(z) C v (z),
    a1 = 1/(1-z),  a2 = 1/(1+z),  a3 = (z^2+1)/(z^2-1).

With V = J - I and the weight omega = (s^2-1)/(s^2+1), the boundary
relation M_minus = M_plus J becomes, after multiplying by omega, the
second-kind system

    v_i + [v_i/2 + C_pv v - (s_i+1)/(s_i^2+1) K1 v
           + (s_i-1)/(s_i^2+1) Km1 v] V_i
        + [(s_i+1) S_plus + (s_i-1) S_minus] V_i / (s_i^2+1) = -omega_i V_i,

closed by structural conditions: the one-sided residues at +-1, namely
rho(+1, upper/lower) = +- v(1)/2 + S_plus and rho(-1, upper/lower) =
-+ v(-1)/2 + S_minus, must follow the rank-one patterns of the solution
class.  Plemelj convention: "+" is the left of the orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .cauchy import CauchyOperator
from .contour import Contour, arc


class RHSolveError(RuntimeError):
    pass


class SymmetryBreachError(RHSolveError):
    """Structural zero pattern at mu = i violated; jump data inconsistent."""


@dataclass
class PoleCondition:
    """Residue coupling at a simple pole off the contour.

    column "first": Res_{loc} M^(1) = weight * M^(2)(loc);
    column "second": Res_{loc} M^(2) = weight * M^(1)(loc).
    """

    location: complex
    column: str
    weight: complex


@dataclass
class RHProblem:
    contour: Contour
    jump: np.ndarray                      # (N, 2, 2)
    poles: list = field(default_factory=list)
    structural: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    _cauchy: CauchyOperator = field(default=None, repr=False)

    @property
    def cauchy(self) -> CauchyOperator:
        if self._cauchy is None:
            self._cauchy = CauchyOperator(self.contour)
        return self._cauchy

    def with_jump(self, jump: np.ndarray) -> "RHProblem":
        """Same contour and caches, different jump (parameter sweeps)."""
        return RHProblem(contour=self.contour, jump=jump, poles=list(self.poles),
                         structural=dict(self.structural), meta=dict(self.meta),
                         _cauchy=self._cauchy)


@dataclass
class RHSolution:
    problem: RHProblem
    density: np.ndarray                   # (N, 2, 2) weighted density v
    s_plus: np.ndarray                    # (2, 2) rational residue at +1
    s_minus: np.ndarray
    boundary_plus: np.ndarray
    boundary_minus: np.ndarray
    expansion_inf: np.ndarray             # M = I - expansion_inf/mu + O(mu^-2)
    condition_estimate: float
    jump_residual: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, z, power: int = 1):
        return evaluate_offcontour(self, z, power=power, guard=False)


def fold_poles_into_circles(problem: RHProblem, radius: float = 0.1,
                            n_nodes: int = 48) -> RHProblem:
    """Replace residue conditions by rational jumps on small circles.

    Circles are oriented clockwise so the "+" side is the exterior; outside
    them the new solution equals the original one.
    """
    if not problem.poles:
        return problem
    locs = [p.location for p in problem.poles]
    for j, lj in enumerate(locs):
        d_contour = np.min(np.abs(problem.contour.nodes - lj))
        if d_contour <= radius:
            raise RHSolveError(
                f"pole circle at {lj} (radius {radius:g}) collides with the contour"
            )
        for k in range(j + 1, len(locs)):
            if abs(lj - locs[k]) <= 2 * radius:
                raise RHSolveError(
                    f"pole circles at {lj} and {locs[k]} collide (radius {radius:g})"
                )
    from .contour import Component

    comps = list(problem.contour.components)
    jumps = [problem.jump]
    for p in problem.poles:
        panels = [arc(p.location, radius, np.pi - 2 * np.pi * k / 4,
                      np.pi - 2 * np.pi * (k + 1) / 4, n=max(6, n_nodes // 4))
                  for k in range(4)]
        comps.append(Component(label=f"pole_circle_{p.location:.6g}", panels=panels,
                               closed=True))
        nodes = np.concatenate([q.nodes for q in panels])
        jp = np.broadcast_to(np.eye(2, dtype=complex), (nodes.size, 2, 2)).copy()
        if p.column == "first":
            jp[:, 1, 0] = -p.weight / (nodes - p.location)
        else:
            jp[:, 0, 1] = -p.weight / (nodes - p.location)
        jumps.append(jp)
    new_contour = Contour(components=comps,
                          symmetry_tags=problem.contour.symmetry_tags)
    return RHProblem(contour=new_contour, jump=np.concatenate(jumps, axis=0),
                     poles=[], structural=dict(problem.structural),
                     meta=dict(problem.meta))


def _scalar_rows(problem: RHProblem) -> np.ndarray:
    """The Cauchy transform of v/(s^2-1) at the collocation nodes as an
    N x N matrix acting on v (partial fractions)."""
    c = problem.cauchy
    s = problem.contour.nodes
    k1 = c.corner_row(1.0)
    km1 = c.corner_row(-1.0)
    a1 = 1.0 / (1.0 - s)
    a2 = 1.0 / (1.0 + s)
    a3 = (s * s + 1.0) / (s * s - 1.0)
    return (a1[:, None] * k1[None, :] + a2[:, None] * km1[None, :]
            + a3[:, None] * c.pv_matrix)


def _system_matrix(problem: RHProblem) -> np.ndarray:
    """Collocation block: acts on the stacked density of one row-problem."""
    c = problem.cauchy
    s = problem.contour.nodes
    n = problem.contour.n_nodes
    k1 = c.corner_row(1.0)
    km1 = c.corner_row(-1.0)
    w1 = -(s + 1.0) / (s * s + 1.0)
    w2 = (s - 1.0) / (s * s + 1.0)
    coef = (c.pv_matrix + w1[:, None] * k1[None, :] + w2[:, None] * km1[None, :]
            + 0.5 * np.eye(n))
    v_t = problem.jump.transpose(0, 2, 1) - np.eye(2)[None]
    blocks = coef[:, :, None, None] * v_t[:, None, :, :]
    a = blocks.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)
    a[np.arange(2 * n), np.arange(2 * n)] += 1.0
    return a


def _rational_columns(problem: RHProblem) -> np.ndarray:
    """Columns through which the +-1 residue matrices enter the collocation
    equations: (s_i + 1) V_i^T for S_plus and (s_i - 1) V_i^T for S_minus."""
    s = problem.contour.nodes
    n = problem.contour.n_nodes
    v_t = problem.jump.transpose(0, 2, 1) - np.eye(2)[None]
    cols = np.zeros((2 * n, 4), dtype=complex)
    d2 = s * s + 1.0
    for b in range(2):
        cols[:, b] = (((s + 1.0) / d2)[:, None] * v_t[:, :, b]).reshape(-1)
        cols[:, 2 + b] = (((s - 1.0) / d2)[:, None] * v_t[:, :, b]).reshape(-1)
    return cols


def _rhs(problem: RHProblem) -> np.ndarray:
    s = problem.contour.nodes
    fac = -(s * s - 1.0) / (s * s + 1.0)
    v_t = problem.jump.transpose(0, 2, 1) - np.eye(2)[None]
    n = problem.contour.n_nodes
    rhs = np.zeros((2 * n, 2), dtype=complex)
    rhs[:, 0] = (fac[:, None] * v_t[:, :, 0]).reshape(-1)
    rhs[:, 1] = (fac[:, None] * v_t[:, :, 1]).reshape(-1)
    return rhs


def _corner_matrix(row_weights: np.ndarray, vflat: np.ndarray, n: int) -> np.ndarray:
    """2x2 corner-value matrix of the density from stacked row solutions."""
    out = np.empty((2, 2), dtype=complex)
    for r in range(2):
        vr = vflat[:, r].reshape(n, 2)
        out[r] = row_weights @ vr
    return out


def _structural_conditions(problem: RHProblem):
    """Rows of the joint least-squares system pinning the +-1 residues.

    Unknowns: [s_plus_row0 (2), s_minus_row0 (2), s_plus_row1 (2),
    s_minus_row1 (2)].  The residues rho_upper = V/4 + S, rho_lower =
    -V/4 + S (V the corner-value matrix of the density) must be scalar
    multiples of the prescribed rank-one patterns; at +1 the two rows are
    equal, at -1 opposite.
    """
    cpl = complex(problem.structural.get("c_plus", problem.structural.get("c", 0.0)))
    cmi = complex(problem.structural.get("c_minus", problem.structural.get("c", 0.0)))
    conds = []
    # each condition: (point, side, row_index or pair, functional)
    # functionals annihilating the allowed direction:
    f_up_p = np.array([1.0, cpl])          # rows of rho_U(+1) ~ (-c, 1)
    f_lo_p = np.array([cpl, 1.0])          # rows of rho_L(+1) ~ (1, -c)
    f_up_m = np.array([1.0, -cmi])         # rows of rho_U(-1) ~ (c, 1)
    f_lo_m = np.array([cmi, -1.0])         # rows of rho_L(-1) ~ -+(1, c)
    amount_p = np.array([-np.conj(cpl), 1.0]) / (1.0 + abs(cpl) ** 2)
    amount_m = np.array([np.conj(cmi), 1.0]) / (1.0 + abs(cmi) ** 2)
    return f_up_p, f_lo_p, f_up_m, f_lo_m, amount_p, amount_m


def solve_core(problem: RHProblem, inner_solve, seed: int = 0):
    """Bordered solve: eliminate the density with inner_solve, then fix the
    eight residue unknowns by the joint structural least squares."""
    n = problem.contour.n_nodes
    rhs = _rhs(problem)
    bcols = _rational_columns(problem)
    u = inner_solve(np.concatenate([rhs, bcols], axis=1))
    u_r, w_cols = u[:, :2], u[:, 2:]
    c = problem.cauchy
    e_p = c.corner_value_row(1.0)
    e_m = c.corner_value_row(-1.0)

    def corner_rows(weight_row, mat):
        # value-rows of the 2N x k matrix "mat" seen as densities
        out = np.empty((2, mat.shape[1]), dtype=complex)
        out[0] = weight_row @ mat[0::2]
        out[1] = weight_row @ mat[1::2]
        return out

    ep_u = corner_rows(e_p, u_r)      # (2 components, 2 row-problems)
    em_u = corner_rows(e_m, u_r)
    ep_w = corner_rows(e_p, w_cols)   # (2, 4)
    em_w = corner_rows(e_m, w_cols)

    f_up_p, f_lo_p, f_up_m, f_lo_m, amount_p, amount_m = _structural_conditions(problem)

    # unknown layout: S = [sp0(2), sm0(2), sp1(2), sm1(2)]
    def rho_rows(point, side):
        """Affine map S -> residue row (per row-problem r): returns
        (const[r, comp], lin[r, comp, 8])."""
        # weight (s^2+1)/(s^2-1): near +1 the density pole is +v(1)/(s-1),
        # near -1 it is -v(-1)/(s+1), so the couplings flip sign at -1
        sgn = (0.5 if side == "up" else -0.5) * (1.0 if point > 0 else -1.0)
        e_const = ep_u if point > 0 else em_u
        e_lin = ep_w if point > 0 else em_w
        const = np.empty((2, 2), dtype=complex)
        lin = np.zeros((2, 2, 8), dtype=complex)
        off = 0 if point > 0 else 2
        for r in range(2):
            for comp in range(2):
                const[r, comp] = sgn * e_const[comp, r]
                # the density depends on S through x_r = u_r - W s_r
                lin[r, comp, 4 * r:4 * r + 4] = -sgn * e_lin[comp, :]
                lin[r, comp, 4 * r + off + comp] += 1.0
        return const, lin

    rows = []
    rhs_c = []

    def add(functional, const, lin, r):
        rows.append(functional[0] * lin[r, 0] + functional[1] * lin[r, 1])
        rhs_c.append(-(functional[0] * const[r, 0] + functional[1] * const[r, 1]))

    cu_p, lu_p = rho_rows(+1, "up")
    cl_p, ll_p = rho_rows(+1, "lo")
    cu_m, lu_m = rho_rows(-1, "up")
    cl_m, ll_m = rho_rows(-1, "lo")
    for r in range(2):
        add(f_up_p, cu_p, lu_p, r)
        add(f_lo_p, cl_p, ll_p, r)
        add(f_up_m, cu_m, lu_m, r)
        add(f_lo_m, cl_m, ll_m, r)
    # row ties: amounts equal at +1, opposite at -1, for both one-sided limits
    for const, lin, point in ((cu_p, lu_p, +1), (cl_p, ll_p, +1),
                              (cu_m, lu_m, -1), (cl_m, ll_m, -1)):
        amount = amount_p if point > 0 else amount_m
        sgn = 1.0 if point > 0 else -1.0
        row = (amount[0] * (lin[0, 0] - sgn * lin[1, 0])
               + amount[1] * (lin[0, 1] - sgn * lin[1, 1]))
        rows.append(row)
        rhs_c.append(-(amount[0] * (const[0, 0] - sgn * const[1, 0])
                       + amount[1] * (const[0, 1] - sgn * const[1, 1])))
    # cross-side ties: the one-sided residues share a single coefficient,
    # rho_U[r][1] + rho_L[r][0] = 0 at +1 and rho'_U[r][1] - rho'_L[r][0] = 0
    # at -1 (component extraction valid for any structural c)
    for r in range(2):
        rows.append(lu_p[r, 1] + ll_p[r, 0])
        rhs_c.append(-(cu_p[r, 1] + cl_p[r, 0]))
        rows.append(lu_m[r, 1] - ll_m[r, 0])
        rhs_c.append(-(cu_m[r, 1] - cl_m[r, 0]))
    # value extraction at arbitrary z as an affine map of the 8 unknowns:
    # M(z)[r, comp] = I + e_const[r, comp] + e_lin[r, comp] . S
    k1row = c.corner_row(1.0)
    km1row = c.corner_row(-1.0)

    def eval_affine(z0):
        ev = c.eval_weights(z0)
        a1z = 1.0 / (1.0 - z0)
        a2z = 1.0 / (1.0 + z0)
        a3z = (z0 * z0 + 1.0) / (z0 * z0 - 1.0)
        full_row = a1z * k1row + a2z * km1row + a3z * ev
        mu_u = np.empty((2, 2), dtype=complex)
        mu_w = np.empty((2, 4), dtype=complex)
        mu_u[0] = full_row @ u_r[0::2]
        mu_u[1] = full_row @ u_r[1::2]
        mu_w[0] = full_row @ w_cols[0::2]
        mu_w[1] = full_row @ w_cols[1::2]
        rp = 1.0 / (z0 - 1.0)
        rm = 1.0 / (z0 + 1.0)
        e_const = np.empty((2, 2), dtype=complex)
        e_lin = np.zeros((2, 2, 8), dtype=complex)
        for r in range(2):
            for comp in range(2):
                e_const[r, comp] = mu_u[comp, r]
                e_lin[r, comp, 4 * r:4 * r + 4] = -mu_w[comp]
                e_lin[r, comp, 4 * r + comp] += rp
                e_lin[r, comp, 4 * r + 2 + comp] += rm
        return e_const, e_lin

    eye = np.eye(2)

    # the solution class is diagonal at mu = +-i
    if problem.structural.get("diag_at_i", False):
        for z0 in (1j, -1j):
            e_const, e_lin = eval_affine(z0)
            for r in range(2):
                comp = 1 - r
                rows.append(e_lin[r, comp])
                rhs_c.append(-e_const[r, comp])

    # symmetry of the class under mu -> 1/mu and mu -> -mu, imposed at probe
    # pairs; these couple the two row-problems and pin the gauge freedom the
    # truncated contour would otherwise admit
    if problem.structural.get("symmetry_probes", False):
        nodes = problem.contour.nodes
        spacing_ok = (lambda z: np.min(np.abs(nodes - z))
                      > 1.5 * problem.contour.min_spacing_at(z))
        for z0 in (0.55j, 1.7j, 0.9 + 0.9j):
            zr = 1.0 / z0
            if spacing_ok(z0) and spacing_ok(zr):
                ec1, el1 = eval_affine(zr)
                ec2, el2 = eval_affine(z0)
                for r in range(2):
                    for comp in range(2):
                        rows.append(el1[r, comp] - el2[1 - r, 1 - comp])
                        rhs_c.append(-(eye[r, comp] + ec1[r, comp])
                                     + (eye[1 - r, 1 - comp] + ec2[1 - r, 1 - comp]))
        for z0 in (0.75j, 1.3 + 1.1j):
            zn = -z0
            if spacing_ok(z0) and spacing_ok(zn):
                ec1, el1 = eval_affine(zn)
                ec2, el2 = eval_affine(z0)
                for r in range(2):
                    for comp in range(2):
                        sgn = 1.0 if r == comp else -1.0
                        rows.append(el1[r, comp] - sgn * el2[1 - r, 1 - comp])
                        rhs_c.append(-(eye[r, comp] + ec1[r, comp])
                                     + sgn * (eye[1 - r, 1 - comp] + ec2[1 - r, 1 - comp]))
    cond_mat = np.vstack(rows)
    cond_rhs = np.asarray(rhs_c)
    svec, res_lsq, rank, _ = np.linalg.lstsq(cond_mat, cond_rhs, rcond=None)
    structural_residual = float(np.linalg.norm(cond_mat @ svec - cond_rhs))

    def assemble(sv):
        x = np.empty_like(u_r)
        for r in range(2):
            x[:, r] = u_r[:, r] - w_cols @ sv[4 * r:4 * r + 4]
        v = np.empty((n, 2, 2), dtype=complex)
        v[:, 0, :] = x[:, 0].reshape(n, 2)
        v[:, 1, :] = x[:, 1].reshape(n, 2)
        s_plus = np.vstack([sv[0:2], sv[4:6]])
        s_minus = np.vstack([sv[2:4], sv[6:8]])
        return v, s_plus, s_minus

    v, s_plus, s_minus = assemble(svec)

    # The linearized problem keeps gauge freedom at the +-1 poles (killed
    # analytically only by det M = 1, which is quadratic in the solution).
    # Pin the null directions of the condition matrix by fitting the
    # determinant at off-contour probes.
    _, sv_cond, vh = np.linalg.svd(cond_mat)
    null_idx = np.where(sv_cond < 1e-6 * max(sv_cond[0], 1.0))[0]
    modes = []
    for k in null_idx:
        mode_s = vh[k].conj()
        xm = np.empty_like(u_r[:, :1])
        v_mode = np.empty((n, 2, 2), dtype=complex)
        for r in range(2):
            col = -w_cols @ mode_s[4 * r:4 * r + 4]
            v_mode[:, r, :] = col.reshape(n, 2)
        sp_mode = np.vstack([mode_s[0:2], mode_s[4:6]])
        sm_mode = np.vstack([mode_s[2:4], mode_s[6:8]])
        modes.append((v_mode, sp_mode, sm_mode))
    if modes:
        taus = _fit_gauge_modes(problem, (v, s_plus, s_minus), modes)
        for tau, (v_mode, sp_mode, sm_mode) in zip(taus, modes):
            v = v - tau * v_mode
            s_plus = s_plus - tau * sp_mode
            s_minus = s_minus - tau * sm_mode
    return v, s_plus, s_minus, structural_residual


def _raw_eval(problem: RHProblem, triple, z: complex) -> np.ndarray:
    """M(z) - I for a raw (density, S+, S-) triple."""
    v, sp, sm = triple
    c = problem.cauchy
    k1 = np.einsum("j,jab->ab", c.corner_row(1.0), v)
    km1 = np.einsum("j,jab->ab", c.corner_row(-1.0), v)
    cv = np.einsum("j,jab->ab", c.eval_weights(z), v)
    a1 = 1.0 / (1.0 - z)
    a2 = 1.0 / (1.0 + z)
    a3 = (z * z + 1.0) / (z * z - 1.0)
    return a1 * k1 + a2 * km1 + a3 * cv + sp / (z - 1.0) + sm / (z + 1.0)


def _fit_gauge_modes(problem: RHProblem, sol_triple, modes) -> np.ndarray:
    """Amounts of the gauge modes pinned by det M = 1 together with the
    Schwarz symmetry M(conj z) = sigma1 conj(M(z)) sigma1 at probe points.

    The determinant is quadratic and the symmetry anti-linear, so the fit
    runs as a real Gauss-Newton over (Re tau, Im tau)."""
    nodes = problem.contour.nodes
    scale = max(2.5, float(np.median(np.abs(nodes))))
    cands = np.array([0.45 + 0.55j, -0.45 + 0.55j, 1.8 + 1.4j, -1.8 + 1.4j,
                      0.35 + 1.1j, -0.35 + 1.1j, 0.6j * scale, 0.9 + 0.35j])
    ok = (lambda z: np.min(np.abs(nodes - z)) > 2.0 * problem.contour.min_spacing_at(z)
          and min(abs(z - 1), abs(z + 1)) > 0.2)
    probes = [z for z in cands if ok(z) and ok(np.conj(z))]
    m = len(modes)
    if not probes or m == 0:
        return np.zeros(m, dtype=complex)
    s1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    mc_u = np.array([np.eye(2) + _raw_eval(problem, sol_triple, z) for z in probes])
    mc_l = np.array([np.eye(2) + _raw_eval(problem, sol_triple, np.conj(z))
                     for z in probes])
    hs_u = np.array([[_raw_eval(problem, mode, z) for z in probes] for mode in modes])
    hs_l = np.array([[_raw_eval(problem, mode, np.conj(z)) for z in probes]
                     for mode in modes])
    use_sym = problem.structural.get("schwarz", True)

    def residuals(tr):
        taus = tr[:m] + 1j * tr[m:]
        mm_u = mc_u - np.einsum("m,mkab->kab", taus, hs_u)
        mm_l = mc_l - np.einsum("m,mkab->kab", taus, hs_l)
        det = mm_u[:, 0, 0] * mm_u[:, 1, 1] - mm_u[:, 0, 1] * mm_u[:, 1, 0] - 1.0
        out = [det.real, det.imag]
        if use_sym:
            sym = mm_l - s1[None] @ np.conj(mm_u) @ s1[None]
            out += [sym.reshape(-1).real, sym.reshape(-1).imag]
        return np.concatenate(out)

    tr = np.zeros(2 * m)
    f0 = residuals(tr)
    for _ in range(60):
        # analytic Jacobian of the residual stack
        taus = tr[:m] + 1j * tr[m:]
        mm_u = mc_u - np.einsum("m,mkab->kab", taus, hs_u)
        adj = np.empty_like(mm_u)
        adj[:, 0, 0] = mm_u[:, 1, 1]
        adj[:, 1, 1] = mm_u[:, 0, 0]
        adj[:, 0, 1] = -mm_u[:, 0, 1]
        adj[:, 1, 0] = -mm_u[:, 1, 0]
        ddet_d = -np.einsum("kab,mkba->km", adj, hs_u)    # d(det)/d tau_m
        cols = []
        for mi in range(m):
            dre = [ddet_d[:, mi].real, ddet_d[:, mi].imag]
            dim = [(1j * ddet_d[:, mi]).real, (1j * ddet_d[:, mi]).imag]
            if use_sym:
                dsym_re = (-hs_l[mi] + s1[None] @ np.conj(hs_u[mi]) @ s1[None]).reshape(-1)
                dsym_im = (-1j * hs_l[mi] - s1[None] @ np.conj(1j * hs_u[mi]) @ s1[None]).reshape(-1)
                dre += [dsym_re.real, dsym_re.imag]
                dim += [dsym_im.real, dsym_im.imag]
            cols.append(np.concatenate(dre))
            cols.append(np.concatenate(dim))
        jac = np.column_stack([cols[2 * k] for k in range(m)]
                              + [cols[2 * k + 1] for k in range(m)])
        f = residuals(tr)
        upd, *_ = np.linalg.lstsq(jac, -f, rcond=None)
        tr = tr + upd
        if np.max(np.abs(upd)) < 1e-14 * (1.0 + np.max(np.abs(tr))):
            break
    return tr[:m] + 1j * tr[m:]


def _finish(problem: RHProblem, v: np.ndarray, s_plus: np.ndarray,
            s_minus: np.ndarray, cond: float, method: str,
            diagnostics: dict) -> RHSolution:
    s = problem.contour.nodes
    cw = np.einsum("ij,jab->iab", _scalar_rows(problem), v)
    rat = (s_plus[None] / (s - 1.0)[:, None, None]
           + s_minus[None] / (s + 1.0)[:, None, None])
    w = v * ((s * s + 1.0) / (s * s - 1.0))[:, None, None]
    m_plus = np.eye(2)[None] + cw + rat + 0.5 * w
    m_minus = np.eye(2)[None] + cw + rat - 0.5 * w
    resid = float(np.max(np.abs(m_minus - m_plus @ problem.jump)))
    c = problem.cauchy
    mom = (np.einsum("j,jab->ab", c.corner_row(1.0) - c.corner_row(-1.0), v)
           + np.einsum("j,jab->ab", c.moment_weights(), v))
    return RHSolution(problem=problem, density=v, s_plus=s_plus, s_minus=s_minus,
                      boundary_plus=m_plus, boundary_minus=m_minus,
                      expansion_inf=mom - s_plus - s_minus,
                      condition_estimate=cond, jump_residual=resid,
                      method=method, diagnostics=diagnostics)


def _condition_estimate(lu_piv, a_norm: float, dim: int, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    est = 0.0
    for _ in range(4):
        x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        x /= np.linalg.norm(x)
        est = max(est, float(np.linalg.norm(sla.lu_solve(lu_piv, x))))
    return est * a_norm


def solve_rh(problem: RHProblem, method: str = "dense", tol: float = 1e-12,
             maxiter: int = 400, seed: int = 0) -> RHSolution:
    """Solve the factorization problem.

    method "dense": LU on the collocation block, bordered by the joint
    structural least squares for the +-1 residues.
    method "neumann": small-norm fixed point for the weighted density
    (accepted only when the corner values vanish, i.e. the solution carries
    no +-1 residue); otherwise matrix-free GMRES replaces the LU inside the
    bordered solve, and if GMRES stalls the dense path takes over.
    """
    if problem.poles:
        problem = fold_poles_into_circles(problem)
    n = problem.contour.n_nodes
    if n == 0:
        raise RHSolveError("empty contour")
    if np.max(np.abs(np.linalg.det(problem.jump) - 1.0)) > 1e-7:
        raise RHSolveError("jump is not unimodular; refuse to solve")

    if method == "dense":
        a = _system_matrix(problem)
        lu = sla.lu_factor(a)
        cond = _condition_estimate(lu, float(np.linalg.norm(a, 1)), 2 * n, seed)
        v, sp, sm, struct_res = solve_core(problem,
                                           lambda b: sla.lu_solve(lu, b))
        return _finish(problem, v, sp, sm, cond, "dense",
                       {"nodes": problem.contour.node_counts(),
                        "structural_residual": struct_res})

    if method != "neumann":
        raise ValueError(f"unknown method {method!r}")

    vj = problem.jump - np.eye(2)[None]
    nds = problem.contour.nodes
    s2 = ((nds ** 2 - 1.0) / (nds ** 2 + 1.0))[:, None, None]
    rows = _scalar_rows(problem)
    halfw = 0.5 * (nds ** 2 + 1.0) / (nds ** 2 - 1.0)
    c = problem.cauchy
    e_p = c.corner_value_row(1.0)
    e_m = c.corner_value_row(-1.0)

    rhs_mat = -s2 * vj
    v = rhs_mat.copy()
    delta = v.copy()
    contraction = 0.0
    converged = False
    nd_prev = float(np.max(np.abs(delta))) + 1e-300
    for it in range(maxiter):
        cw = np.einsum("ij,jab->iab", rows, delta) + halfw[:, None, None] * delta
        delta = -s2 * (cw @ vj)
        nd = float(np.max(np.abs(delta)))
        contraction = nd / nd_prev
        nd_prev = nd + 1e-300
        v = v + delta
        if nd < tol * max(1.0, float(np.max(np.abs(v)))):
            converged = True
            break
        if it >= 4 and contraction > 0.9:
            break
    if converged:
        # the plain fixed point lives in the residue-free class; accept only
        # if the corner values vanish (otherwise the structure matters)
        corner = max(float(np.abs(np.einsum("j,jab->ab", e_p, v)).max()),
                     float(np.abs(np.einsum("j,jab->ab", e_m, v)).max()))
        if corner < 1e3 * tol * max(1.0, float(np.max(np.abs(v)))):
            zero = np.zeros((2, 2), dtype=complex)
            return _finish(problem, v, zero, zero, float("nan"), "neumann",
                           {"iterations": it + 1, "contraction": contraction,
                            "nodes": problem.contour.node_counts()})

    from scipy.sparse.linalg import LinearOperator, gmres

    a = _system_matrix(problem)
    op = LinearOperator((2 * n, 2 * n), matvec=lambda x: a @ x, dtype=complex)
    gm_info = []

    def gmres_solve(bmat):
        out = np.empty_like(bmat)
        for k in range(bmat.shape[1]):
            xr, info = gmres(op, bmat[:, k], rtol=tol, atol=0.0,
                             maxiter=maxiter, restart=300)
            gm_info.append(int(info))
            if info != 0:
                raise RHSolveError("gmres stalled")
            out[:, k] = xr
        return out

    try:
        v, sp, sm, struct_res = solve_core(problem, gmres_solve)
        return _finish(problem, v, sp, sm, float("nan"), "neumann-gmres",
                       {"gmres_info": gm_info, "contraction": contraction,
                        "nodes": problem.contour.node_counts(),
                        "structural_residual": struct_res})
    except RHSolveError:
        out = solve_rh(problem, method="dense", tol=tol, seed=seed)
        out.diagnostics["failover"] = "dense"
        return out


def evaluate_offcontour(sol: RHSolution, z, power: int = 1, guard: bool = True):
    """M(z) for power=1, M'(z) for power=2."""
    ct = sol.problem.contour
    z = complex(z)
    if guard:
        dmin = float(np.min(np.abs(ct.nodes - z)))
        if dmin < ct.min_spacing_at(z):
            raise RHSolveError(
                f"evaluation point {z} closer to the contour ({dmin:.3g}) than the "
                "local node spacing; use the stored boundary values instead"
            )
    if min(abs(z - 1.0), abs(z + 1.0)) < 1e-6:
        raise RHSolveError("evaluation at the weight points +-1 is excluded")
    c = sol.problem.cauchy
    k1 = np.einsum("j,jab->ab", c.corner_row(1.0), sol.density)
    km1 = np.einsum("j,jab->ab", c.corner_row(-1.0), sol.density)
    cv = np.einsum("j,jab->ab", c.eval_weights(z, power=1), sol.density)
    a1 = 1.0 / (1.0 - z)
    a2 = 1.0 / (1.0 + z)
    a3 = (z * z + 1.0) / (z * z - 1.0)
    if power == 1:
        return (np.eye(2) + a1 * k1 + a2 * km1 + a3 * cv
                + sol.s_plus / (z - 1.0) + sol.s_minus / (z + 1.0))
    cvp = np.einsum("j,jab->ab", c.eval_weights(z, power=2), sol.density)
    da1 = 1.0 / (1.0 - z) ** 2
    da2 = -1.0 / (1.0 + z) ** 2
    da3 = -4.0 * z / (z * z - 1.0) ** 2
    return (da1 * k1 + da2 * km1 + da3 * cv + a3 * cvp
            - sol.s_plus / (z - 1.0) ** 2 - sol.s_minus / (z + 1.0) ** 2)


def expand_at_infinity(sol: RHSolution) -> np.ndarray:
    """First large-mu coefficient E in M = I - E/mu + O(mu^-2)."""
    return sol.expansion_inf


def expand_at_i(sol: RHSolution, pattern_tol: float = 1e-7):
    """Diagonal value and first off-diagonal derivative at mu = i.

    Returns (a1, a2, a3) with M(i) = diag(a1, 1/a1) and
    M'(i) = [[*, a2], [a3, *]]; raises SymmetryBreachError if the structural
    zero pattern fails beyond pattern_tol (relative).
    """
    m_i = evaluate_offcontour(sol, 1j, guard=False)
    m_d = evaluate_offcontour(sol, 1j, power=2, guard=False)
    scale = max(1.0, float(np.abs(m_i).max()))
    offdiag = max(abs(m_i[0, 1]), abs(m_i[1, 0]))
    if offdiag > pattern_tol * scale:
        raise SymmetryBreachError(
            f"off-diagonal entries at mu=i are {offdiag:.3g}; the jump data do not "
            "respect the required symmetry pattern"
        )
    detdev = abs(m_i[0, 0] * m_i[1, 1] - 1.0)
    if detdev > 100 * pattern_tol * scale:
        raise SymmetryBreachError(f"diagonal at mu=i not unimodular: {detdev:.3g}")
    a1 = m_i[0, 0]
    return a1, m_d[0, 1], m_d[1, 0]
