"""Assemble the three factorization problems from scattering data.

Every sectional form of the piecewise-analytic unknown is written as the
base solution times an explicit unimodular data matrix X (built from the
sampled spectral functions and the phase).  The jump at a contour node is
then X_left^{-1} X_right for the forms on its two sides, which makes
junction cocycles hold identically and unit determinants automatic.

Problem kinds: "x" (real line), "t" (real line, two sqrt(2)-circles,
two small circles at +-i), "xt" (real line and circles; the nonnegative
flux-velocity variant adds the +-i circles and the inner tilde forms).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..profiles import OMEGA_NONNEGATIVE, OMEGA_NONPOSITIVE
from .contour import Component, Contour, arc, expray, refine_edges_by_phase, segment
from .engine import PoleCondition, RHProblem

SQRT2 = np.sqrt(2.0)


@dataclass
class Budget:
    """Node-placement knobs; "fast" suits field sweeps, "accurate" the
    boundary-anchor and at-i extractions."""

    r_max: float = 24.0
    r_far: float = 1.0e6
    n_tail: int = 12
    n_bulk: int = 8
    corner_scale: float = 0.01
    corner_levels: int = 4
    n_corner: int = 8
    n_circle: int = 10
    eps_i: float = 0.3
    n_eps: int = 26
    n_eps_hot: int = 40
    stub_depth: float = 0.02
    n_stub: int = 8
    y_span: float = 8.0
    t_span: float = 0.5
    name: str = "fast"

    @classmethod
    def accurate(cls, y_span=8.0, t_span=0.5):
        return cls(r_max=40.0, r_far=1.0e7, n_tail=14, n_bulk=10,
                   corner_scale=0.004, corner_levels=5,
                   n_corner=10, n_circle=12, n_eps=30, n_eps_hot=44,
                   stub_depth=0.008, y_span=y_span, t_span=t_span,
                   name="accurate")

    @classmethod
    def fast(cls, y_span=8.0, t_span=0.5, r_max=24.0):
        return cls(r_max=r_max, y_span=y_span, t_span=t_span, name="fast")


def region_of(z: complex) -> str:
    """Quadrant of the plane split by the two sqrt(2)-circles and the axis."""
    in1 = abs(z - 1.0) < SQRT2
    in2 = abs(z + 1.0) < SQRT2
    lens = in1 != in2
    if z.imag >= 0:
        return "D+" if lens else "C-"
    return "D-" if lens else "C+"


def _phase_budget(budget: Budget):
    """Phase used to size panels: worst case of the parameter sweep."""

    def phase(mu: complex) -> float:
        mu = complex(mu)
        pref = (mu * mu - 1.0) / (2.0 * mu)
        total = abs(pref) * budget.y_span
        if budget.t_span:
            d2 = (mu * mu + 1.0) ** 2
            if abs(d2) > 1e-12:
                total += abs(pref * 4.0 * mu * mu / d2) * 2.0 * budget.t_span
        return total

    return phase


def _real_half_edges(budget: Budget):
    """Panel edges on (1/R, R); the contour runs straight through +1, with
    panel corners exactly there and geometric clustering on both sides.

    The solution carries a simple pole at +-1; the weighted density handles
    it as long as the corner panels resolve the local data variation.
    """
    r = budget.r_max
    ladder = [budget.corner_scale * 3.0 ** k for k in range(budget.corner_levels)]
    ladder = [d for d in ladder if d < 0.45] + [0.5]
    left = [1.0 - d for d in ladder[::-1]] + [1.0]
    right = [1.0] + [1.0 + d for d in ladder]
    inner = list(np.geomspace(1.0 / r, 0.5, 6))
    outer = list(np.geomspace(1.5, r, 6))
    return inner[:-1] + left, right + outer[1:]


def _real_component(budget: Budget, n=None) -> list:
    """The full real line through -1 and +1: logarithmic ray panels over
    [1/R_far, 1/R] and [R, R_far], Chebyshev segments in between."""
    n = n or budget.n_bulk
    phase = _phase_budget(budget)
    lo, hi = _real_half_edges(budget)
    panels = []

    def add_edges(edges):
        edges = refine_edges_by_phase(edges, phase, n)
        for aa, bb in zip(edges[:-1], edges[1:]):
            panels.append(segment(aa, bb, n))

    def add_tail(s_from, s_to):
        # log-spaced ray panels, split by the oscillation budget in the log
        # coordinate; panel order follows the traversal s_from -> s_to
        sgn = 1.0 if s_from > 0 else -1.0
        th0, th1 = np.log(abs(s_from)), np.log(abs(s_to))
        lo_, hi_ = min(th0, th1), max(th0, th1)
        edges = list(np.linspace(lo_, hi_, max(2, int(np.ceil((hi_ - lo_) / 3.0)) + 1)))
        edges = refine_edges_by_phase(edges, lambda t: phase(sgn * np.exp(t)),
                                      budget.n_tail)
        pieces = [sgn * np.exp(t) for t in edges]
        if abs(pieces[0] - s_from) > abs(pieces[-1] - s_from):
            pieces = pieces[::-1]
        for aa, bb in zip(pieces[:-1], pieces[1:]):
            panels.append(expray(aa, bb, budget.n_tail))

    r, rf = budget.r_max, budget.r_far
    add_tail(-rf, -r)
    add_edges([-v for v in hi[::-1]])
    add_edges([-v for v in lo[::-1]])
    add_tail(-1.0 / r, -1.0 / rf)
    add_tail(1.0 / rf, 1.0 / r)
    add_edges(lo)
    add_edges(hi)
    add_tail(r, rf)
    return [Component("real_axis", panels)]


def _circle_cross_angles(center: float, eps: float):
    """Angles (about the +-i points) where |mu -+ i| = eps meets the circle
    |mu - center| = sqrt(2); returns the half-width in the circle's angle."""
    # chord of length eps on a circle of radius sqrt(2)
    return 2.0 * np.arcsin(eps / (2.0 * SQRT2))


def _big_circle(center: float, budget: Budget, with_eps_gap: bool,
                tip_exclusion: float = 0.0) -> Component:
    """The circle |mu - center| = sqrt(2) split at its junctions.

    with_eps_gap: panels break where the +-i circles cross (the stubs inside
    carry their own panels, dyadically refined toward +-i and truncated at
    stub_depth).  tip_exclusion: for the variant without +-i circles, arcs
    stop that far (in angle) from +-i.
    """
    phase = _phase_budget(budget)
    # angles of +i and -i on this circle
    th_i = np.angle(1j - center)
    th_mi = np.angle(-1j - center)
    dphi = _circle_cross_angles(center, budget.eps_i)
    panels = []

    def add_arc(a, b, nn):
        if b <= a + 1e-12:
            return
        edges = refine_edges_by_phase(
            [a, b], lambda t: phase(center + SQRT2 * np.exp(1j * t)), nn)
        for aa, bb in zip(edges[:-1], edges[1:]):
            panels.append(arc(center, SQRT2, aa, bb, nn))

    def add_stub(th_tip, side, nn):
        # dyadic angles from the eps-crossing toward the tip, truncated
        d = dphi
        depth_angle = budget.stub_depth / SQRT2
        angles = [d]
        while angles[-1] / 2.0 > depth_angle:
            angles.append(angles[-1] / 2.0)
        angles.append(depth_angle)
        for aa, bb in zip(angles[:-1], angles[1:]):
            lo, hi = (th_tip + bb, th_tip + aa) if side > 0 else (th_tip - aa, th_tip - bb)
            panels.append(arc(center, SQRT2, lo, hi, nn))

    gap = dphi if with_eps_gap else tip_exclusion
    # two outer arcs between the gapped +-i junctions, cut at the real axis
    a1 = (th_mi + gap, th_i - gap)
    a2 = (th_i + gap, th_mi - gap + 2 * np.pi)
    for lo, hi in (a1, a2):
        # split at the real-axis crossings (angles 0 and pi mod 2pi)
        cuts = [lo]
        for cross in (0.0, np.pi, 2 * np.pi):
            if lo + 1e-9 < cross < hi - 1e-9:
                cuts.append(cross)
        cuts.append(hi)
        for aa, bb in zip(cuts[:-1], cuts[1:]):
            add_arc(aa, bb, budget.n_circle)
    if with_eps_gap:
        for tip in (th_i, th_mi):
            add_stub(tip, +1, budget.n_stub)
            add_stub(tip, -1, budget.n_stub)
    return Component(f"circle_{center:+g}", panels, closed=True)


def _eps_circle(sign: int, budget: Budget, hot: bool) -> Component:
    """|mu - sign*i| = eps split at the big-circle crossings.

    hot=True sizes the arcs for jump entries carrying the rational phase
    (growing like exp(c t / eps^2) along the lune arcs)."""
    eps = budget.eps_i
    c = 1j * sign
    # crossing angles about the center
    rts = []
    for cc in (1.0, -1.0):
        # |c + eps e^{i psi} - cc| = sqrt(2)
        val = -eps / (2.0 * SQRT2)
        if cc * sign > 0:
            base = np.pi / 4 if sign > 0 else 3 * np.pi / 4
        else:
            base = 3 * np.pi / 4 if sign > 0 else np.pi / 4
        # solve sin/cos combination numerically for robustness
        psi = np.linspace(0, 2 * np.pi, 2881)
        fvals = np.abs(c + eps * np.exp(1j * psi) - cc) - SQRT2
        s = np.where(np.sign(fvals[:-1]) != np.sign(fvals[1:]))[0]
        for j in s:
            lo, hi = psi[j], psi[j + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = abs(c + eps * np.exp(1j * mid) - cc) - SQRT2
                fl = abs(c + eps * np.exp(1j * lo) - cc) - SQRT2
                if np.sign(fm) == np.sign(fl):
                    lo = mid
                else:
                    hi = mid
            rts.append(0.5 * (lo + hi))
    rts = sorted(set(np.round(rts, 12)))
    panels = []
    angles = rts + [rts[0] + 2 * np.pi]
    for aa, bb in zip(angles[:-1], angles[1:]):
        mid = 0.5 * (aa + bb)
        # lune arcs see the growing factor; lens/outer arcs the decaying one
        reg = region_of(c + eps * np.exp(1j * mid))
        n_use = budget.n_eps_hot if (hot and reg in ("D+", "D-")) else budget.n_eps
        panels.append(arc(c, eps, aa, bb, n_use))
    return Component(f"eps_circle_{sign:+d}i", panels, closed=True)


# ---------------------------------------------------------------------------
# sectional data matrices

def _inv2(x: np.ndarray) -> np.ndarray:
    """Inverse of stacked unimodular 2x2 (adjugate)."""
    out = np.empty_like(x)
    out[..., 0, 0] = x[..., 1, 1]
    out[..., 1, 1] = x[..., 0, 0]
    out[..., 0, 1] = -x[..., 0, 1]
    out[..., 1, 0] = -x[..., 1, 0]
    return out


def _x_form(form: str, d: dict, e2: np.ndarray) -> np.ndarray:
    """Data matrix of a sectional form at the nodes where it is needed."""
    n = e2.size
    x = np.zeros((n, 2, 2), dtype=complex)
    tn, th = d.get("tnu"), d.get("teta")
    if form == "xp":
        x[:, 0, 0] = 1.0 / d["a"]
        x[:, 0, 1] = d["b"] / e2
        x[:, 1, 1] = d["a"]
    elif form == "xm":
        x[:, 0, 0] = d["as"]
        x[:, 1, 0] = d["bs"] * e2
        x[:, 1, 1] = 1.0 / d["as"]
    elif form == "t1":
        x[:, 0, 0] = 1.0 / d["A"]
        x[:, 0, 1] = d["B"] / e2
        x[:, 1, 1] = d["A"]
    elif form == "t2":
        x[:, 0, 0] = d["As"]
        x[:, 1, 0] = d["Bs"] * e2
        x[:, 1, 1] = 1.0 / d["As"]
    elif form == "t1i":
        x[:, 0, 0] = th / d["A"]
        x[:, 0, 1] = d["B"] / (th * e2)
        x[:, 1, 1] = d["A"] / th
    elif form == "t2i":
        x[:, 0, 0] = d["As"] * th
        x[:, 1, 0] = d["Bs"] * th * e2
        x[:, 1, 1] = 1.0 / (d["As"] * th)
    elif form == "dp":
        x[:, 0, 0] = d["As"] / d["d"]
        x[:, 0, 1] = d["b"] / e2
        x[:, 1, 0] = d["Bs"] * e2 / d["d"]
        x[:, 1, 1] = d["a"]
    elif form == "cp":
        x[:, 0, 0] = d["as"]
        x[:, 0, 1] = d["B"] / (e2 * d["ds"])
        x[:, 1, 0] = d["bs"] * e2
        x[:, 1, 1] = d["A"] / d["ds"]
    elif form == "xpi":
        x[:, 0, 0] = tn / d["a"]
        x[:, 0, 1] = d["b"] / (tn * e2)
        x[:, 1, 1] = d["a"] / tn
    elif form == "xmi":
        x[:, 0, 0] = d["as"] * tn
        x[:, 1, 0] = d["bs"] * tn * e2
        x[:, 1, 1] = 1.0 / (d["as"] * tn)
    elif form == "dpi":
        x[:, 0, 0] = d["As"] * tn / d["d"]
        x[:, 0, 1] = d["b"] / (tn * e2)
        x[:, 1, 0] = d["Bs"] * tn * e2 / d["d"]
        x[:, 1, 1] = d["a"] / tn
    elif form == "cpi":
        x[:, 0, 0] = d["as"] * tn
        x[:, 0, 1] = d["B"] / (e2 * d["ds"] * tn)
        x[:, 1, 0] = d["bs"] * tn * e2
        x[:, 1, 1] = d["A"] / (d["ds"] * tn)
    else:
        raise ValueError(f"unknown sectional form {form!r}")
    return x


def _direct_jump(fl: str, fr: str, d: dict, e2: complex, j: int):
    """Closed-form jump for real-axis form pairs, free of the 1/(mu -+ 1)
    pole cancellations of the sectional matrices.  Returns None when the
    pair has no direct formula."""

    def rpair():
        r = d["b"][j] / d["as"][j]
        rs = d["bs"][j] / d["a"][j]
        return r, rs

    def gpair():
        g = d["A"][j] * d["b"][j] - d["B"][j] * d["a"][j]
        gs = d["As"][j] * d["bs"][j] - d["Bs"][j] * d["as"][j]
        return g, gs

    out = np.eye(2, dtype=complex)
    if (fl, fr) in (("xp", "xm"), ("t1", "t2")):
        if fl == "xp":
            r, rs = rpair()
        else:
            r, rs = d["B"][j] / d["As"][j], d["Bs"][j] / d["A"][j]
        out[0, 1] = -r / e2
        out[1, 0] = rs * e2
        out[1, 1] = 1.0 - r * rs
        return out
    if (fl, fr) in (("xm", "xp"), ("t2", "t1")):
        if fr == "xp":
            r, rs = rpair()
        else:
            r, rs = d["B"][j] / d["As"][j], d["Bs"][j] / d["A"][j]
        out[0, 0] = 1.0 - r * rs
        out[0, 1] = r / e2
        out[1, 0] = -rs * e2
        return out
    if (fl, fr) == ("dp", "cp"):
        g, gs = gpair()
        dd, dds = d["d"][j], d["ds"][j]
        out[0, 1] = -g / (dds * e2)
        out[1, 0] = gs * e2 / dd
        out[1, 1] = 1.0 / (dd * dds)
        return out
    if (fl, fr) == ("cp", "dp"):
        g, gs = gpair()
        dd, dds = d["d"][j], d["ds"][j]
        out[0, 0] = 1.0 / (dd * dds)
        out[0, 1] = g / (dds * e2)
        out[1, 0] = -gs * e2 / dd
        return out
    return None


def _forms_for(kind: str, sign_case: str, reg: str, inside_eps: bool) -> str:
    if kind == "x":
        return "xp" if reg in ("C-", "D+") else "xm"
    if kind == "t":
        one = reg in ("C-", "D-")
        if sign_case == OMEGA_NONPOSITIVE:
            if inside_eps:
                return "t1i" if one else "t2i"
            return "t1" if one else "t2"
        if inside_eps:
            return "t1i" if one else "t2i"
        return "t2" if one else "t1"
    if kind == "xt":
        if sign_case == OMEGA_NONPOSITIVE:
            return {"C-": "xp", "D+": "dp", "C+": "xm", "D-": "cp"}[reg]
        if inside_eps:
            return {"C-": "xpi", "D+": "dpi", "C+": "xmi", "D-": "cpi"}[reg]
        return {"C-": "dp", "D+": "xp", "C+": "cp", "D-": "xm"}[reg]
    raise ValueError(kind)


@dataclass
class RHTemplate:
    """Cached geometry + node data; jump assembly per parameter point."""

    kind: str
    sign_case: str
    contour: Contour
    data: dict
    left_form: list
    right_form: list
    node_component: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    pole_info: list = field(default_factory=list)
    _base_problem: RHProblem = field(default=None, repr=False)

    def phases(self, y: float, t: float) -> np.ndarray:
        mu = self.contour.nodes
        pref = 1j * (mu * mu - 1.0) / (2.0 * mu)
        out = pref * (0.5 * y)
        if t:
            out = out - pref * (4.0 * mu * mu / (mu * mu + 1.0) ** 2) * t
        return out

    def jump(self, y: float, t: float = 0.0) -> np.ndarray:
        e2 = np.exp(2.0 * self.phases(y, t))
        n = self.contour.n_nodes
        out = np.empty((n, 2, 2), dtype=complex)
        direct = np.zeros(n, dtype=bool)
        # real-axis nodes: closed-form jumps in the pole-free ratios (the
        # sectional matrices suffer catastrophic cancellation near +-1)
        for j in range(n):
            if self.node_component[j] == "real_axis":
                jj = _direct_jump(self.left_form[j], self.right_form[j],
                                  self.data, e2[j], j)
                if jj is not None:
                    out[j] = jj
                    direct[j] = True
        rest = np.where(~direct)[0]
        if rest.size:
            forms = sorted({self.left_form[j] for j in rest}
                           | {self.right_form[j] for j in rest})
            built = {f: _x_form(f, self.data, e2) for f in forms}
            for j in rest:
                xl = built[self.left_form[j]][j]
                xr = built[self.right_form[j]][j]
                out[j] = _inv2(xl) @ xr
        return out

    def pole_conditions(self, y: float, t: float = 0.0) -> list:
        out = []
        for info in self.pole_info:
            mu0 = info["location"]
            pref = 1j * (mu0 * mu0 - 1.0) / (2.0 * mu0)
            ph = pref * (0.5 * y)
            if t:
                ph = ph - pref * (4.0 * mu0 * mu0 / (mu0 * mu0 + 1.0) ** 2) * t
            if info["column"] == "first":
                w = info["coef"] * np.exp(2.0 * ph)
            else:
                w = info["coef"] * np.exp(-2.0 * ph)
            out.append(PoleCondition(mu0, info["column"], w))
        return out

    def problem(self, y: float, t: float = 0.0) -> RHProblem:
        j = self.jump(y, t)
        meta = dict(self.meta)
        meta["parameters"] = {"y": y, "t": t}
        if self._base_problem is None:
            self._base_problem = RHProblem(contour=self.contour, jump=j,
                                           poles=self.pole_conditions(y, t),
                                           meta=meta)
            return self._base_problem
        pb = self._base_problem.with_jump(j)
        pb.poles = self.pole_conditions(y, t)
        pb.meta = meta
        return pb


def _side_forms(contour: Contour, kind: str, sign_case: str, eps: float):
    left, right = [], []
    for k, panel in enumerate(contour.panels):
        for q in range(panel.n):
            z = panel.nodes[q]
            tangent = panel.dzeta[q]
            tangent = tangent / abs(tangent)
            gap = 0.2 * min(panel.size / panel.n, 0.2)
            for attempt in range(6):
                delta = gap / (2.0 ** attempt)
                zl = z + 1j * tangent * delta
                zr = z - 1j * tangent * delta
                fl = _forms_for(kind, sign_case, region_of(zl), _in_eps(zl, eps, kind, sign_case))
                fr = _forms_for(kind, sign_case, region_of(zr), _in_eps(zr, eps, kind, sign_case))
                if fl != fr:
                    break
            left.append(fl)
            right.append(fr)
    return left, right


def _in_eps(z: complex, eps: float, kind: str, sign_case: str) -> bool:
    if kind == "x":
        return False
    if kind == "xt" and sign_case == OMEGA_NONPOSITIVE:
        return False
    return min(abs(z - 1j), abs(z + 1j)) < eps


def _node_data(sd, contour: Contour, kind: str, sign_case: str) -> dict:
    mu = contour.nodes
    muc = np.conj(mu)
    d: dict = {}
    if kind in ("x", "xt"):
        a, b = sd.eval_ab(mu)
        ac, bc = sd.eval_ab(muc)
        d["a"], d["b"] = a, b
        d["as"], d["bs"] = np.conj(ac), np.conj(bc)
    if kind in ("t", "xt"):
        A, B = sd.eval_AB(mu)
        Ac, Bc = sd.eval_AB(muc)
        d.update(A=A, B=B, As=np.conj(Ac), Bs=np.conj(Bc))
    if kind == "xt":
        d["d"] = d["a"] * d["As"] - d["b"] * d["Bs"]
        d["ds"] = d["as"] * d["A"] - d["bs"] * d["B"]
    if kind == "t" or (kind == "xt" and sign_case == OMEGA_NONNEGATIVE):
        d["teta"] = np.exp(sd.theta_eta(mu))
        d["tnu"] = np.exp(sd.theta_nu(mu))
    return d


def make_template(sd, kind: str, budget: Budget | None = None,
                  sign_case: str | None = None) -> RHTemplate:
    """Build the reusable geometry + data package for one problem kind."""
    budget = budget or Budget()
    sign_case = sign_case or sd.sign_case
    comps = _real_component(budget)
    meta = {"kind": kind, "sign_case": sign_case, "budget": budget.name,
            "r_max": budget.r_max,
            "truncation_bound": _truncation_bound(sd, budget)}
    if kind == "t":
        comps.append(_big_circle(+1.0, budget, with_eps_gap=True))
        comps.append(_big_circle(-1.0, budget, with_eps_gap=True))
        comps.append(_eps_circle(+1, budget, hot=(sign_case == OMEGA_NONNEGATIVE)))
        comps.append(_eps_circle(-1, budget, hot=(sign_case == OMEGA_NONNEGATIVE)))
        meta["epsilon_i"] = budget.eps_i
    elif kind == "xt":
        if sign_case == OMEGA_NONPOSITIVE:
            tip = budget.eps_i / SQRT2
            comps.append(_big_circle(+1.0, budget, with_eps_gap=False, tip_exclusion=tip))
            comps.append(_big_circle(-1.0, budget, with_eps_gap=False, tip_exclusion=tip))
        else:
            comps.append(_big_circle(+1.0, budget, with_eps_gap=True))
            comps.append(_big_circle(-1.0, budget, with_eps_gap=True))
            comps.append(_eps_circle(+1, budget, hot=True))
            comps.append(_eps_circle(-1, budget, hot=True))
            meta["epsilon_i"] = budget.eps_i
    contour = Contour(components=comps)
    data = _node_data(sd, contour, kind, sign_case)
    left, right = _side_forms(contour, kind, sign_case, budget.eps_i)
    node_comp = [contour.panel_component[k] for k, p in enumerate(contour.panels)
                 for _ in range(p.n)]
    tmpl = RHTemplate(kind=kind, sign_case=sign_case, contour=contour,
                      data=data, left_form=left, right_form=right,
                      node_component=node_comp, meta=meta)
    tmpl.pole_info = _pole_info(sd, kind, sign_case)
    return tmpl


def _truncation_bound(sd, budget: Budget) -> float:
    """Recorded bound on the discarded jump beyond |mu| = R (and inside 1/R)."""
    probe = np.array([budget.r_max + 0.0j, -budget.r_max + 0.0j])
    try:
        a, b = sd.eval_ab(probe)
        size = float(np.max(np.abs(b) / np.abs(np.conj(a))))
    except Exception:
        size = 0.0
    return size


def _derivative(f, z0: complex, h: float = 1e-5) -> complex:
    vals = [f(np.array([z0 + h])), f(np.array([z0 - h])),
            f(np.array([z0 + 1j * h])), f(np.array([z0 - 1j * h]))]
    vals = [complex(np.atleast_1d(v)[0]) for v in vals]
    return (vals[0] - vals[1]) / (4 * h) + (vals[2] - vals[3]) / (4j * h)


def _pole_info(sd, kind: str, sign_case: str) -> list:
    """Residue coefficients (phase-free part) per pole per problem kind."""
    out = []
    if kind == "x" or (kind == "xt" and sign_case == OMEGA_NONNEGATIVE):
        for mu0 in sd.poles_a:
            adot = _derivative(lambda m: sd.a(m), mu0)
            b0 = complex(sd.b(np.array([mu0]))[0])
            out.append({"location": mu0, "column": "first", "coef": 1.0 / (adot * b0)})
            out.append({"location": np.conj(mu0), "column": "second",
                        "coef": np.conj(1.0 / (adot * b0))})
    if kind == "t":
        for nu0_ in getattr(sd, "poles_A", []):
            Adot = _derivative(lambda m: sd.A(m), nu0_)
            B0 = complex(sd.B(np.array([nu0_]))[0])
            out.append({"location": nu0_, "column": "first", "coef": 1.0 / (Adot * B0)})
            out.append({"location": np.conj(nu0_), "column": "second",
                        "coef": np.conj(1.0 / (Adot * B0))})
    if kind == "xt":
        for k0 in sd.poles_d:
            ddot = _derivative(lambda m: sd.d(m), k0)
            Bs0 = complex(sd.B_star(np.array([k0]))[0])
            a0 = complex(sd.a(np.array([k0]))[0])
            out.append({"location": k0, "column": "first",
                        "coef": Bs0 / (ddot * a0)})
            B0 = complex(sd.B(np.array([np.conj(k0)]))[0])
            out.append({"location": np.conj(k0), "column": "second",
                        "coef": B0 / np.conj(ddot)})
    return out


def build_rh_x(sd, y: float, budget: Budget | None = None) -> RHProblem:
    """Factorization problem of the initial-data channel at parameter y."""
    if y < 0:
        raise ValueError("y must be nonnegative for the x-channel problem")
    tmpl = make_template(sd, "x", budget or Budget())
    return tmpl.problem(y, 0.0)


def build_rh_t(sd, z: float, t: float, budget: Budget | None = None) -> RHProblem:
    """Boundary-channel problem at parameters (z, t)."""
    if sd.boundary is not None and not (-1e-12 <= t <= sd.boundary.T + 1e-12):
        raise ValueError(f"t={t} outside [0, {sd.boundary.T}]")
    tmpl = make_template(sd, "t", budget or Budget())
    return tmpl.problem(z, t)


def build_rh_xt(sd, y: float, t: float, budget: Budget | None = None) -> RHProblem:
    """Main problem at parameters (y, t); contour depends on the sign case."""
    tmpl = make_template(sd, "xt", budget or Budget())
    return tmpl.problem(y, t)


def contour_dump(tmpl: RHTemplate, y: float, t: float = 0.0) -> dict:
    """JSON-ready contour + jump tables (consumed by the plotting package)."""
    j = tmpl.jump(y, t)
    out = {"kind": tmpl.kind, "sign_case": tmpl.sign_case,
           "parameters": {"y": y, "t": t}, "components": []}
    ct = tmpl.contour
    for ci, comp in enumerate(ct.components):
        nodes = comp.nodes
        idx0 = sum(p.n for c in ct.components[:ci] for p in c.panels)
        sl = slice(idx0, idx0 + nodes.size)
        jj = j[sl]
        entries = np.empty((nodes.size, 8))
        entries[:, 0::2] = jj.reshape(nodes.size, 4).real
        entries[:, 1::2] = jj.reshape(nodes.size, 4).imag
        out["components"].append({
            "label": comp.label,
            "kind": comp.panels[0].kind,
            "closed": comp.closed,
            "re_mu": nodes.real.tolist(),
            "im_mu": nodes.imag.tolist(),
            "jump_entries": entries.tolist(),
        })
    return out
