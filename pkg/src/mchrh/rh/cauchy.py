"""Discretized Cauchy transforms on panelized contours.

Three evaluation regimes per panel:
  * far targets: plain Fejer quadrature of the interpolated density;
  * near targets (including collocation nodes of neighboring panels):
    recursive dyadic subdivision in the parameter, resampling the density
    barycentrically from the parent nodes;
  * the panel's own nodes: principal value via singularity subtraction,
    with the log term evaluated from the panel endpoints.

The solver's density carries the fixed weight 1/(s^2 - 1) (the contours
may pass through +-1 where the solutions have simple poles), so the
operator also provides principal-value rows for the two weight points,
which work whether or not +-1 lie on the contour.

All weights are linear in the node values, so every transform is a
complex matrix (rows: targets, columns: source nodes).
"""

from __future__ import annotations

import numpy as np

from .contour import Contour, Panel, bary_matrix, cheb_nodes, fejer1_weights

TWO_PI_I = 2j * np.pi


def _sub_nodes(panel: Panel, a: float, b: float, n: int):
    tau = cheb_nodes(n)
    tloc = 0.5 * (a + b) + 0.5 * (b - a) * tau
    z = panel.zeta(tloc)
    dz = panel.dzeta_of(tloc) * 0.5 * (b - a)
    res = bary_matrix(panel.tau, panel.bary, tloc)
    return z, dz, res


def _panel_weights_far(panel: Panel, z: complex, power: int) -> np.ndarray:
    return panel.fejer * panel.dzeta / (panel.nodes - z) ** power / TWO_PI_I


def _tau_gap(zs, dzs, z, halfwidth):
    """Distance from z to the piece, measured in the panel parameter."""
    j = int(np.argmin(np.abs(zs - z)))
    scale = abs(dzs[j]) / halfwidth + 1e-300
    return abs(zs[j] - z) / scale


def _panel_weights_near(panel: Panel, z: complex, power: int,
                        a=-1.0, b=1.0, depth=0, nsub=None) -> np.ndarray:
    nsub = nsub or max(panel.n, 10)
    zs, dzs, res = _sub_nodes(panel, a, b, nsub)
    # dzs includes the sub-interval jacobian, so the tau-gap is in the
    # sub-panel's own [-1,1] coordinate
    if _tau_gap(zs, dzs, z, 1.0) > 0.5 or depth >= 46:
        w = fejer1_weights(nsub) * dzs / (zs - z) ** power / TWO_PI_I
        return w @ res
    m = 0.5 * (a + b)
    return (_panel_weights_near(panel, z, power, a, m, depth + 1, nsub)
            + _panel_weights_near(panel, z, power, m, b, depth + 1, nsub))


def panel_eval_weights(panel: Panel, z: complex, power: int = 1) -> np.ndarray:
    if _tau_gap(panel.nodes, panel.dzeta, z, 1.0) > 0.8:
        return _panel_weights_far(panel, z, power)
    return _panel_weights_near(panel, z, power)


def panel_pv_weights(panel: Panel, p: int) -> np.ndarray:
    """Principal-value weights at the panel's own node p."""
    zp = panel.nodes[p]
    n = panel.n
    w = np.zeros(n, dtype=complex)
    idx = np.arange(n) != p
    ker = np.zeros(n, dtype=complex)
    ker[idx] = panel.fejer[idx] * panel.dzeta[idx] / (panel.nodes[idx] - zp)
    w += ker
    w[p] -= np.sum(ker)
    w += panel.fejer[p] * panel.dmat[p]
    ta = panel.za - zp
    tb = panel.zb - zp
    tp = panel.dzeta[p]
    logterm = (np.log(np.abs(tb)) - np.log(np.abs(ta))
               + 1j * (np.angle(tb / tp) - np.angle(ta / (-tp))))
    w[p] += logterm
    return w / TWO_PI_I


class CauchyOperator:
    """Node-to-node PV matrix, corner rows at +-1, and target weights."""

    def __init__(self, contour: Contour):
        self.contour = contour
        self._pv = None
        self._corner = {}

    @property
    def pv_matrix(self) -> np.ndarray:
        if self._pv is None:
            ct = self.contour
            n = ct.n_nodes
            mat = np.zeros((n, n), dtype=complex)
            for k, panel in enumerate(ct.panels):
                sl = ct.panel_slice(k)
                for p in range(panel.n):
                    mat[sl.start + p, sl] = panel_pv_weights(panel, p)
            for k, panel in enumerate(ct.panels):
                sl = ct.panel_slice(k)
                for i in range(n):
                    if sl.start <= i < sl.stop:
                        continue
                    mat[i, sl] += panel_eval_weights(panel, ct.nodes[i])
            self._pv = mat
        return self._pv

    def corner_row(self, c: float) -> np.ndarray:
        return self.corner_data(c)[0]

    def corner_value_row(self, c: float) -> np.ndarray:
        """Extrapolation weights for the density value at the weight point
        (zero row when the contour does not touch it)."""
        return self.corner_data(c)[1]

    def corner_data(self, c: float):
        """Weights of (1/2 pi i) PV int v(s)/(s - c) ds, plus the corner
        value extrapolation row.

        Handles the case where c is a shared corner of exactly two panels
        (the weight points +-1 on a contour passing through them) as a
        paired principal value with barycentric corner extrapolation; if no
        panel touches c the row is plain evaluation.
        """
        c = complex(c)
        key = (round(c.real, 12), round(c.imag, 12))
        if key in self._corner:
            return self._corner[key]
        ct = self.contour
        row = np.zeros(ct.n_nodes, dtype=complex)
        touching = []
        for k, panel in enumerate(ct.panels):
            if abs(panel.za - c) < 1e-12:
                touching.append((k, -1.0))
            elif abs(panel.zb - c) < 1e-12:
                touching.append((k, +1.0))
        if not touching:
            for k, panel in enumerate(ct.panels):
                row[ct.panel_slice(k)] = panel_eval_weights(panel, c)
            out = (row, np.zeros(ct.n_nodes, dtype=complex))
            self._corner[key] = out
            return out
        if len(touching) != 2:
            raise ValueError(
                f"weight point {c} touches {len(touching)} panels; need 0 or 2"
            )
        # common corner value by averaged barycentric extrapolation
        vc_row = np.zeros(ct.n_nodes, dtype=complex)
        for k, end in touching:
            panel = ct.panels[k]
            sl = ct.panel_slice(k)
            vc_row[sl] += 0.5 * bary_matrix(panel.tau, panel.bary,
                                            np.array([end]))[0]
        log_sum = 0.0 + 0.0j
        for k, end in touching:
            panel = ct.panels[k]
            sl = ct.panel_slice(k)
            ker = panel.fejer * panel.dzeta / (panel.nodes - c)
            row[sl] += ker
            row -= np.sum(ker) * vc_row
            # endpoint log with the epsilon-divergence shared by the pair
            if end > 0:     # panel runs a_L -> c
                log_sum -= np.log(-(panel.za - c))
            else:           # panel runs c -> b_R
                log_sum += np.log(panel.zb - c)
        row += log_sum * vc_row
        row = row / TWO_PI_I
        for k, panel in enumerate(ct.panels):
            if any(k == kk for kk, _ in touching):
                continue
            row[ct.panel_slice(k)] += panel_eval_weights(panel, c)
        out = (row, vc_row)
        self._corner[key] = out
        return out

    def eval_weights(self, z: complex, power: int = 1) -> np.ndarray:
        ct = self.contour
        out = np.zeros(ct.n_nodes, dtype=complex)
        for k, panel in enumerate(ct.panels):
            out[ct.panel_slice(k)] = panel_eval_weights(panel, z, power)
        return out

    def moment_weights(self) -> np.ndarray:
        """Weights of (1/2 pi i) int v(s) ds (unweighted density)."""
        return self.contour.fejer * self.contour.dzeta / TWO_PI_I
