"""Oriented piecewise-smooth contours discretized by Chebyshev panels.

A contour is a list of components; a component is a chain of panels, each
an analytic map zeta: [-1, 1] -> C carrying Gauss-Chebyshev nodes, Fejer
quadrature weights, barycentric interpolation data and a spectral
differentiation matrix.  Nodes are interior to panels, so junction points
never carry a collocation node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def cheb_nodes(n: int) -> np.ndarray:
    """Gauss-Chebyshev (first kind) nodes in ascending order on (-1, 1)."""
    q = np.arange(n, 0, -1)
    return np.cos((2 * q - 1) * np.pi / (2 * n))


def fejer1_weights(n: int) -> np.ndarray:
    """Fejer's first quadrature rule at the Gauss-Chebyshev nodes."""
    q = np.arange(n, 0, -1)
    theta = (2 * q - 1) * np.pi / (2 * n)
    m = np.arange(1, n // 2 + 1)
    if m.size:
        corr = 2.0 * np.sum(np.cos(2.0 * np.outer(theta, m)) / (4.0 * m**2 - 1.0), axis=1)
    else:
        corr = np.zeros(n)
    return (2.0 / n) * (1.0 - corr)


def bary_weights(tau: np.ndarray) -> np.ndarray:
    """Barycentric weights of an arbitrary small node set, normalized."""
    n = tau.size
    w = np.ones(n)
    for j in range(n):
        w[j] = 1.0 / np.prod(tau[j] - np.delete(tau, j))
    return w / np.max(np.abs(w))


def bary_matrix(tau_src: np.ndarray, w_src: np.ndarray, tau_dst: np.ndarray) -> np.ndarray:
    """Interpolation matrix from node values at tau_src to values at tau_dst."""
    out = np.zeros((tau_dst.size, tau_src.size))
    for i, t in enumerate(tau_dst):
        diff = t - tau_src
        hit = np.where(np.abs(diff) < 1e-14)[0]
        if hit.size:
            out[i, hit[0]] = 1.0
            continue
        terms = w_src / diff
        out[i] = terms / np.sum(terms)
    return out


def diff_matrix(tau: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = tau.size
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                d[i, j] = (w[j] / w[i]) / (tau[i] - tau[j])
        d[i, i] = -np.sum(d[i])
    return d


_CACHE: dict[int, tuple] = {}


def _panel_tables(n: int):
    if n not in _CACHE:
        tau = cheb_nodes(n)
        w = bary_weights(tau)
        _CACHE[n] = (tau, fejer1_weights(n), w, diff_matrix(tau, w))
    return _CACHE[n]


@dataclass
class Panel:
    """One smooth parametrized piece with its quadrature tables."""

    kind: str                 # "segment" | "arc"
    za: complex               # zeta(-1)
    zb: complex               # zeta(+1)
    n: int
    center: complex = 0.0j    # arcs only
    phi_a: float = 0.0
    phi_b: float = 0.0
    nodes: np.ndarray = field(default=None, repr=False)
    dzeta: np.ndarray = field(default=None, repr=False)
    tau: np.ndarray = field(default=None, repr=False)
    fejer: np.ndarray = field(default=None, repr=False)
    bary: np.ndarray = field(default=None, repr=False)
    dmat: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        tau, fj, bw, dm = _panel_tables(self.n)
        self.tau, self.fejer, self.bary, self.dmat = tau, fj, bw, dm
        self.nodes = self.zeta(tau)
        self.dzeta = self.dzeta_of(tau)

    def zeta(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "segment":
            return 0.5 * (self.za + self.zb) + 0.5 * (self.zb - self.za) * tau
        if self.kind == "expray":
            # logarithmic map along a real ray; sign carried by the endpoints
            sgn = np.sign(self.za.real)
            la, lb = np.log(abs(self.za)), np.log(abs(self.zb))
            return sgn * np.exp(0.5 * (la + lb) + 0.5 * (lb - la) * tau) + 0.0j
        phi = 0.5 * (self.phi_a + self.phi_b) + 0.5 * (self.phi_b - self.phi_a) * tau
        return self.center + self.radius * np.exp(1j * phi)

    def dzeta_of(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.kind == "segment":
            return np.full(tau.shape, 0.5 * (self.zb - self.za), dtype=complex)
        if self.kind == "expray":
            la, lb = np.log(abs(self.za)), np.log(abs(self.zb))
            return self.zeta(tau) * 0.5 * (lb - la)
        phi = 0.5 * (self.phi_a + self.phi_b) + 0.5 * (self.phi_b - self.phi_a) * tau
        return self.radius * np.exp(1j * phi) * 1j * 0.5 * (self.phi_b - self.phi_a)

    @property
    def radius(self) -> float:
        return abs(self.za - self.center)

    @property
    def size(self) -> float:
        if self.kind == "arc":
            return self.radius * abs(self.phi_b - self.phi_a)
        return abs(self.zb - self.za)


def segment(za, zb, n=8) -> Panel:
    return Panel(kind="segment", za=complex(za), zb=complex(zb), n=n)


def expray(za, zb, n=12) -> Panel:
    """Real-ray panel in the log coordinate (za, zb same sign, |za| < |zb|
    or reversed; orientation follows the endpoint order)."""
    if za * zb <= 0:
        raise ValueError("expray endpoints must share a sign")
    return Panel(kind="expray", za=complex(za), zb=complex(zb), n=n)


def arc(center, radius, phi_a, phi_b, n=8) -> Panel:
    za = center + radius * np.exp(1j * phi_a)
    zb = center + radius * np.exp(1j * phi_b)
    return Panel(kind="arc", za=za, zb=zb, n=n, center=complex(center),
                 phi_a=float(phi_a), phi_b=float(phi_b))


@dataclass
class Component:
    """A chain of panels sharing a geometric role (one contour piece)."""

    label: str
    panels: list
    closed: bool = False

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([p.nodes for p in self.panels])


@dataclass
class Contour:
    """The full oriented contour with global node bookkeeping."""

    components: list
    symmetry_tags: tuple = ("conj", "neg", "recip")

    def __post_init__(self):
        self.panels = [p for c in self.components for p in c.panels]
        self.panel_component = [c.label for c in self.components for _ in c.panels]
        sizes = [p.n for p in self.panels]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.nodes = np.concatenate([p.nodes for p in self.panels]) if self.panels else np.empty(0, complex)
        self.dzeta = np.concatenate([p.dzeta for p in self.panels]) if self.panels else np.empty(0, complex)
        self.fejer = np.concatenate([p.fejer for p in self.panels]) if self.panels else np.empty(0, float)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def panel_slice(self, k: int) -> slice:
        return slice(self.offsets[k], self.offsets[k + 1])

    def node_counts(self) -> dict:
        out: dict[str, int] = {}
        for k, p in enumerate(self.panels):
            out[self.panel_component[k]] = out.get(self.panel_component[k], 0) + p.n
        return out

    def min_spacing_at(self, z: complex) -> float:
        """Local node spacing near z, for off-contour evaluation guards."""
        d = np.abs(self.nodes - z)
        j = int(np.argmin(d))
        lo, hi = max(0, j - 1), min(self.n_nodes - 1, j + 1)
        gaps = np.abs(np.diff(self.nodes[lo:hi + 1]))
        return float(np.min(gaps)) if gaps.size else float(d[j])


def refine_edges_by_phase(edges, phase_fn, n_per_panel, max_span=None, max_splits=14):
    """Split a 1D list of parameter edges until the phase variation per panel
    is resolvable by n_per_panel Chebyshev nodes."""
    if max_span is None:
        max_span = 0.7 * n_per_panel

    def span(a, b):
        m = 0.5 * (a + b)
        return abs(phase_fn(m) - phase_fn(a)) + abs(phase_fn(b) - phase_fn(m))

    def emit(a, b, depth, out):
        if depth >= max_splits or span(a, b) <= max_span:
            out.append(b)
            return
        m = 0.5 * (a + b)
        emit(a, m, depth + 1, out)
        emit(m, b, depth + 1, out)

    edges = list(map(float, edges))
    out = [edges[0]]
    for j in range(len(edges) - 1):
        emit(edges[j], edges[j + 1], 0, out)
    return out
