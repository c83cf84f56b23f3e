"""Symbolic blenders in chart coordinates and the transitivity search.

In the chart of the family F_n = T0^n o T1 every F_n is a weak saddle
translated by b_n along the contracting axis xi.  Three facts drive
everything here: the images F_n(D) cover D with room to spare, two of the
maps have fixed points on either side of xi = 0 whose unstable manifolds are
near-vertical, and pulling an s-curve back through a well chosen F_n
stretches it by at least 1 + chi / 2.  The reflected family G_n = T1 o T0^n
gives the mirror-image blender, and the two are joined by a heteroclinic
crossing near the reflection axis phi = b / 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy import sparse

from . import _kernels as K
from .arithmetic import circle_distance
from .errors import (ContractionFailure, NewtonDivergence, NoHeteroclinic,
                     NotHyperbolic, NoTransverseZero, SearchExhausted, SteeringStuck)
from .normal_form import Chart, Regime, ScaledFamily, build_chart, build_reversed_chart
from .twist_maps import AnnulusPoint, as_runs, compose_many, compose_word, rle_encode

TWO_PI = 2.0 * math.pi
# dichotomy constants of the cs-blender argument: a pulled-back curve longer
# than 9/5 must cross one of the two unstable graphs, which stay within 3/4
# of xi = 0 and leave a 9/10 < 1 - 10 chi gap
LONG_CURVE = 9.0 / 5.0
GRAPH_OFFSET = 3.0 / 4.0
GAP_BOUND = 9.0 / 10.0
MIN_SLOPE = 1e-3
SAMPLES = 401


# --------------------------------------------------------------------------
# curves

@dataclass
class GraphCurve:
    """'s': eta = h(xi) over ``grid``; 'u': xi = h(eta) over ``grid``."""

    kind: str
    grid: np.ndarray
    values: np.ndarray
    tags: np.ndarray | None = None
    _f: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self._f = PchipInterpolator(self.grid, self.values, extrapolate=True)

    @classmethod
    def constant(cls, kind, lo, hi, value, samples=SAMPLES):
        g = np.linspace(lo, hi, samples)
        return cls(kind, g, np.full(samples, float(value)))

    @classmethod
    def from_points(cls, kind, t, v, samples=SAMPLES, tags=None):
        """Resample scattered graph points (t, v) onto a uniform grid.

        ``tags`` (for instance the parameter of the original curve) are carried
        along by the same interpolation.
        """
        t = np.asarray(t, float)
        v = np.asarray(v, float)
        order = np.argsort(t)
        t, v = t[order], v[order]
        keep = np.concatenate([[True], np.diff(t) > 0])
        g = np.linspace(t[0], t[-1], samples)
        new_tags = None
        if tags is not None:
            new_tags = PchipInterpolator(t[keep], np.asarray(tags, float)[order][keep])(g)
        return cls(kind, g, PchipInterpolator(t[keep], v[keep])(g), new_tags)

    def __call__(self, t):
        return self._f(t)

    def derivative(self, t):
        return self._f.derivative()(t)

    @property
    def domain(self):
        return float(self.grid[0]), float(self.grid[-1])

    @property
    def length(self):
        return float(self.grid[-1] - self.grid[0])

    @property
    def lipschitz(self):
        return float(np.abs(np.diff(self.values) / np.diff(self.grid)).max())

    def xy(self):
        """Sample points as (xi, eta) arrays."""
        if self.kind == "s":
            return self.grid, self.values
        return self.values, self.grid


class InverseFamily:
    """Swap forward and inverse of a scaled family."""

    def __init__(self, fam):
        self.fam = fam
        self.regime = fam.regime
        self.chart = fam.chart

    def forward(self, n, xi, eta):
        return self.fam.inverse(n, xi, eta)

    def inverse(self, n, xi, eta):
        return self.fam.forward(n, xi, eta)

    def jacobian(self, n, xi, eta, h=1e-5):
        return self.fam.jacobian(n, xi, eta, h=h, inverse=True)


def family_word_runs(ns, order: str = "cs"):
    """Runs over {0, 1} for applying F_{ns[0]}, F_{ns[1]}, ... (or G for order 'cu')."""
    syms, counts = [], []

    def push(s, c):
        if syms and syms[-1] == s:
            counts[-1] += c
        else:
            syms.append(s)
            counts.append(c)

    for n in ns:
        if order == "cs":
            push(1, 1)
            push(0, int(n))
        else:
            push(0, int(n))
            push(1, 1)
    return np.array(syms, np.int8), np.array(counts, np.int64)


def concat_runs(*parts):
    syms, counts = [], []
    for s, c in parts:
        for a, b in zip(np.asarray(s).tolist(), np.asarray(c).tolist()):
            if b == 0:
                continue
            if syms and syms[-1] == a:
                counts[-1] += b
            else:
                syms.append(a)
                counts.append(b)
    return np.array(syms, np.int8), np.array(counts, np.int64)


def reverse_runs(syms, counts):
    return np.asarray(syms)[::-1].copy(), np.asarray(counts)[::-1].copy()


# --------------------------------------------------------------------------
# covering

@dataclass
class CoveringResult:
    a_estimate: float
    covered: bool
    uncovered: np.ndarray
    min_margin: float
    grid_res: int
    family: np.ndarray


def covering_check(regime: Regime, chart: Chart | None = None, grid_res: int = 201,
                   shrink: float = 0.0, family=None, allow_fast: bool = True) -> CoveringResult:
    """Rasterize D and test each grid point against the images F_n((1 - shrink) D).

    A point is covered when some F_n^{-1} sends it into the shrunken square.
    a_estimate is the smallest radius of a horizontal segment inside D that
    lies in no single image; segment ends are located to sub-grid accuracy by
    linear interpolation of the membership margin along each row.
    """
    chart = chart or build_chart(regime)
    fam = ScaledFamily(regime, chart, allow_fast=allow_fast)
    ns = regime.working_family() if family is None else np.atleast_1d(family)
    s = np.linspace(-1.0, 1.0, grid_res)
    X, Y = np.meshgrid(s, s)
    lim = 1.0 - shrink
    best = np.full(X.shape, -np.inf)
    reach = np.zeros(X.shape)
    idx = np.arange(grid_res)
    for n in ns:
        x, y = fam.inverse(int(n), X, Y)
        m = lim - np.maximum(np.abs(x), np.abs(y))
        best = np.maximum(best, m)
        inside = m >= 0
        # last outside index at or left of i, first outside index at or right of i
        left = np.maximum.accumulate(np.where(~inside, idx, -1), axis=1)
        right = np.minimum.accumulate(np.where(~inside, idx, grid_res)[:, ::-1],
                                      axis=1)[:, ::-1]
        lo = np.full(X.shape, -np.inf)
        hi = np.full(X.shape, np.inf)
        rows = np.arange(grid_res)[:, None] * np.ones((1, grid_res), int)
        okl = inside & (left >= 0)
        L = left[okl]
        r = rows[okl]
        m0, m1 = m[r, L], m[r, L + 1]
        lo[okl] = s[L] + (s[L + 1] - s[L]) * (-m0) / (m1 - m0)
        okr = inside & (right < grid_res)
        R = right[okr]
        r = rows[okr]
        m0, m1 = m[r, R - 1], m[r, R]
        hi[okr] = s[R - 1] + (s[R] - s[R - 1]) * m0 / (m0 - m1)
        rad = np.where(inside, np.minimum(X - lo, hi - X), 0.0)
        reach = np.maximum(reach, rad)
    covered_mask = best >= 0
    room = 1.0 - np.abs(X)
    fail = reach < room - 1e-12
    a = float(reach[fail].min()) if fail.any() else 1.0
    unc = np.column_stack([X[~covered_mask], Y[~covered_mask]])
    return CoveringResult(a_estimate=a, covered=bool(covered_mask.all()), uncovered=unc,
                          min_margin=float(best.min()), grid_res=grid_res,
                          family=np.asarray(ns))


# --------------------------------------------------------------------------
# fixed points and invariant manifolds

@dataclass
class BlenderPair:
    fixed_point: np.ndarray
    n_index: int
    eigenvalues: np.ndarray
    jacobian: np.ndarray
    family: object
    unstable_graph: GraphCurve | None = None
    stable_graph: GraphCurve | None = None
    log: dict = field(default_factory=dict)

    @property
    def chart(self):
        return self.family.chart


def blender_indices(regime: Regime, family=None) -> tuple[int, int]:
    """N_l, N_r: return times with b in (-3chi/4, -chi/4) and (chi/4, 3chi/4), closest to N."""
    chi = regime.chi
    ns = regime.working_family() if family is None else np.asarray(family)
    bs = np.array([regime.b_of(int(n)) for n in ns])
    out = []
    for lo, hi in ((-0.75 * chi, -0.25 * chi), (0.25 * chi, 0.75 * chi)):
        ok = (bs > lo) & (bs < hi)
        if not ok.any():
            raise SearchExhausted(f"no return time with b in ({lo:.4g}, {hi:.4g})")
        cand = ns[ok]
        # prefer b near the middle of the window, then small n
        score = np.abs(bs[ok] - 0.5 * (lo + hi)) / chi + (cand - regime.N) / regime.N
        out.append(int(cand[np.argmin(score)]))
    return out[0], out[1]


def find_fixed_point(regime: Regime, chart: Chart | None = None, n: int | None = None,
                     family=None, seed=None, tol: float = 1e-11,
                     max_iter: int = 50) -> BlenderPair:
    """Newton for F_n(z) = z from (b_n / chi, 0); checks hyperbolicity."""
    if family is None:
        family = ScaledFamily(regime, chart or build_chart(regime))
    z = np.array(seed if seed is not None else (regime.b_of(n) / regime.chi, 0.0), float)
    for _ in range(max_iter):
        f = np.array(family.forward(n, z[0], z[1])) - z
        if np.abs(f).max() < 1e-13:
            break
        Jm = family.jacobian(n, z[0], z[1]) - np.eye(2)
        dz = np.linalg.solve(Jm, -f)
        z = z + dz
        if np.abs(dz).max() < tol:
            break
    else:
        raise NewtonDivergence(f"fixed point of F_{n} did not converge")
    res = np.abs(np.array(family.forward(n, z[0], z[1])) - z).max()
    if res > 1e-10:
        raise NewtonDivergence(f"fixed point residual {res:.3g}")
    Jm = family.jacobian(n, z[0], z[1])
    ev = np.linalg.eigvals(Jm)
    if np.any(np.abs(ev.imag) > 0) or not (min(abs(ev)) < 1 < max(abs(ev))):
        raise NotHyperbolic(f"F_{n} fixed point eigenvalues {ev}")
    ev = np.sort(ev.real)
    return BlenderPair(fixed_point=z, n_index=int(n), eigenvalues=ev, jacobian=Jm,
                       family=family, log={"residual": float(res)})


def _graph_step(fam, n, curve: GraphCurve, ratio: float):
    """One graph transform step for a u-graph xi = f(eta) of the map fam.forward(n)."""
    eta = curve.grid
    u = eta / ratio
    prev = np.inf
    for _ in range(60):
        x, y = fam.forward(n, curve(u), u)
        du = (eta - y) / ratio
        u = u + du
        d = np.abs(du).max()
        # stop at the rounding floor
        if d < 1e-15 or (d < 1e-12 and d >= 0.5 * prev):
            break
        prev = d
    x, _ = fam.forward(n, curve(u), u)
    return GraphCurve("u", eta, x)


class _Swap:
    """Exchange xi and eta so stable graphs reuse the unstable-graph code."""

    def __init__(self, fam):
        self.fam = fam

    def forward(self, n, a, b):
        x, y = self.fam.inverse(n, b, a)
        return y, x


def graph_transform_manifold(pair: BlenderPair, kind: str = "unstable", max_iter: int = 400,
                             tol: float = 1e-12, span: float = 1.0, slack: float = 0.05,
                             samples: int = SAMPLES) -> GraphCurve:
    """Invariant manifold of the fixed point as a graph, by iterating the graph transform.

    The unstable manifold is xi = f(eta), eta in [-span, span]; the stable one
    eta = g(xi) comes from the same operator applied to the inverse map with
    the axes exchanged.  Successive sup distances must contract at least as
    fast as (1 + lambda) / 2 + slack.
    """
    fam = pair.family
    n = pair.n_index
    lam_s, lam_u = pair.eigenvalues
    if kind == "unstable":
        op, seed, ratio = fam, pair.fixed_point[0], lam_u
    else:
        op, seed, ratio = _Swap(fam), pair.fixed_point[1], 1.0 / lam_s
    bound = 0.5 * (1.0 + (lam_s if kind == "unstable" else 1.0 / lam_u)) + slack
    curve = GraphCurve.constant("u", -span, span, seed, samples)
    diffs, ratios = [], []
    for it in range(max_iter):
        new = _graph_step(op, n, curve, ratio)
        d = float(np.abs(new.values - curve.values).max())
        diffs.append(d)
        if len(diffs) >= 2 and diffs[-2] > 1e3 * tol:
            ratios.append(d / diffs[-2])
            if len(ratios) > 2 and ratios[-1] > bound:
                raise ContractionFailure(
                    f"graph transform ratio {ratios[-1]:.4f} > {bound:.4f} at iteration {it}")
        curve = new
        if d < tol:
            break
        # below 100 tol, ten steps without halving the best diff is the rounding floor
        if d < 1e2 * tol and len(diffs) > 10 and min(diffs[-10:]) > 0.5 * min(diffs[:-10]):
            break
    else:
        raise ContractionFailure(f"graph transform did not reach tol {tol} in {max_iter} steps")
    out = GraphCurve("u" if kind == "unstable" else "s", curve.grid, curve.values)
    info = {"iterations": len(diffs), "ratios": ratios, "bound": bound,
            "max_ratio": max(ratios) if ratios else 0.0}
    pair.log[kind] = info
    if kind == "unstable":
        pair.unstable_graph = out
    else:
        pair.stable_graph = out
    return out


def build_blenders(regime: Regime, family, span: float = 1.0, indices=None,
                   stable: bool = False):
    """Both blender pairs of a family with their unstable (and optionally stable) graphs."""
    nl, nr = indices or blender_indices(regime)
    pairs = []
    for n in (nl, nr):
        p = find_fixed_point(regime, family=family, n=n)
        graph_transform_manifold(p, "unstable", span=span)
        if stable:
            graph_transform_manifold(p, "stable")
        pairs.append(p)
    return pairs


# --------------------------------------------------------------------------
# cs-blender search

@dataclass
class SearchResult:
    word: list
    witness: np.ndarray | None
    witness_start: np.ndarray | None
    blender: int | None
    curve: GraphCurve
    lengths: list


def _crossing(curve: GraphCurve, ugraph: GraphCurve):
    """Transverse zero of xi - f(h(xi)) along an s-curve, or None."""
    xs = curve.grid
    d = xs - ugraph(curve.values)
    sc = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)
    if sc.size == 0:
        return None
    i = sc[0]
    fun = lambda x: x - ugraph(curve(x))
    x0 = xs[i] if d[i] == 0 else brentq(fun, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
    slope = 1.0 - ugraph.derivative(curve(x0)) * curve.derivative(x0)
    if abs(slope) < MIN_SLOPE:
        raise NoTransverseZero(f"tangential crossing, slope {slope:.3g}")
    return np.array([x0, float(curve(x0))])


def _pull_back(fam, n, curve: GraphCurve):
    x, y = fam.inverse(n, *curve.xy())
    return x, y


def _best_pullback(fam, ns, curves, probe=41):
    """Return time whose inverse sends all curves deepest into D, and that margin."""
    best, best_m = None, -np.inf
    for n in ns:
        m = np.inf
        for c in curves:
            idx = np.linspace(0, len(c.grid) - 1, probe).astype(int)
            x, y = fam.inverse(int(n), c.xy()[0][idx], c.xy()[1][idx])
            m = min(m, 1.0 - max(np.abs(x).max(), np.abs(y).max()))
        if m > best_m:
            best, best_m = int(n), m
    return best, best_m


def _clip(curve: GraphCurve, x, y):
    ok = (np.abs(x) <= 1) & (np.abs(y) <= 1)
    if ok.sum() < 8:
        return None
    tags = None if curve.tags is None else curve.tags[ok]
    return GraphCurve.from_points("s", x[ok], y[ok], len(curve.grid), tags)


def search_depth(length: float, chi: float) -> int:
    """Pullbacks needed to stretch a curve of this length past 9/5 at rate 1 + chi/2."""
    if length >= LONG_CURVE:
        return 0
    return int(math.ceil(math.log(LONG_CURVE / length) / math.log(1.0 + 0.5 * chi)))


def expand_curves(curves, fam, ns, chi, max_depth=None, extra=5):
    """Pull curves back through shared return times until all are longer than 9/5."""
    curves = list(curves)
    start = min(c.length for c in curves)
    depth = search_depth(start, chi) + extra if max_depth is None else max_depth
    word, lengths = [], [[c.length for c in curves]]
    while min(c.length for c in curves) < LONG_CURVE:
        if len(word) >= depth:
            raise SearchExhausted(f"curve length {min(c.length for c in curves):.3f} "
                                  f"after {len(word)} pullbacks")
        n, _ = _best_pullback(fam, ns, curves)
        new = []
        for c in curves:
            x, y = _pull_back(fam, n, c)
            nc = _clip(c, x, y)
            if nc is None or nc.length <= c.length:
                raise SearchExhausted(f"pullback by {n} did not stretch the curve")
            new.append(nc)
        curves = new
        word.append(n)
        lengths.append([c.length for c in curves])
    return curves, word, lengths


def cs_blender_search(scurve: GraphCurve, regime: Regime, blenders, family=None,
                      max_depth=None) -> SearchResult:
    """Word of pullbacks after which the s-curve crosses an unstable graph.

    The word lists the pullbacks in the order applied; a witness w on the
    final curve is sent back onto the initial curve by F_{word[-1]}, ...,
    F_{word[0]}.
    """
    return cs_blender_search_pair([scurve], regime, blenders, family, max_depth)[0]


def cs_blender_search_pair(scurves, regime: Regime, blenders, family=None, max_depth=None):
    """Shared pullback word for several s-curves with overlapping projections."""
    fam = family or blenders[0].family
    ns = regime.working_family()
    curves, word, lengths = expand_curves(scurves, fam, ns, regime.chi, max_depth)
    out = []
    for c in curves:
        hit, which = None, None
        for k, p in enumerate(blenders):
            hit = _crossing(c, p.unstable_graph)
            if hit is not None:
                which = k
                break
        if hit is None:
            raise SearchExhausted("long curve misses both unstable graphs")
        start = np.array(_forward_word(fam, word[::-1], hit))
        out.append(SearchResult(word=list(word), witness=hit, witness_start=start,
                                blender=which, curve=c, lengths=[l for l in lengths]))
    return out


def _forward_word(fam, ns, z):
    x, y = float(z[0]), float(z[1])
    for n in ns:
        x, y = fam.forward(int(n), x, y)
    return x, y


# --------------------------------------------------------------------------
# double blender

@dataclass
class DoubleBlender:
    regime: Regime
    cs_chart: Chart
    cu_chart: Chart
    cs_family: ScaledFamily
    cu_family: ScaledFamily
    cs: list
    cu: list
    witness: AnnulusPoint
    witness_cs: np.ndarray
    angle: float
    slope: float
    offset: np.ndarray


def reversibility_residual(regime: Regime, n: int, grid: int = 11) -> float:
    """sup |G_n - psi F_n^{-1} psi| over the chart square, in chart units of the cu chart."""
    cs = build_chart(regime)
    cu = build_reversed_chart(regime, cs)
    G = ScaledFamily(regime, cu, "cu")
    F = ScaledFamily(regime, cs, "cs")
    s = np.linspace(-1, 1, grid)
    X, Y = np.meshgrid(s, s)
    # in the reflected chart psi F^{-1} psi reads as F^{-1} in the cs chart
    x1, y1 = G.forward(n, X, Y)
    x2, y2 = F.inverse(n, X, Y)
    return float(max(np.abs(x1 - x2).max(), np.abs(y1 - y2).max()))


def build_double_blender(regime: Regime, span: float | None = None,
                         families=None) -> DoubleBlender:
    """cs-blender of F_n, cu-blender of G_n in the reflected chart, and their connection.

    The cu side is handled as the blender of H_n = G_n^{-1}: its unstable graphs
    are the stable manifolds of G_n.  The connection is a transverse crossing
    of W^u(P^cs), a near-vertical graph in the cs chart, with W^s(P^cu), which
    the chart change turns by 90 degrees into a near-horizontal curve.
    ``families(cs_chart, cu_chart)`` may supply other (F, G) families, such as
    the block maps of a skew product.
    """
    cs_chart = build_chart(regime)
    cu_chart = build_reversed_chart(regime, cs_chart)
    if families is None:
        F = ScaledFamily(regime, cs_chart, "cs")
        G = ScaledFamily(regime, cu_chart, "cu")
    else:
        F, G = families(cs_chart, cu_chart)
    H = InverseFamily(G)
    off = np.array(cs_chart.from_annulus(*cu_chart.to_annulus(0.0, 0.0)), float)
    if span is None:
        span = max(1.0, abs(off[1]) + 1.0)
    cs = build_blenders(regime, F, span=span)
    cu = build_blenders(regime, H, span=max(1.0, regime.chi * abs(off[0]) + 1.0))
    # W^u(P^cs) as points in cs coordinates
    pu = cs[0]
    gu = pu.unstable_graph
    # W^s(P^cu) = unstable graph of H, xi_cu = f(eta_cu), mapped into cs coordinates
    gs = cu[0].unstable_graph
    phi, J = cu_chart.to_annulus(gs.values, gs.grid)
    xs, ys = cs_chart.from_annulus(phi, J)
    # xs, ys traces a near-horizontal curve; parametrize by xi_cs
    curve = GraphCurve.from_points("s", xs, ys)
    lo, hi = curve.domain
    grid = curve.grid
    d = grid - gu(curve.values)
    sc = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)
    if sc.size == 0:
        raise NoHeteroclinic("W^u(P^cs) and W^s(P^cu) do not cross in the chart window")
    hit = _crossing(curve, gu)
    tu = np.array([gu.derivative(hit[1]), 1.0])
    ts = np.array([1.0, curve.derivative(hit[0])])
    cosang = abs(tu @ ts) / (np.linalg.norm(tu) * np.linalg.norm(ts))
    angle = math.degrees(math.acos(min(1.0, cosang)))
    slope = math.tan(math.radians(angle)) if angle < 90 else math.inf
    w = AnnulusPoint(*map(float, cs_chart.to_annulus(hit[0], hit[1])))
    return DoubleBlender(regime=regime, cs_chart=cs_chart, cu_chart=cu_chart, cs_family=F,
                         cu_family=G, cs=cs, cu=cu, witness=w, witness_cs=hit, angle=angle,
                         slope=slope, offset=off)


# --------------------------------------------------------------------------
# steering

def steering_radius(regime: Regime) -> float:
    """Band half-width alpha / |log eps|^3."""
    return regime.alpha_hat / abs(math.log(regime.eps)) ** 3


@dataclass
class BandBall:
    """Sup-norm ball in band units (phi / 2 pi, J / r_band)."""

    center: tuple
    radius: float
    r_band: float

    def to_annulus(self, u, v):
        return TWO_PI * (np.asarray(u) % 1.0), np.asarray(v) * self.r_band

    def center_point(self) -> AnnulusPoint:
        p, j = self.to_annulus(self.center[0], self.center[1])
        return AnnulusPoint(float(p), float(j))

    def contains(self, phi, J, slack: float = 0.0):
        u = np.asarray(phi) / TWO_PI
        v = np.asarray(J) / self.r_band
        du = circle_distance(u - self.center[0])
        dv = np.abs(v - self.center[1])
        return np.maximum(du, dv) <= self.radius * (1 + slack)

    def to_json(self):
        return {"center": list(map(float, self.center)), "radius": self.radius,
                "r_band": self.r_band, "units": "phi/2pi, J/r_band"}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(d["center"]), float(d["radius"]), float(d["r_band"]))


@dataclass
class SteerResult:
    syms: np.ndarray
    counts: np.ndarray
    start: AnnulusPoint
    end: AnnulusPoint
    chart_point: np.ndarray
    kicks: int
    backward: bool

    @property
    def length(self) -> int:
        return int(self.counts.sum())


def landing_tol(chart: Chart, eps: float, box=(0.5, 0.6)) -> float:
    """Action tolerance for steering: 0.4 eps, capped by 0.4 of the core's J half-width."""
    half = box[0] * abs(chart.C[1, 0]) + box[1] * abs(chart.C[1, 1])
    return min(0.4 * eps, 0.4 * half)


def _core_arc(chart: Chart, J: float, box=(0.5, 0.6)):
    """Angles phi with chart coordinates of (phi, J) inside the core box, as (lo, width)."""
    I = chart.C_inv
    lo, hi = -np.inf, np.inf
    for row, lim in ((0, box[0]), (1, box[1])):
        a, c = I[row, 0], I[row, 1] * J
        # |a dphi + c| <= lim
        e1, e2 = (-lim - c) / a, (lim - c) / a
        lo, hi = max(lo, min(e1, e2)), min(hi, max(e1, e2))
    if not lo < hi:
        return None
    # dphi is measured after the chart reflection
    if chart.sign > 0:
        return (chart.center + lo) % TWO_PI, hi - lo
    return (chart.center - hi) % TWO_PI, hi - lo


def steer_to_blender(z, target: Chart, regime: Regime, backward: bool = False,
                     J_target: float = 0.0, tol: float | None = None, max_rot: int = 10**6,
                     max_kicks: int = 10**7, box=(0.5, 0.6)) -> SteerResult:
    """Word carrying z into the core of the chart square of ``target``.

    Rotation blocks of T0 position phi where the next T1 kick moves J towards
    J_target by between eps/2 and eps; near the target a single tuned kick
    lands within tol; a final rotation block puts phi inside the chart
    square.  With ``backward`` the inverse maps are used, so the returned
    word (in forward order) sends the end point to z.
    """
    t0, t1 = regime.t0, regime.t1
    eps = t1.eps
    tol = landing_tol(target, eps, box) if tol is None else tol
    phi, J = float(z[0]), float(z[1])
    cap = 64 + 4 * int(abs(J - J_target) / (0.5 * eps) + 10)
    syms = np.zeros(cap, np.int8)
    counts = np.zeros(cap, np.int64)
    p, j, nr, st = K.steer(t0.P0, t1.P1, phi, J, J_target, tol, 0.0, TWO_PI, backward,
                           max_rot, max_kicks, syms, counts)
    if st != 0:
        raise SteeringStuck(f"steering status {st} at J = {j:.6g} after {nr} runs")
    kicks = int((syms[:nr] == 1).sum())
    arc = _core_arc(target, j, box)
    if arc is None:
        raise SteeringStuck(f"J = {j:.6g} misses the chart core")
    s2 = np.zeros(4, np.int8)
    c2 = np.zeros(4, np.int64)
    p, j, nr2, st = K.steer(t0.P0, t1.P1, p, j, j, 1.0, arc[0], arc[1], backward,
                            max_rot, 0, s2, c2)
    if st != 0:
        raise SteeringStuck(f"positioning status {st}")
    syms, counts = concat_runs((syms[:nr], counts[:nr]), (s2[:nr2], c2[:nr2]))
    if backward:
        syms, counts = reverse_runs(syms, counts)
    cp = np.array(target.from_annulus(p, j), float)
    return SteerResult(syms=syms, counts=counts, start=AnnulusPoint(phi, J),
                       end=AnnulusPoint(float(p), float(j)), chart_point=cp, kicks=kicks,
                       backward=backward)


# --------------------------------------------------------------------------
# transitivity

@dataclass
class Certificate:
    syms: np.ndarray
    counts: np.ndarray
    start: AnnulusPoint
    end: AnnulusPoint
    target: BandBall
    source: BandBall | None = None
    phases: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return int(self.counts.sum())

    def to_json(self):
        d = {"word": [[int(s), int(c)] for s, c in zip(self.syms, self.counts)],
             "word_encoding": "run-length [symbol, count], first run applied first",
             "start": [self.start.phi, self.start.J], "end": [self.end.phi, self.end.J],
             "target_ball": self.target.to_json()}
        if self.source is not None:
            d["source_ball"] = self.source.to_json()
        return d

    @classmethod
    def from_json(cls, d):
        syms, counts = as_runs(d["word"])
        src = BandBall.from_json(d["source_ball"]) if "source_ball" in d else None
        return cls(syms, counts, AnnulusPoint(*d["start"]), AnnulusPoint(*d["end"]),
                   BandBall.from_json(d["target_ball"]), src)


def verify_certificate(cert: Certificate, t0, t1, end_tol: float = 1e-6) -> bool:
    """Re-evaluate the word from the start point; the image must lie in the target ball.

    Also checks the start lies in the source ball (when given) and that the
    recomputed end agrees with the recorded one up to end_tol in band units.
    """
    try:
        e = compose_word(t0, t1, (cert.syms, cert.counts), cert.start)
    except Exception:
        return False
    ok = bool(cert.target.contains(e.phi, e.J))
    if cert.source is not None:
        ok &= bool(cert.source.contains(cert.start.phi, cert.start.J))
    du = circle_distance((e.phi - cert.end.phi) / TWO_PI)
    dv = abs(e.J - cert.end.J) / cert.target.r_band
    return ok and max(du, dv) <= end_tol


class Transitivity:
    """Reusable state (double blender, charts) for repeated transitivity searches."""

    def __init__(self, regime: Regime, r_band: float | None = None,
                 double: DoubleBlender | None = None):
        self.regime = regime
        self.r_band = steering_radius(regime) if r_band is None else r_band
        self.db = double or build_double_blender(regime)
        self.F = self.db.cs_family
        self.G = self.db.cu_family
        self.H = InverseFamily(self.G)

    def _segment(self, steer: SteerResult, ball: BandBall, chart: Chart, forward_map: bool):
        """Largest horizontal chart segment through the steered point whose
        pre-image (or image) under the steering word stays inside the ball."""
        t0, t1 = self.regime.t0, self.regime.t1
        x0, y0 = steer.chart_point
        ell = min(0.4, 0.95 - abs(x0))
        for _ in range(40):
            xs = x0 + np.linspace(-ell, ell, 33)
            phi, J = chart.to_annulus(xs, np.full_like(xs, y0))
            try:
                p, j = compose_many(t0, t1, (steer.syms, steer.counts), phi, J,
                                    inverse=forward_map)
                if bool(np.all(ball.contains(p, j))):
                    return ell
            except NewtonDivergence:
                pass
            ell *= 0.5
        raise SteeringStuck("no segment of the chart square maps into the ball")

    def _stretch(self, fam, n, curve, cover, max_steps=2000):
        """Pull a curve back through one return time until its xi-range covers ``cover``."""
        k = 0
        while not (curve.grid[0] <= cover[0] and curve.grid[-1] >= cover[1]):
            if k >= max_steps:
                raise SearchExhausted("stretching phase did not cover the target range")
            x, y = fam.inverse(n, *curve.xy())
            curve = GraphCurve.from_points("s", x, y, len(curve.grid), curve.tags)
            k += 1
        return curve, k

    def bridge(self, pu, qs, ell_u: float, ell_s: float, land=None):
        """Middle word from the cu-chart segment through pu to the cs-chart segment through qs.

        Returns (runs, t_star, info): the runs send the point pu + (t_star, 0)
        of the cu chart onto the horizontal line through qs in the cs chart,
        within ell_s of qs.  ``land(runs, t)`` evaluates cs-chart coordinates
        after the runs for segment parameters t (default: the plain maps).
        """
        reg = self.regime
        t0, t1 = reg.t0, reg.t1
        db = self.db
        ns = reg.working_family()
        xu, yu = pu
        xs_, ys_ = qs
        # cu side: pull back under H = G^{-1}, i.e. push forward under G
        cu0 = GraphCurve.constant("s", xu - ell_u, xu + ell_u, yu)
        cu0.tags = cu0.grid - xu
        (cu1,), word_u, _ = expand_curves([cu0], self.H, ns, reg.chi)
        # cs side: pull back under F
        cs0 = GraphCurve.constant("s", xs_ - ell_s, xs_ + ell_s, ys_)
        (cs1,), word_s, _ = expand_curves([cs0], self.F, ns, reg.chi)
        # stretch both across the connection near the cu origin
        cu_fix = min(db.cu, key=lambda p: abs(p.fixed_point[0] - cu1.grid.mean()))
        cs_fix = min(db.cs, key=lambda p: abs(p.fixed_point[0] - cs1.grid.mean()))
        off = db.offset
        # the xi_cu range whose image in the cs chart covers eta_cs in [-1/2, 1/2]
        e1 = np.array(db.cs_chart.from_annulus(*db.cu_chart.to_annulus(1.0, 0.0))) - off
        need = sorted([(s - off[1]) / e1[1] for s in (-0.5, 0.5)])
        cu2, k_u = self._stretch(self.H, cu_fix.n_index, cu1, (need[0] - 1, need[1] + 1))
        px, py = db.cs_chart.from_annulus(*db.cu_chart.to_annulus(*cu2.xy()))
        band = np.abs(py) <= 0.5
        cover = (float(px[band].min()) - 1.0, float(px[band].max()) + 1.0) if band.any() \
            else (off[0] - 3, off[0] + 3)
        cs2, k_s = self._stretch(self.F, cs_fix.n_index, cs1, cover)
        # middle word in the annulus: G word, G stretch, F stretch, F word
        mid = concat_runs(family_word_runs(word_u, "cu"),
                          family_word_runs([cu_fix.n_index] * k_u, "cu"),
                          family_word_runs([cs_fix.n_index] * k_s, "cs"),
                          family_word_runs(word_s[::-1], "cs"))
        if land is None:
            def land(runs, t):
                t = np.atleast_1d(t)
                phi, J = db.cu_chart.to_annulus(xu + t, np.full(t.size, yu))
                p, j = compose_many(t0, t1, runs, phi, J)
                return db.cs_chart.from_annulus(p, j)

        # Shoot along the u-segment: eta_cs after the middle word must hit y_q.
        # The tracked curves give brackets in the segment parameter; only points
        # near the crossing are pushed through the full word.
        px, py = db.cs_chart.from_annulus(*db.cu_chart.to_annulus(*cu2.xy()))
        inside = (px >= cs2.grid[0]) & (px <= cs2.grid[-1])
        d = np.where(inside, py - cs2(np.clip(px, cs2.grid[0], cs2.grid[-1])), np.nan)
        cand = np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) <= 0)
        g = lambda t: land(mid, t)[1][0] - ys_
        t_star = None
        for i in cand:
            for w in range(4):
                lo, hi = max(i - w, 0), min(i + 1 + w, len(cu2.tags) - 1)
                ta, tb = sorted((cu2.tags[lo], cu2.tags[hi]))
                if g(ta) * g(tb) <= 0:
                    t_star = brentq(g, ta, tb, xtol=1e-15, rtol=1e-15)
                    break
            if t_star is not None and abs(land(mid, t_star)[0][0] - xs_) <= ell_s:
                break
            t_star = None
        if t_star is None:
            raise SearchExhausted("bridging phase: no crossing of the stretched curves")
        info = {"cu_word": len(word_u), "cs_word": len(word_s), "cu_stretch": k_u,
                "cs_stretch": k_s}
        return mid, t_star, info

    def search(self, B1: BandBall, B2: BandBall) -> Certificate:
        reg = self.regime
        t0, t1 = reg.t0, reg.t1
        db = self.db
        sf = steer_to_blender(B1.center_point(), db.cu_chart, reg)
        sb = steer_to_blender(B2.center_point(), db.cs_chart, reg, backward=True)
        ell_u = self._segment(sf, B1, db.cu_chart, True)
        ell_s = self._segment(sb, B2, db.cs_chart, False)
        mid, t_star, info = self.bridge(sf.chart_point, sb.chart_point, ell_u, ell_s)
        xu, yu = sf.chart_point
        phi, J = db.cu_chart.to_annulus(xu + t_star, yu)
        start = compose_many(t0, t1, (sf.syms, sf.counts), [phi], [J], inverse=True)
        start = AnnulusPoint(float(start[0][0]), float(start[1][0]))
        syms, counts = concat_runs((sf.syms, sf.counts), mid, (sb.syms, sb.counts))
        end = compose_word(t0, t1, (syms, counts), start)
        cert = Certificate(syms, counts, start, end, B2, B1,
                           phases={"steer_forward": sf.length, "steer_backward": sb.length,
                                   **info, "segments": (ell_u, ell_s)})
        if not verify_certificate(cert, t0, t1):
            raise SearchExhausted("certificate failed re-evaluation")
        return cert


def transitivity_search(B1: BandBall, B2: BandBall, regime: Regime,
                        context: Transitivity | None = None) -> Certificate:
    """Word sending a point of B1 into B2, certified by direct re-evaluation."""
    ctx = context or Transitivity(regime, r_band=B1.r_band)
    return ctx.search(B1, B2)


def random_balls(rng, count: int, radius: float, r_band: float, margin: float = 0.05):
    out = []
    for _ in range(count):
        u = rng.uniform(0, 1)
        v = rng.uniform(-1 + radius + margin, 1 - radius - margin)
        out.append(BandBall((u, v), radius, r_band))
    return out


# --------------------------------------------------------------------------
# reachability oracle

@dataclass
class Reachability:
    matrix: np.ndarray
    shape: tuple
    r_band: float

    def cell(self, phi, J):
        nu, nv = self.shape
        i = int(math.floor((phi % TWO_PI) / TWO_PI * nu)) % nu
        j = int(math.floor((J / self.r_band + 1.0) * 0.5 * nv))
        return i * nv + min(max(j, 0), nv - 1)

    def reachable(self, a, b) -> bool:
        return bool(self.matrix[self.cell(*a), self.cell(*b)])


def reachability_oracle(regime: Regime, cell_count=(32, 32), max_len: int = 64,
                        r_band: float | None = None, samples: int = 4) -> Reachability:
    """Cell-to-cell reachability in the band under words of length <= max_len.

    Each cell is sampled on a samples x samples grid including its edges, and
    a symbol maps the cell onto every cell met by the bounding box of the
    images (an outer approximation).  Images leaving the band are dropped.
    Reachability is breadth-first over the resulting graph.
    """
    nu, nv = cell_count
    if nu * nv > 64 * 64:
        raise ValueError("cell_count above 64^2")
    r = steering_radius(regime) if r_band is None else r_band
    t0, t1 = regime.t0, regime.t1
    s = np.linspace(0.0, 1.0, samples)
    U, V = np.meshgrid(s, s)
    rows, cols = [], []
    for i in range(nu):
        for j in range(nv):
            phi = TWO_PI * (i + U.ravel()) / nu
            J = r * (-1.0 + 2.0 * (j + V.ravel()) / nv)
            src = i * nv + j
            for m in (t0, t1):
                p, q = m(phi, J)
                p = np.asarray(p)
                q = np.asarray(q)
                # unwrap around the first image point
                du = wrap_signed(p - p[0]) + p[0]
                ulo, uhi = du.min() / TWO_PI * nu, du.max() / TWO_PI * nu
                vlo = (q.min() / r + 1.0) * 0.5 * nv
                vhi = (q.max() / r + 1.0) * 0.5 * nv
                for ii in range(int(math.floor(ulo)), int(math.floor(uhi)) + 1):
                    for jj in range(max(int(math.floor(vlo)), 0),
                                    min(int(math.floor(vhi)), nv - 1) + 1):
                        rows.append(src)
                        cols.append((ii % nu) * nv + jj)
    n = nu * nv
    A = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.data[:] = 1.0
    R = sparse.identity(n, format="csr")
    for _ in range(max_len):
        R2 = R + R @ A
        R2.data[:] = 1.0
        if R2.nnz == R.nnz:
            R = R2
            break
        R = R2
    return Reachability(matrix=R.toarray() > 0, shape=(nu, nv), r_band=r)


def wrap_signed(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi
