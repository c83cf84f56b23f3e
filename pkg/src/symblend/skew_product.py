"""Skew products over the two-sided full shift with weak coupling.

The fiber map over a symbol sequence omega is

    F(omega, z) = T_{omega_0}(z) + (0, A sum_{k=1}^{K} delta^k g_k(phi') (omega_k - omega_{-k}))

with g_k(phi) = sin(phi + k) evaluated at the T-image phi'.  The correction is
a shear in J, so each fiber map stays area preserving.  Two sequences that
agree on [-n, n] give fiber maps within 2 A delta^{n+1} / (1 - delta) of each
other, and K = ceil(log(machine eps) / log delta) truncates the tail below
rounding.  Sequences are stored run-length encoded; symbols outside the
recorded track read as a fixed extension symbol.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .arithmetic import circle_distance
from .blender import BandBall, Transitivity, build_double_blender, concat_runs, landing_tol
from .errors import NewtonDivergence, SearchExhausted, SteeringStuck, WindowTooShort
from .twist_maps import AnnulusPoint, T0Map, T1Map, rle_encode

TWO_PI = 2.0 * math.pi
MACHINE_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SkewSystem:
    t0: T0Map
    t1: T1Map
    delta: float
    kernel_scale: float = 1.0
    depth: int = 0
    extension: int = 0

    @property
    def KP(self) -> np.ndarray:
        return np.array([self.kernel_scale, self.delta, float(self.depth),
                         float(self.extension)])

    def describe(self) -> dict:
        return {"delta": self.delta, "kernel_scale": self.kernel_scale, "depth": self.depth,
                "extension": self.extension,
                "kernel": "A sum_k delta^k sin(phi' + k) (omega_k - omega_-k) added to J"}


def truncation_depth(delta: float) -> int:
    if delta <= 0.0:
        return 0
    return int(math.ceil(math.log(MACHINE_EPS) / math.log(delta)))


def make_skew(t0: T0Map, t1: T1Map, delta: float, kernel_scale: float = 1.0,
              depth: int | None = None, extension: int = 0) -> SkewSystem:
    """Skew product with the geometric coupling kernel."""
    if not 0.0 <= delta < 0.5:
        raise ValueError("delta must lie in [0, 0.5)")
    K_ = truncation_depth(delta) if depth is None else int(depth)
    return SkewSystem(t0, t1, float(delta), float(kernel_scale), K_, int(extension))


@dataclass(frozen=True)
class SymbolWindow:
    """Symbols omega_{-W} .. omega_W; ``center_index`` is the array index of omega_0."""

    symbols: tuple
    center_index: int

    @classmethod
    def from_array(cls, arr):
        arr = tuple(int(x) for x in arr)
        if len(arr) % 2 != 1:
            raise ValueError("window length must be odd")
        return cls(arr, len(arr) // 2)

    @classmethod
    def random(cls, rng, W: int):
        return cls.from_array(rng.integers(0, 2, 2 * W + 1))

    @classmethod
    def constant(cls, W: int, symbol: int = 0):
        return cls.from_array([symbol] * (2 * W + 1))

    @property
    def W(self) -> int:
        return self.center_index

    def __getitem__(self, k: int) -> int:
        if abs(k) > self.W:
            raise WindowTooShort(f"index {k} outside window of half-width {self.W}")
        return self.symbols[self.center_index + k]

    def segment(self, lo: int, hi: int) -> list:
        """Symbols omega_lo .. omega_hi inclusive."""
        return [self[k] for k in range(lo, hi + 1)]

    def agrees(self, other: "SymbolWindow", lo: int, hi: int) -> bool:
        return self.segment(lo, hi) == other.segment(lo, hi)

    def flipped(self, k: int) -> "SymbolWindow":
        arr = list(self.symbols)
        arr[self.center_index + k] ^= 1
        return SymbolWindow(tuple(arr), self.center_index)


@dataclass
class SymbolTrack:
    """Run-length encoded symbols; orbit position p is track index p + origin."""

    syms: np.ndarray
    counts: np.ndarray
    origin: int
    extension: int = 0
    starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.syms = np.asarray(self.syms, np.int64)
        self.counts = np.asarray(self.counts, np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(np.int64)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_symbols(cls, symbols, origin: int, extension: int = 0):
        s, c = rle_encode(np.asarray(symbols, np.int64))
        return cls(s, c, origin, extension)

    def symbol(self, pos: int) -> int:
        return int(K.seq_symbol(self.syms, self.starts, self.total, self.extension,
                                pos + self.origin))

    def segment(self, lo: int, hi: int) -> list:
        return [self.symbol(p) for p in range(lo, hi + 1)]

    def to_json(self):
        return {"runs": [[int(s), int(c)] for s, c in zip(self.syms, self.counts)],
                "origin": self.origin, "extension": self.extension,
                "extension_rule": "constant symbol outside the recorded runs"}

    @classmethod
    def from_json(cls, d):
        arr = np.asarray(d["runs"], np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], int(d["origin"]), int(d.get("extension", 0)))


def _eval(sys: SkewSystem, track: SymbolTrack, p0: int, p1: int, phi, J, inverse=False,
          allow_fast=True):
    phi = np.ascontiguousarray(np.atleast_1d(np.asarray(phi, float)).ravel())
    J = np.ascontiguousarray(np.atleast_1d(np.asarray(J, float)).ravel())
    phi, J = np.broadcast_arrays(phi, J)
    op, oj, st = K.skew_eval_many(sys.t0.P0, sys.t1.P1, sys.KP, track.syms, track.counts,
                                  track.starts, track.total, p0 + track.origin,
                                  p1 + track.origin, np.ascontiguousarray(phi),
                                  np.ascontiguousarray(J), inverse, allow_fast)
    if np.any(st != K.OK):
        raise NewtonDivergence("skew fiber evaluation failed")
    return op, oj


def track_compose(sys: SkewSystem, track: SymbolTrack, p0: int, p1: int, z,
                  inverse: bool = False) -> AnnulusPoint:
    """Fiber composition over orbit positions p0 <= p < p1 (inverse maps z at p1 back to p0)."""
    p, j = _eval(sys, track, p0, p1, [z[0]], [z[1]], inverse)
    return AnnulusPoint(float(p[0]), float(j[0]))


def _window_track(window: SymbolWindow, extension: int) -> SymbolTrack:
    return SymbolTrack.from_symbols(window.symbols, window.center_index, extension)


def fiber_map(sys: SkewSystem, window: SymbolWindow, z) -> AnnulusPoint:
    """F(omega, z) for a single step."""
    return fiber_compose(sys, window, 1, z)


def fiber_compose(sys: SkewSystem, window: SymbolWindow, n: int, z,
                  inverse: bool = False) -> AnnulusPoint:
    """F^n_omega(z); with ``inverse`` the map (F^n_{sigma^{-n} omega})^{-1}."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return AnnulusPoint(float(z[0]), float(z[1]))
    need = (n - 1 + sys.depth) if not inverse else (n + sys.depth)
    if need > window.W:
        raise WindowTooShort(f"n = {n} needs half-width {need} > {window.W}")
    tr = _window_track(window, sys.extension)
    if inverse:
        return track_compose(sys, tr, -n, 0, z, inverse=True)
    return track_compose(sys, tr, 0, n, z)


def fiber_compose_many(sys: SkewSystem, window: SymbolWindow, n: int, phi, J,
                       inverse: bool = False):
    need = (n - 1 + sys.depth) if not inverse else (n + sys.depth)
    if need > window.W:
        raise WindowTooShort(f"n = {n} needs half-width {need} > {window.W}")
    tr = _window_track(window, sys.extension)
    return _eval(sys, tr, -n if inverse else 0, 0 if inverse else n, phi, J, inverse)


def window_sensitivity(sys: SkewSystem, window1: SymbolWindow, window2: SymbolWindow,
                       n: int, grid: int = 16, J_max: float = 0.05, h: float = 1e-4):
    """Sup norms of F^n_{omega} - F^n_{omega'} and of their FD Jacobian difference.

    The windows must agree on [-n, n]; the grid covers the circle times [-J_max, J_max].
    """
    if not window1.agrees(window2, -n, n):
        raise ValueError(f"windows must agree on [-{n}, {n}]")
    u = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    v = np.linspace(-J_max, J_max, grid)
    P, Q = np.meshgrid(u, v)
    P, Q = P.ravel(), Q.ravel()

    def ev(w, dp=0.0, dq=0.0):
        return fiber_compose_many(sys, w, n, P + dp, Q + dq)

    a = ev(window1)
    b = ev(window2)
    dphi = np.abs((a[0] - b[0] + math.pi) % TWO_PI - math.pi)
    c0 = float(max(dphi.max(), np.abs(a[1] - b[1]).max()))

    def jac(w):
        cols = []
        for dp, dq in ((h, 0.0), (0.0, h)):
            p1, q1 = ev(w, dp, dq)
            p2, q2 = ev(w, -dp, -dq)
            dpp = (p1 - p2 + math.pi) % TWO_PI - math.pi
            cols.append(np.stack([dpp, q1 - q2]) / (2 * h))
        return np.stack(cols, axis=-1)

    c1 = float(np.abs(jac(window1) - jac(window2)).max())
    return c0, c1


def coupling_c1_distance(sys: SkewSystem, window: SymbolWindow, grid: int = 16,
                         J_max: float = 0.05, h: float = 1e-5) -> float:
    """sup |D F(omega, .) - D T_{omega_0}| over a grid, by central differences."""
    u = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    v = np.linspace(-J_max, J_max, grid)
    P, Q = np.meshgrid(u, v)
    P, Q = P.ravel(), Q.ravel()
    base = sys.t0 if window[0] == 0 else sys.t1
    out = 0.0
    for dp, dq in ((h, 0.0), (0.0, h)):
        a1 = fiber_compose_many(sys, window, 1, P + dp, Q + dq)
        a2 = fiber_compose_many(sys, window, 1, P - dp, Q - dq)
        b1 = base(P + dp, Q + dq)
        b2 = base(P - dp, Q - dq)
        da = np.stack([(a1[0] - a2[0] + math.pi) % TWO_PI - math.pi, a1[1] - a2[1]])
        db = np.stack([(b1[0] - b2[0] + math.pi) % TWO_PI - math.pi, b1[1] - b2[1]])
        out = max(out, float(np.abs(da - db).max() / (2 * h)))
    return out


# --------------------------------------------------------------------------
# block maps and transitivity modulo N-cylinders

class SkewFamily:
    """Skew-product analogue of F_n (order 'cs') or G_n (order 'cu') in a chart.

    Inside a word of family blocks each kick is isolated by runs of zeros
    longer than the truncation depth, so every block sees the same symbol
    pattern: the block map depends on n alone and can replace F_n or G_n in
    the blender constructions.
    """

    def __init__(self, sys: SkewSystem, regime, chart, order: str = "cs"):
        self.sys = sys
        self.regime = regime
        self.chart = chart
        self.order = order
        self._tracks = {}

    def _track(self, n: int) -> SymbolTrack:
        tr = self._tracks.get(n)
        if tr is None:
            d = self.sys.depth
            s, c = concat_runs(([0, 1, 0, 1, 0], [d, 1, n, 1, d]))
            origin = d if self.order == "cs" else d + 1
            tr = SymbolTrack(s, c, origin, self.sys.extension)
            if len(self._tracks) > 4096:
                self._tracks.clear()
            self._tracks[n] = tr
        return tr

    def _eval(self, n, xi, eta, inverse):
        scalar = np.ndim(xi) == 0 and np.ndim(eta) == 0
        shape = np.broadcast(np.asarray(xi), np.asarray(eta)).shape
        x, y = np.broadcast_arrays(np.atleast_1d(np.asarray(xi, float)),
                                   np.atleast_1d(np.asarray(eta, float)))
        phi, J = self.chart.to_annulus(x.ravel(), y.ravel())
        p, j = _eval(self.sys, self._track(int(n)), 0, int(n) + 1, phi, J, inverse)
        a, b = self.chart.from_annulus(p, j)
        if scalar:
            return float(a[0]), float(b[0])
        return a.reshape(shape), b.reshape(shape)

    def forward(self, n, xi, eta):
        return self._eval(n, xi, eta, False)

    def inverse(self, n, xi, eta):
        return self._eval(n, xi, eta, True)

    def jacobian(self, n, xi, eta, h=1e-5, inverse=False):
        f = self.inverse if inverse else self.forward
        Jm = np.empty((2, 2))
        for k, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
            Jm[:, k] = (np.array(f(n, xi + dx, eta + dy)) - np.array(f(n, xi - dx, eta - dy))) / (2 * h)
        return Jm


def skew_context(sys: SkewSystem, regime) -> Transitivity:
    """Transitivity machinery built on the skew block maps."""
    db = build_double_blender(regime, families=lambda cs, cu: (SkewFamily(sys, regime, cs, "cs"),
                                                               SkewFamily(sys, regime, cu, "cu")))
    return Transitivity(regime, double=db)


@dataclass
class SkewCertificate:
    track: SymbolTrack
    M: int
    N: int
    start: AnnulusPoint
    end: AnnulusPoint
    window_a: SymbolWindow
    window_b: SymbolWindow
    ball_a: BandBall
    ball_b: BandBall
    system: dict
    phases: dict = field(default_factory=dict)

    def to_json(self):
        return {"track": self.track.to_json(), "M": self.M, "N": self.N,
                "start": [self.start.phi, self.start.J], "end": [self.end.phi, self.end.J],
                "window_a": list(self.window_a.symbols), "window_b": list(self.window_b.symbols),
                "source_ball": self.ball_a.to_json(), "target_ball": self.ball_b.to_json(),
                "system": self.system}

    @classmethod
    def from_json(cls, d):
        return cls(SymbolTrack.from_json(d["track"]), int(d["M"]), int(d["N"]),
                   AnnulusPoint(*d["start"]), AnnulusPoint(*d["end"]),
                   SymbolWindow.from_array(d["window_a"]), SymbolWindow.from_array(d["window_b"]),
                   BandBall.from_json(d["source_ball"]), BandBall.from_json(d["target_ball"]),
                   d.get("system", {}))


def verify_skew_certificate(cert: SkewCertificate, sys: SkewSystem, end_tol: float = 1e-6) -> bool:
    """Re-run the fiber composition and check balls and both N-windows of the symbol track."""
    N = cert.N
    if cert.track.segment(-N, N) != cert.window_a.segment(-N, N):
        return False
    if cert.track.segment(cert.M - N, cert.M + N) != cert.window_b.segment(-N, N):
        return False
    if not bool(cert.ball_a.contains(cert.start.phi, cert.start.J)):
        return False
    try:
        e = track_compose(sys, cert.track, 0, cert.M, cert.start)
    except NewtonDivergence:
        return False
    if not bool(cert.ball_b.contains(e.phi, e.J)):
        return False
    du = circle_distance((e.phi - cert.end.phi) / TWO_PI)
    dv = abs(e.J - cert.end.J) / cert.ball_b.r_band
    return max(du, dv) <= end_tol


def _skew_steer(sys: SkewSystem, z, hist, forced, chart, backward, J_target=0.0, tol=None,
                box=(0.5, 0.6), max_rot=10**6, max_kicks=10**7):
    eps = sys.t1.eps
    tol = landing_tol(chart, eps) if tol is None else tol
    steering_cap = 200000 + len(hist) + len(forced) + \
        int(40 * abs(float(z[1]) - J_target) / (0.5 * eps))
    buf = np.zeros(steering_cap, np.int64)
    nh = len(hist)
    buf[:nh] = hist
    buf[nh:nh + len(forced)] = forced
    n_dec, p, j, st = K.skew_steer(sys.t0.P0, sys.t1.P1, sys.KP, buf, nh, len(forced),
                                   float(z[0]), float(z[1]), J_target, tol, chart.packed,
                                   box[0], box[1], backward, max_rot, max_kicks)
    if st != 0:
        raise SteeringStuck(f"skew steering status {st} at J = {j:.6g}")
    return buf[nh:n_dec].copy(), AnnulusPoint(float(p), float(j))


class SkewTransitivity:
    """Bridging searches between (N-cylinder, ball) pairs, reusing one double blender."""

    def __init__(self, sys: SkewSystem, ctx: Transitivity):
        self.sys = sys
        self.ctx = ctx

    def search(self, window_a: SymbolWindow, ball_a: BandBall, window_b: SymbolWindow,
               ball_b: BandBall, N: int) -> SkewCertificate:
        sys = self.sys
        ctx = self.ctx
        db = ctx.db
        W = window_a.W
        if window_b.W < N or W < N:
            raise WindowTooShort("windows shorter than N")
        ext = sys.extension
        # forward: context omega^a_{-W..-1}, forced omega^a_{0..N}
        fw, pend = _skew_steer(sys, ball_a.center_point(), window_a.segment(-W, -1),
                               window_a.segment(0, N), db.cu_chart, False)
        # backward from the target at orbit time M: context omega^b_{0..W} read
        # nearest-last, forced omega^b_{-1}, ..., omega^b_{-N}
        Wb = window_b.W
        hist_b = window_b.segment(0, Wb)[::-1]
        forced_b = window_b.segment(-N, -1)[::-1]
        bw_rev, qend = _skew_steer(sys, ball_b.center_point(), hist_b, forced_b, db.cs_chart,
                                   True)
        bw = bw_rev[::-1]
        left = window_a.segment(-W, -1)
        right = window_b.segment(0, Wb)
        Lf = len(fw)

        def build(mid_runs):
            fw_runs = rle_encode(np.asarray(fw))
            bw_runs = rle_encode(np.asarray(bw))
            parts = [rle_encode(np.asarray(left)), fw_runs]
            if mid_runs is not None:
                parts.append(mid_runs)
            parts += [bw_runs, rle_encode(np.asarray(right))]
            s, c = concat_runs(*parts)
            return SymbolTrack(s, c, origin=len(left), extension=ext)

        # segment half-lengths, checked through the skew maps on a provisional track
        pu = np.array(db.cu_chart.from_annulus(*pend), float)
        qs = np.array(db.cs_chart.from_annulus(*qend), float)
        prov = build(None)
        ell_u = self._segment(prov, 0, Lf, pu, db.cu_chart, ball_a, True)
        Mprov = prov.total - len(left) - len(right)
        ell_s = self._segment(prov, Mprov - len(bw), Mprov, qs, db.cs_chart, ball_b, False)
        cache = {}

        def land(runs, t):
            key = id(runs)
            if key not in cache:
                cache.clear()
                cache[key] = build(runs)
            tr = cache[key]
            Lm = int(np.asarray(runs[1]).sum())
            t = np.atleast_1d(t)
            phi, J = db.cu_chart.to_annulus(pu[0] + t, np.full(t.size, pu[1]))
            p, j = _eval(sys, tr, Lf, Lf + Lm, phi, J)
            return db.cs_chart.from_annulus(p, j)

        mid, t_star, info = ctx.bridge(pu, qs, ell_u, ell_s, land=land)
        track = build(mid)
        M = track.total - len(left) - len(right)
        phi, J = db.cu_chart.to_annulus(pu[0] + t_star, pu[1])
        start = track_compose(sys, track, 0, Lf, (float(phi), float(J)), inverse=True)
        end = track_compose(sys, track, 0, M, start)
        cert = SkewCertificate(track, M, N, start, end, window_a, window_b, ball_a, ball_b,
                               sys.describe(), phases={"forward": Lf, "backward": len(bw),
                                                       **info, "segments": (ell_u, ell_s)})
        if not verify_skew_certificate(cert, sys):
            raise SearchExhausted("skew certificate failed re-evaluation")
        return cert

    def _segment(self, track, p0, p1, center, chart, ball, pull_back):
        x0, y0 = center
        ell = min(0.4, 0.95 - abs(x0))
        for _ in range(40):
            xs = x0 + np.linspace(-ell, ell, 17)
            phi, J = chart.to_annulus(xs, np.full_like(xs, y0))
            try:
                p, j = _eval(self.sys, track, p0, p1, phi, J, inverse=pull_back)
                if bool(np.all(ball.contains(p, j))):
                    return ell
            except NewtonDivergence:
                pass
            ell *= 0.5
        raise SteeringStuck("no chart segment maps into the ball")


def skew_transitivity_search(sys: SkewSystem, window_a: SymbolWindow, ball_a: BandBall,
                             window_b: SymbolWindow, ball_b: BandBall, N: int,
                             ctx: Transitivity) -> SkewCertificate:
    """Sequence and point realizing (C_N(omega^a), B_a) -> (C_N(omega^b), B_b)."""
    return SkewTransitivity(sys, ctx).search(window_a, ball_a, window_b, ball_b, N)
