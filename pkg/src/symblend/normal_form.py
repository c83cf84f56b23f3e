"""Regime selection, blender charts and Birkhoff normal form reduction.

The working family is F_n = T0^n o T1 for n in a set calN of return times
whose angles theta_n = b + 2 pi n beta fall in a small window around 0.  In
the chart C = P diag(kappa tau, kappa tau / chi), with P the eigenvector
matrix of the affine model A_N, each F_n is close to the saddle
    (xi, eta) -> (b_n + (1 - chi) xi, (1 + chi) eta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .arithmetic import RotationNumber, diophantine_constant, frac_multiples
from .errors import (NewtonDivergence, NoTransverseZero, RegimeInfeasible,
                     SmallDivisorBlowup)
from .twist_maps import (T0Map, T0Spec, T1Map, T1Spec, EigenData, eigen_symplectic,
                         make_t0, make_t1, wrap_pi)

TWO_PI = 2.0 * math.pi
# The return-time scan is nstar_factor times 1 / (5 alpha chi tau kappa).
# 50 pi converts the density target kappa tau chi / 5 (radians) into the
# Dirichlet bound 1 / (M alpha) (turns); see the project notes.
NSTAR_FACTOR = 50.0 * math.pi


def _maps(t0, t1):
    if isinstance(t0, T0Spec):
        t0 = make_t0(t0)
    if isinstance(t1, T1Spec):
        t1 = make_t1(t1)
    return t0, t1


@dataclass
class Chart:
    """Linear chart around ``center``; ``sign = -1`` composes with the reflection phi -> center - phi."""

    C: np.ndarray
    center: float = 0.0
    sign: float = 1.0
    C_inv: np.ndarray = field(init=False)
    packed: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        a, b = self.C[0]
        c, d = self.C[1]
        det = a * d - b * c
        self.C_inv = np.array([[d, -b], [-c, a]]) / det
        self.packed = np.array([a, b, c, d, *self.C_inv.ravel(), self.center, self.sign])

    def to_annulus(self, xi, eta):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        dphi = self.C[0, 0] * xi + self.C[0, 1] * eta
        J = self.C[1, 0] * xi + self.C[1, 1] * eta
        return np.mod(self.center + self.sign * dphi, TWO_PI), J

    def from_annulus(self, phi, J):
        dphi = self.sign * wrap_pi(np.asarray(phi, dtype=float) - self.center)
        J = np.asarray(J, dtype=float)
        return (self.C_inv[0, 0] * dphi + self.C_inv[0, 1] * J,
                self.C_inv[1, 0] * dphi + self.C_inv[1, 1] * J)

    def image_bounds(self):
        """Half-widths of the annulus box containing the image of [-1, 1]^2."""
        return float(np.abs(self.C[0]).sum()), float(np.abs(self.C[1]).sum())


@dataclass
class Regime:
    chi: float
    kappa: float
    tau: float
    eps: float
    beta: RotationNumber
    alpha_hat: float
    N: int
    N_star: int
    scan_length: int
    calN: np.ndarray
    theta: np.ndarray
    b: np.ndarray
    eig: EigenData
    t0: T0Map
    t1: T1Map
    window_factor: float
    eps0: float
    max_gap: float
    work: np.ndarray
    info: dict = field(default_factory=dict)

    def b_of(self, n: int) -> float:
        i = np.searchsorted(self.calN, n)
        if i >= len(self.calN) or self.calN[i] != n:
            raise KeyError(f"{n} is not in calN")
        return float(self.b[i])

    def working_family(self) -> np.ndarray:
        """Return times with n - N <= work_frac * N, used by searches."""
        return self.calN[self.work]

    def summary(self) -> dict:
        return {
            "chi": self.chi, "kappa": self.kappa, "tau": self.tau, "eps": self.eps,
            "beta": str(self.beta.mp), "alpha_hat": self.alpha_hat, "N": self.N,
            "N_star": self.N_star, "scan_length": self.scan_length,
            "calN_size": int(len(self.calN)), "working_size": int(len(self.work)),
            "max_gap": self.max_gap, "window_factor": self.window_factor,
            "eps0": self.eps0, **self.info,
        }


def chart_matrix(eig: EigenData, kappa: float, tau: float, chi: float) -> np.ndarray:
    P = np.array([[1.0, 1.0], [eig.v, eig.w]])
    return P @ np.diag([kappa * tau, kappa * tau / chi])


def coverage_gap(points: np.ndarray, lo: float, hi: float) -> float:
    """Largest gap between consecutive points lying in [lo, hi]."""
    inside = np.sort(points[(points >= lo) & (points <= hi)])
    if inside.size < 2:
        return math.inf
    return float(np.diff(inside).max())


def select_regime(chi: float, kappa: float, t0, t1, window_factor: float = 20.0,
                  eps0: float = 1e-2, nstar_factor: float = NSTAR_FACTOR,
                  q_max: int = 100000, work_frac: float | None = None,
                  check_density: bool = True, chunk: int = 1 << 22) -> Regime:
    """Choose N, the return-time set calN and the chart data for given chi, kappa."""
    t0, t1 = _maps(t0, t1)
    tau, eps = t0.tau, t1.eps
    if not chi <= 0.2:
        raise RegimeInfeasible(f"chi = {chi} > 0.2", "chi <= 0.2")
    if not kappa <= chi / 10.0 * (1 + 1e-12):
        raise RegimeInfeasible(f"kappa = {kappa} > chi/10 = {chi / 10}", "kappa <= chi/10")
    if not eps <= tau:
        raise RegimeInfeasible(f"eps = {eps} > tau = {tau}", "eps <= tau")
    alpha = diophantine_constant(t0.beta, q_max)
    bound = eps0 * min(tau, alpha)
    if not eps <= bound:
        raise RegimeInfeasible(f"eps = {eps} > eps0*min(tau, alpha) = {bound:.6g}",
                               "eps <= eps0*min(tau, alpha)")
    N = int(math.floor(chi * chi / (eps * tau)))
    if N < 1:
        raise RegimeInfeasible("N = floor(chi^2/(eps tau)) < 1", "N >= 1")
    N_star = int(math.floor(1.0 / (5.0 * alpha * chi * tau * kappa)))
    scan = int(math.ceil(nstar_factor * max(N_star, 1)))
    width = window_factor * kappa * tau * chi
    sel_n, sel_t = [], []
    for start in range(N, N + scan + 1, chunk):
        n = np.arange(start, min(N + scan, start + chunk - 1) + 1, dtype=np.int64)
        th = wrap_pi(t1.b + TWO_PI * frac_multiples(t0.beta, n))
        m = np.abs(th) <= width
        sel_n.append(n[m])
        sel_t.append(th[m])
    calN = np.concatenate(sel_n)
    theta = np.concatenate(sel_t)
    if calN.size == 0:
        raise RegimeInfeasible("calN is empty", "calN nonempty")
    A_N = np.array([[1.0 + N * tau * eps, N * tau], [eps, 1.0]])
    eig = eigen_symplectic(A_N)
    C = chart_matrix(eig, kappa, tau, chi)
    Cinv = np.linalg.inv(C)
    b = Cinv[0, 0] * theta
    gap = coverage_gap(b, -10.0 * chi, 10.0 * chi)
    if check_density and gap > chi / 10.0:
        raise RegimeInfeasible(
            f"b_n max gap {gap:.4g} > chi/10 = {chi / 10:.4g} over [-10chi, 10chi]",
            "calN density")
    wf = chi if work_frac is None else work_frac
    work = np.flatnonzero(calN <= N + wf * N)
    if work.size == 0:
        work = np.arange(min(len(calN), 64))
    return Regime(chi=chi, kappa=kappa, tau=tau, eps=eps, beta=t0.beta, alpha_hat=alpha,
                  N=N, N_star=N_star, scan_length=scan, calN=calN, theta=theta, b=b,
                  eig=eig, t0=t0, t1=t1, window_factor=window_factor, eps0=eps0,
                  max_gap=gap, work=work,
                  info={"nstar_factor": nstar_factor, "q_max": q_max, "work_frac": wf})


def build_chart(regime: Regime) -> Chart:
    """Chart centred at the origin for the family F_n."""
    return Chart(chart_matrix(regime.eig, regime.kappa, regime.tau, regime.chi))


def build_reversed_chart(regime: Regime, chart: Chart | None = None) -> Chart:
    """Chart for G_n = T1 o T0^n: the F-chart composed with phi -> b - phi.

    The reflection about b / 2 reverses the family, G_n ~ psi F_n^{-1} psi,
    so in this chart G_n is close to the inverse saddle.
    """
    chart = chart or build_chart(regime)
    return Chart(chart.C, center=regime.t1.b, sign=-1.0)


class ScaledFamily:
    """F_n (order 'cs') or G_n (order 'cu') read in a chart."""

    def __init__(self, regime: Regime, chart: Chart, order: str = "cs",
                 allow_fast: bool = True):
        self.regime = regime
        self.chart = chart
        self.order = order
        self._o = 0 if order == "cs" else 1
        self.allow_fast = allow_fast

    def _eval(self, n, xi, eta, inverse):
        xi_a = np.ascontiguousarray(np.atleast_1d(np.asarray(xi, float)).ravel())
        eta_a = np.ascontiguousarray(np.atleast_1d(np.asarray(eta, float)).ravel())
        xi_a, eta_a = np.broadcast_arrays(xi_a, eta_a)
        x, y, bad = K.family_many(self.regime.t0.P0, self.regime.t1.P1, self.chart.packed,
                                  self._o, int(n), np.ascontiguousarray(xi_a),
                                  np.ascontiguousarray(eta_a), inverse, self.allow_fast)
        if bad:
            raise NewtonDivergence("family evaluation failed")
        if np.ndim(xi) == 0 and np.ndim(eta) == 0:
            return float(x[0]), float(y[0])
        shape = np.broadcast(np.asarray(xi), np.asarray(eta)).shape
        return x.reshape(shape), y.reshape(shape)

    def forward(self, n, xi, eta):
        return self._eval(n, xi, eta, False)

    def inverse(self, n, xi, eta):
        return self._eval(n, xi, eta, True)

    def word(self, ns, xi, eta, inverse=False):
        """Apply F_{ns[0]} first, then F_{ns[1]}, ...; ``inverse`` undoes that word."""
        xi_a = np.ascontiguousarray(np.atleast_1d(np.asarray(xi, float)).ravel())
        eta_a = np.ascontiguousarray(np.atleast_1d(np.asarray(eta, float)).ravel())
        x, y, bad = K.family_word_many(self.regime.t0.P0, self.regime.t1.P1,
                                       self.chart.packed, self._o,
                                       np.asarray(ns, dtype=np.int64), xi_a, eta_a,
                                       inverse, self.allow_fast)
        if bad:
            raise NewtonDivergence("family evaluation failed")
        if np.ndim(xi) == 0:
            return float(x[0]), float(y[0])
        return x, y

    def jacobian(self, n, xi, eta, h=1e-5, inverse=False):
        f = self.inverse if inverse else self.forward
        J = np.empty((2, 2))
        for k, (dx, dy) in enumerate(((h, 0.0), (0.0, h))):
            p = np.array(f(n, xi + dx, eta + dy))
            m = np.array(f(n, xi - dx, eta - dy))
            J[:, k] = (p - m) / (2 * h)
        return J


def scaled_map(regime: Regime, chart: Chart, n: int, zeta):
    """C^{-1} o F_n o C at zeta = (xi, eta)."""
    return ScaledFamily(regime, chart).forward(n, zeta[0], zeta[1])


def scaled_residual(regime: Regime, chart: Chart, n: int, grid: int = 21):
    """Sup norms (C0, C1) of F_n - (b_n, 0) - diag(1 - chi, 1 + chi) on [-1, 1]^2."""
    fam = ScaledFamily(regime, chart)
    s = np.linspace(-1, 1, grid)
    X, Y = np.meshgrid(s, s)
    x1, y1 = fam.forward(n, X, Y)
    bn = regime.b_of(n)
    chi = regime.chi
    c0 = max(np.abs(x1 - bn - (1 - chi) * X).max(), np.abs(y1 - (1 + chi) * Y).max())
    c1 = 0.0
    target = np.diag([1 - chi, 1 + chi])
    for xi, eta in zip(X.ravel()[::7], Y.ravel()[::7]):
        c1 = max(c1, np.abs(fam.jacobian(n, xi, eta, h=1e-4) - target).max())
    return float(c0), float(c1)


def nearest_in_calN(regime: Regime, target: int | None = None,
                    b_range: tuple | None = None) -> int:
    """Element of calN closest to ``target`` (default N), optionally with b_n in b_range."""
    target = regime.N if target is None else target
    ok = np.ones(len(regime.calN), bool)
    if b_range is not None:
        ok = (regime.b > b_range[0]) & (regime.b < b_range[1])
        if not ok.any():
            raise KeyError(f"no return time with b_n in {b_range}")
    cand = regime.calN[ok]
    return int(cand[np.argmin(np.abs(cand - target))])


# --------------------------------------------------------------------------
# Fourier-Taylor series and Birkhoff normal form

@dataclass
class FourierTaylor:
    """h(phi, J) = sum_{j, l} c[j, l + L] e^{i l phi} J^j for 0 <= j <= order, |l| <= L."""

    c: np.ndarray

    @classmethod
    def zeros(cls, order: int, L: int) -> "FourierTaylor":
        return cls(np.zeros((order + 1, 2 * L + 1), dtype=complex))

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def L(self) -> int:
        return (self.c.shape[1] - 1) // 2

    def coef(self, j: int, l: int) -> complex:
        return complex(self.c[j, l + self.L])

    def set(self, j: int, l: int, value: complex):
        self.c[j, l + self.L] = value

    def add_real_harmonic(self, j: int, l: int, cos_coef: float = 0.0, sin_coef: float = 0.0):
        """Add cos_coef cos(l phi) J^j + sin_coef sin(l phi) J^j."""
        if l == 0:
            self.c[j, self.L] += cos_coef
            return self
        z = 0.5 * (cos_coef - 1j * sin_coef)
        self.c[j, l + self.L] += z
        self.c[j, -l + self.L] += np.conj(z)
        return self

    def copy(self) -> "FourierTaylor":
        return FourierTaylor(self.c.copy())

    def _modes(self):
        return np.arange(-self.L, self.L + 1)

    def evaluate(self, phi, J, d_phi: int = 0, d_J: int = 0):
        phi = np.asarray(phi)
        J = np.asarray(J)
        nz = np.flatnonzero(np.any(self.c != 0, axis=0))
        shape = np.broadcast(phi, J).shape
        out = np.zeros(shape, dtype=complex)
        if nz.size == 0:
            return out
        l = self._modes()[nz]
        E = np.exp(1j * np.multiply.outer(phi, l)) * (1j * l) ** d_phi
        rows = E @ self.c[:, nz].T  # shape (..., order + 1)
        top = int(np.flatnonzero(np.any(self.c != 0, axis=1)).max())
        for j in range(top, d_J - 1, -1):
            out = out * J + math.perm(j, d_J) * rows[..., j]
        return out

    def angle_dependent_norm(self, j: int) -> float:
        row = self.c[j].copy()
        row[self.L] = 0.0
        return float(np.abs(row).max())

    def to_json(self, tol: float = 0.0) -> list:
        out = []
        for j in range(self.order + 1):
            for l in range(-self.L, self.L + 1):
                z = self.c[j, l + self.L]
                if abs(z) > tol:
                    out.append([int(l), int(j), float(z.real), float(z.imag)])
        return out

    @classmethod
    def from_json(cls, items, order: int, L: int) -> "FourierTaylor":
        ft = cls.zeros(order, L)
        for l, j, re, im in items:
            ft.c[int(j), int(l) + L] = complex(re, im)
        return ft


@dataclass
class GeneratingSeries:
    """Exact symplectic map with S(phi, J') = phi J' + angle J' + h(phi, J')."""

    angle: float
    h: FourierTaylor


def t0_generating_series(t0: T0Map, order: int = 12, L: int = 32) -> GeneratingSeries:
    h = FourierTaylor.zeros(order, L)
    h.add_real_harmonic(2, 0, 0.5 * t0.tau)
    h.add_real_harmonic(3, 1, cos_coef=t0.mu3)
    return GeneratingSeries(t0.angle, h)


def _newton(f, x0, df=None, max_iter=60, h=1e-7):
    """Vectorised complex Newton iteration run to machine precision.

    ``df`` is the derivative; without it a central difference is used, which
    is accurate because f is analytic.
    """
    x = np.array(x0, dtype=complex)
    prev = np.inf
    for it in range(max_iter):
        fx = f(x)
        d = df(x) if df is not None else (f(x + h) - f(x - h)) / (2 * h)
        step = fx / d
        x = x - step
        size = float(np.max(np.abs(step) / (1 + np.abs(x))))
        if size <= 1e-17 or (size >= prev and size < 1e-13):
            return x
        prev = size
    if np.all(np.isfinite(x)) and prev < 1e-13:
        return x
    raise NewtonDivergence("series map Newton iteration did not converge")


class _SeriesMap:
    """Map generated by (angle, h) evaluated on complex arrays."""

    def __init__(self, gs: GeneratingSeries):
        self.gs = gs

    def forward(self, phi, J):
        h = self.gs.h
        Jp = _newton(lambda x: x + h.evaluate(phi, x, d_phi=1) - J, J,
                     lambda x: 1 + h.evaluate(phi, x, d_phi=1, d_J=1))
        return phi + self.gs.angle + h.evaluate(phi, Jp, d_J=1), Jp

    def inverse(self, phi1, J1):
        h = self.gs.h
        phi = _newton(lambda x: x + self.gs.angle + h.evaluate(x, J1, d_J=1) - phi1,
                      phi1 - self.gs.angle,
                      lambda x: 1 + h.evaluate(x, J1, d_phi=1, d_J=1))
        return phi, J1 + h.evaluate(phi, J1, d_phi=1)


class _Transform:
    """Near-identity change of variables generated by W = phi Jn + w(phi, Jn)."""

    def __init__(self, w: FourierTaylor):
        self.w = w

    def forward(self, phi, J):
        w = self.w
        Jn = _newton(lambda x: x + w.evaluate(phi, x, d_phi=1) - J, J,
                     lambda x: 1 + w.evaluate(phi, x, d_phi=1, d_J=1))
        return phi + w.evaluate(phi, Jn, d_J=1), Jn

    def inverse(self, phin, Jn):
        w = self.w
        phi = _newton(lambda x: x + w.evaluate(x, Jn, d_J=1) - phin, phin,
                      lambda x: 1 + w.evaluate(x, Jn, d_phi=1, d_J=1))
        return phi, Jn + w.evaluate(phi, Jn, d_phi=1)


class _Conjugated:
    """Psi o M o Psi^{-1} for a list of transforms applied in order."""

    def __init__(self, base, transforms):
        self.base = base
        self.transforms = list(transforms)

    def forward(self, phi, J):
        for t in reversed(self.transforms):
            phi, J = t.inverse(phi, J)
        phi, J = self.base.forward(phi, J)
        for t in self.transforms:
            phi, J = t.forward(phi, J)
        return phi, J


def extract_series(M, angle: float, order: int, L: int, rho: float = 0.2,
                   n_phi: int | None = None, n_J: int = 48) -> FourierTaylor:
    """Generating-function coefficients of a map given as a callable on complex arrays."""
    n_phi = n_phi or 4 * L
    phi = TWO_PI * np.arange(n_phi) / n_phi
    theta = TWO_PI * np.arange(n_J) / n_J
    Jp = rho * np.exp(1j * theta)
    P, JP = np.meshgrid(phi, Jp, indexing="ij")
    # find J with M(phi, J)_J = J'
    J = _newton(lambda x: M.forward(P, x)[1] - JP, JP)
    phi1, _ = M.forward(P, J)
    dJ = phi1 - P - angle  # h_{J'}(phi, J')
    F = np.fft.fft(dJ, axis=0) / n_phi          # Fourier in phi
    T = np.fft.fft(F, axis=1) / n_J             # e^{-i j theta} sums
    # T[l, j] = rho^j * coefficient of J'^j; FFT sign gives e^{-i l phi} -> reorder
    out = FourierTaylor.zeros(order, L)
    for j in range(order):
        col = T[:, j] / rho ** j
        for l in range(-L, L + 1):
            out.c[j + 1, l + L] = col[l % n_phi] / (j + 1)
    return out


@dataclass
class BNFResult:
    series: GeneratingSeries
    transforms: list
    twist: list
    residual: float
    map: object = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {
            "angle": self.series.angle,
            "series": self.series.h.to_json(),
            "transforms": [w.to_json() for w in self.transforms],
            "twist": self.twist,
            "residual": self.residual,
        }


def bnf_reduce(series: GeneratingSeries, k: int, divisor_floor: float = 1e-8,
               rho: float = 0.2) -> BNFResult:
    """Remove angle dependence of the generating function up to order J'^(k+2).

    Step m solves s(phi + angle) - s(phi) = -Q_m(phi) with
    s^[l] = Q_m^[l] / (1 - e^{i l angle}) and conjugates by W = phi Jn + s Jn^m.
    """
    h0 = series.h
    order, L = h0.order, h0.L
    if k + 2 > order:
        raise ValueError("k + 2 exceeds the Taylor order of the series")
    base = _SeriesMap(series)
    transforms: list[_Transform] = []
    ws: list[FourierTaylor] = []
    current = h0.copy()
    l = np.arange(-L, L + 1)
    denom = 1.0 - np.exp(1j * l * series.angle)
    for m in range(3, k + 3):
        Q = current.c[m].copy()
        Q[L] = 0.0
        if np.abs(Q).max() == 0.0:
            continue
        active = (l != 0) & (np.abs(Q) > 0)
        small = active & (np.abs(denom) < divisor_floor)
        if np.any(small):
            bad = int(l[small][0])
            raise SmallDivisorBlowup(f"|1 - exp(i l angle)| < {divisor_floor} at l = {bad}")
        s = np.zeros_like(Q)
        s[active] = Q[active] / denom[active]
        w = FourierTaylor.zeros(order, L)
        w.c[m] = s
        ws.append(w)
        transforms.append(_Transform(w))
        current = extract_series(_Conjugated(base, transforms), series.angle, order, L, rho)
    residual = max((current.angle_dependent_norm(j) for j in range(3, k + 3)), default=0.0)
    twist = [float((j + 1) * current.coef(j + 1, 0).real) for j in range(1, k + 2)]
    result_map = _Conjugated(base, transforms)
    return BNFResult(GeneratingSeries(series.angle, current), ws, twist, residual, result_map)


def undo_transform(result: BNFResult, order: int | None = None, rho: float = 0.2) -> FourierTaylor:
    """Series of Psi^{-1} o (normal form map) o Psi, which should equal the input."""
    nf = _SeriesMap(result.series)
    trans = [_Transform(w) for w in result.transforms]

    class _Back:
        def forward(self, phi, J):
            for t in trans:
                phi, J = t.forward(phi, J)
            phi, J = nf.forward(phi, J)
            for t in reversed(trans):
                phi, J = t.inverse(phi, J)
            return phi, J

    h = result.series.h
    return extract_series(_Back(), result.series.angle, order or h.order, h.L, rho)


# --------------------------------------------------------------------------
# critical curve of the kick

@dataclass
class CriticalCurve:
    J: np.ndarray
    phi_star: np.ndarray
    a: np.ndarray


def critical_curve(kick, J_grid, phi_guess: float = 0.0, h: float = 1e-6,
                   tol: float = 1e-14, min_slope: float = 1e-14) -> CriticalCurve:
    """Zeros phi*(J) of the kick kick(phi, J) near phi_guess and slopes a(J)."""
    J_grid = np.asarray(J_grid, dtype=float)
    phis, slopes = [], []
    for J in J_grid:
        phi = phi_guess
        for _ in range(60):
            f = kick(phi, J)
            d = (kick(phi + h, J) - kick(phi - h, J)) / (2 * h)
            if not abs(d) > min_slope:
                raise NoTransverseZero(f"kick slope vanishes near phi = {phi} at J = {J}")
            step = f / d
            phi -= step
            if abs(step) <= tol * (1 + abs(phi)):
                break
        else:
            raise NoTransverseZero(f"no convergence at J = {J}")
        if abs(wrap_pi(phi - phi_guess)) > 0.5 * math.pi:
            raise NoTransverseZero(f"zero wandered to phi = {phi} at J = {J}")
        a = (kick(phi + h, J) - kick(phi - h, J)) / (2 * h)
        phis.append(phi)
        slopes.append(a)
    return CriticalCurve(J_grid, np.array(phis), np.array(slopes))


def t1_kick(t1: T1Map):
    """J-displacement of T1 as a function of (phi, J)."""
    return lambda phi, J: t1(phi, J)[1] - J
