"""The two exact symplectic twist maps T0, T1 of the annulus and their words.

T0 comes from the generating function
    S0(phi, J') = phi J' + 2 pi beta J' + tau J'^2 / 2 + mu3 J'^3 cos(phi)
so that J = J' - mu3 J'^3 sin(phi) (solved by Newton) and
phi' = phi + 2 pi beta + tau J' + 3 mu3 J'^2 cos(phi).

T1 is a kick followed by a twist:
    J' = J + eps sin(phi),  phi' = phi + B'(J'),  B'(J') = b0 + b1 J' + ...

Angles are radians, reduced to [0, 2 pi) after every application.  A rotation
number beta in [0, 1) therefore rotates by 2 pi beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels as K
from .arithmetic import RotationNumber
from .errors import LeftDomain, NewtonDivergence, NotHyperbolic, RegimeViolation

TWO_PI = 2.0 * math.pi


class AnnulusPoint(NamedTuple):
    """A point (phi, J) of T x [-1, 1] with phi in [0, 2 pi)."""

    phi: float
    J: float

    @classmethod
    def make(cls, phi, J):
        return cls(float(K.wrap_2pi(float(phi))), float(J))


def wrap_pi(x):
    """Reduce angles to (-pi, pi]."""
    return np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi


# --------------------------------------------------------------------------
# map parameters and map handles

@dataclass(frozen=True)
class T0Spec:
    beta: RotationNumber | float
    tau: float
    mu3: float = 0.05
    newton_tol: float = 1e-14
    max_iter: int = 50
    fast_tol: float = 1e-15


@dataclass(frozen=True)
class T1Spec:
    eps: float
    btilde: tuple = (0.3, 0.1)


class _Map:
    """Shared vectorised evaluation through the run kernels."""

    P0: np.ndarray
    P1: np.ndarray
    symbol: int

    def _run(self, phi, J, count):
        syms = np.array([self.symbol], dtype=np.int8)
        counts = np.array([abs(count)], dtype=np.int64)
        phi_a = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
        J_a = np.atleast_1d(np.asarray(J, dtype=float)).ravel()
        phi_a, J_a = np.broadcast_arrays(phi_a, J_a)
        fn = K.apply_runs_many if count >= 0 else K.apply_runs_inverse_many
        p, j, st = fn(self.P0, self.P1, syms, counts, np.ascontiguousarray(phi_a),
                      np.ascontiguousarray(J_a), True)
        if np.any(st == K.NEWTON_FAIL):
            raise NewtonDivergence("implicit step did not converge")
        if np.ndim(phi) == 0 and np.ndim(J) == 0:
            return float(p[0]), float(j[0])
        shape = np.broadcast(np.asarray(phi), np.asarray(J)).shape
        return p.reshape(shape), j.reshape(shape)

    def __call__(self, phi, J):
        return self._run(phi, J, 1)

    def inverse(self, phi, J):
        return self._run(phi, J, -1)

    def power(self, phi, J, k: int):
        return self._run(phi, J, int(k))


_DUMMY1 = np.zeros(K.P1_SIZE)
_DUMMY0 = np.zeros(K.P0_SIZE)


class T0Map(_Map):
    """Handle for T0.  ``kind`` is 'genfun' or 'frequency' (integrable)."""

    symbol = 0

    def __init__(self, P0: np.ndarray, beta: RotationNumber, kind: str):
        self.P0 = P0
        self.P1 = _DUMMY1
        self.beta = beta
        self.kind = kind

    @property
    def angle(self) -> float:
        return float(self.P0[3])

    @property
    def tau(self) -> float:
        return float(self.P0[4])

    @property
    def mu3(self) -> float:
        return float(self.P0[5])

    def describe(self) -> dict:
        d = {"kind": self.kind, "beta": str(self.beta.mp), "tau": self.tau}
        if self.kind == "genfun":
            d.update(mu3=self.mu3, newton_tol=float(self.P0[6]),
                     max_iter=int(self.P0[7]), fast_tol=float(self.P0[10]))
        else:
            d.update(A=float(self.P0[8]), G0=float(self.P0[9]))
        return d


class T1Map(_Map):
    """Handle for T1 (kick then twist)."""

    symbol = 1

    def __init__(self, P1: np.ndarray, kind: str):
        self.P0 = _DUMMY0
        self.P1 = P1
        self.kind = kind

    @property
    def eps(self) -> float:
        return float(self.P1[1])

    @property
    def b(self) -> float:
        """Angle shift at the origin: T1(0, 0) = (b, 0)."""
        return float(self.P1[2])

    @property
    def b1(self) -> float:
        """Derivative of the rotation at J' = 0."""
        if self.kind == "frequency":
            A, G0 = self.P1[3], self.P1[4]
            return float(4.0 * A / G0 ** 5)
        return float(self.P1[6]) if self.P1[5] >= 1 else 0.0

    def describe(self) -> dict:
        d = {"kind": self.kind, "eps": self.eps, "b": self.b}
        if self.kind == "frequency":
            d.update(A=float(self.P1[3]), G0=float(self.P1[4]))
        else:
            d["btilde"] = [self.b] + [float(c) for c in self.P1[6:6 + int(self.P1[5])]]
        return d


def make_t0(spec: T0Spec, check_grid: bool = True) -> T0Map:
    """Build T0 from its generating function; Newton convergence is checked on a grid."""
    beta = RotationNumber.from_value(spec.beta)
    P0 = np.zeros(K.P0_SIZE)
    P0[0] = 0.0
    P0[1], P0[2] = beta.hi, beta.lo
    P0[3] = TWO_PI * beta.value
    P0[4] = spec.tau
    P0[5] = spec.mu3
    P0[6] = spec.newton_tol
    P0[7] = spec.max_iter
    P0[10] = spec.fast_tol
    t0 = T0Map(P0, beta, "genfun")
    if check_grid:
        phi, J = np.meshgrid(np.linspace(0, TWO_PI, 32, endpoint=False),
                             np.linspace(-1, 1, 17))
        t0(phi, J)  # raises NewtonDivergence
        t0.inverse(phi, J)
    return t0


def make_t1(spec: T1Spec) -> T1Map:
    coeffs = list(spec.btilde)
    if len(coeffs) > 5:
        raise ValueError("at most four non-constant rotation coefficients")
    P1 = np.zeros(K.P1_SIZE)
    P1[0] = 0.0
    P1[1] = spec.eps
    P1[2] = coeffs[0]
    P1[5] = len(coeffs) - 1
    P1[6:6 + len(coeffs) - 1] = coeffs[1:]
    return T1Map(P1, "poly")


def make_frequency_twist(A: float, G0: float, beta: RotationNumber | None = None) -> T0Map:
    """Integrable twist (phi + omega(G0 + J), J) with omega(G) = -A / G**4.

    ``beta`` optionally supplies omega(G0) / 2 pi mod 1 at extended precision.
    """
    omega0 = -A / G0 ** 4
    if beta is None:
        beta = RotationNumber.from_value(math.fmod(omega0 / TWO_PI, 1.0) % 1.0)
    P0 = np.zeros(K.P0_SIZE)
    P0[0] = 1.0
    P0[1], P0[2] = beta.hi, beta.lo
    P0[3] = TWO_PI * beta.value
    P0[4] = 4.0 * A / G0 ** 5
    P0[8], P0[9] = A, G0
    P0[6], P0[7], P0[10] = 1e-14, 50, 1e-15
    return T0Map(P0, beta, "frequency")


def make_frequency_kick(eps: float, A: float, G0: float) -> T1Map:
    """Kick eps sin(phi) followed by the rotation omega(G0 + J')."""
    P1 = np.zeros(K.P1_SIZE)
    P1[0] = 1.0
    P1[1] = eps
    P1[2] = -A / G0 ** 4
    P1[3], P1[4] = A, G0
    return T1Map(P1, "frequency")


# --------------------------------------------------------------------------
# words

def rle_encode(word: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Run-length encode a 0/1 word into (symbols, counts)."""
    w = np.asarray(word, dtype=np.int8).ravel()
    if w.size == 0:
        return np.zeros(0, np.int8), np.zeros(0, np.int64)
    if np.any((w != 0) & (w != 1)):
        raise ValueError("symbols must be 0 or 1")
    edges = np.flatnonzero(np.diff(w)) + 1
    starts = np.concatenate([[0], edges])
    counts = np.diff(np.concatenate([starts, [w.size]]))
    return w[starts].astype(np.int8), counts.astype(np.int64)


def rle_decode(syms, counts) -> np.ndarray:
    return np.repeat(np.asarray(syms, dtype=np.int8), np.asarray(counts, dtype=np.int64))


def as_runs(word) -> tuple[np.ndarray, np.ndarray]:
    """Accept a plain word, a (symbols, counts) pair or a list of [symbol, count]."""
    if isinstance(word, tuple) and len(word) == 2 and np.ndim(word[0]) == 1 \
            and np.ndim(word[1]) == 1:
        return np.asarray(word[0], np.int8), np.asarray(word[1], np.int64)
    arr = np.asarray(word)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0].astype(np.int8), arr[:, 1].astype(np.int64)
    return rle_encode(arr)


def family_runs(n: int, order: str = "cs") -> tuple[np.ndarray, np.ndarray]:
    """Runs for F_n = T0^n o T1 ('cs') or G_n = T1 o T0^n ('cu')."""
    if order == "cs":
        return np.array([1, 0], np.int8), np.array([1, n], np.int64)
    return np.array([0, 1], np.int8), np.array([n, 1], np.int64)


def compose_word(t0: T0Map, t1: T1Map, word, z, allow_fast: bool = True) -> AnnulusPoint:
    """Apply a word to z, first symbol first.  Raises LeftDomain(step)."""
    syms, counts = as_runs(word)
    phi, J = float(z[0]), float(z[1])
    p, j, st, step = K.apply_runs(t0.P0, t1.P1, syms, counts, phi, J, True, allow_fast)
    if st == K.LEFT_DOMAIN:
        raise LeftDomain(f"orbit left the annulus at step {step}", step=int(step))
    if st == K.NEWTON_FAIL:
        raise NewtonDivergence(f"Newton failed at step {step}")
    return AnnulusPoint(float(p), float(j))


def compose_word_inverse(t0: T0Map, t1: T1Map, word, z, allow_fast: bool = True) -> AnnulusPoint:
    """Apply the inverse of a word to z."""
    syms, counts = as_runs(word)
    p, j, st, step = K.apply_runs_inverse(t0.P0, t1.P1, syms, counts, float(z[0]),
                                          float(z[1]), allow_fast)
    if st != K.OK:
        raise NewtonDivergence("inverse Newton step failed")
    return AnnulusPoint(float(p), float(j))


def compose_many(t0: T0Map, t1: T1Map, word, phi, J, inverse=False, allow_fast=True):
    """Vectorised word application; returns arrays (phi, J)."""
    syms, counts = as_runs(word)
    phi = np.ascontiguousarray(np.asarray(phi, dtype=float).ravel())
    J = np.ascontiguousarray(np.asarray(J, dtype=float).ravel())
    fn = K.apply_runs_inverse_many if inverse else K.apply_runs_many
    p, j, st = fn(t0.P0, t1.P1, syms, counts, phi, J, allow_fast)
    if np.any(st != K.OK):
        raise NewtonDivergence("word evaluation failed")
    return p, j


# --------------------------------------------------------------------------
# affine model of F_n = T0^n o T1 near the origin

@dataclass(frozen=True)
class AffineModel:
    """A_n z + b_n: the affine model of T0^n o T1 at the origin."""

    A: np.ndarray
    b: np.ndarray
    n: int
    residual_constants: dict = field(default_factory=dict)

    def __call__(self, phi, J):
        phi = np.asarray(phi, dtype=float)
        J = np.asarray(J, dtype=float)
        return (self.b[0] + self.A[0, 0] * phi + self.A[0, 1] * J,
                self.b[1] + self.A[1, 0] * phi + self.A[1, 1] * J)


def theta_n(t0: T0Map, t1: T1Map, n) -> np.ndarray:
    """Angle of F_n(0, 0) = (b + 2 pi n beta, 0) reduced to (-pi, pi]."""
    from .arithmetic import frac_multiples
    f = frac_multiples(t0.beta, np.asarray(n))
    return wrap_pi(t1.b + TWO_PI * f)


def affine_model(t0: T0Map, t1: T1Map, n: int) -> AffineModel:
    eps, tau = t1.eps, t0.tau
    if n < 0:
        raise ValueError("n must be non-negative")
    if eps > 0 and n > 1.0 / (4.0 * eps):
        raise RegimeViolation(f"n = {n} exceeds 1/(4 eps) = {1 / (4 * eps):.6g}")
    A = np.array([[1.0 + n * tau * eps, n * tau], [eps, 1.0]])
    b = np.array([float(theta_n(t0, t1, n)), 0.0])
    consts = {
        # envelopes of F_n - A_n z - b_n on |phi| <= sqrt(l), |J| <= l / 2
        "phi": "n*tau*eps*phi**3/6 + |b1|*|J| + n*3*|mu3|*J**2",
        "J": "eps*|phi|**3/6",
    }
    return AffineModel(A, b, int(n), consts)


@dataclass(frozen=True)
class EigenData:
    lam: float
    v: float
    w: float
    x: float  # n tau eps

    @property
    def eigenvectors(self) -> np.ndarray:
        return np.array([[1.0, 1.0], [self.v, self.w]])


def eigen_symplectic(A) -> EigenData:
    """Contracting eigenvalue of [[1 + x, n tau], [eps, 1]] and eigen-slopes.

    Returns lam < 1 with eigenvector (1, v) and the expanding eigenvector
    (1, w) for 1 / lam.  Works on the matrix entries directly so that tiny
    n tau eps stays accurate.
    """
    A = np.asarray(A, dtype=float)
    if abs(np.linalg.det(A) - 1.0) > 1e-9:
        raise ValueError("matrix is not area preserving")
    if A[1, 1] != 1.0:
        tr = A[0, 0] + A[1, 1]
        if tr <= 2.0:
            raise NotHyperbolic(f"trace {tr} <= 2")
        disc = math.sqrt(tr * tr - 4.0)
        lam = 0.5 * (tr - disc)
        v = (lam - A[0, 0]) / A[0, 1]
        w = (1.0 / lam - A[0, 0]) / A[0, 1]
        return EigenData(lam, v, w, tr - 2.0)
    x = A[0, 0] - 1.0
    if x <= 0.0:
        raise NotHyperbolic(f"trace {2.0 + x} <= 2")
    root = math.sqrt(x * (4.0 + x))
    lam = 1.0 + 0.5 * x - 0.5 * root
    ntau = A[0, 1]
    v = -(x + root) / (2.0 * ntau)
    w = (root - x) / (2.0 * ntau)
    return EigenData(lam, v, w, x)


def affine_residual(t0: T0Map, t1: T1Map, n: int, ell: float | None = None,
                    grid: int = 41) -> float:
    """sup of |F_n(z) - (A_n z + b_n)| over |phi| <= sqrt(ell), |J| <= ell / 2.

    ``ell`` defaults to 1 / n so the rectangle shrinks as n grows.  The angle
    difference is reduced to (-pi, pi].
    """
    model = affine_model(t0, t1, n)
    ell = 1.0 / max(n, 1) if ell is None else ell
    P, Q = np.meshgrid(np.linspace(-math.sqrt(ell), math.sqrt(ell), grid),
                       np.linspace(-ell / 2, ell / 2, grid))
    p, q = compose_many(t0, t1, [[1, 1], [0, n]] if n else [[1, 1]], P.ravel(), Q.ravel())
    ap, aq = model(P.ravel(), Q.ravel())
    return float(max(np.abs(wrap_pi(p - ap)).max(), np.abs(q - aq).max()))


# --------------------------------------------------------------------------
# finite-difference Jacobians

def fd_jacobian(f, z, h: float = 1e-4, scale=(1.0, 1.0), wrap_angle: bool = True):
    """Fourth-order central-difference Jacobian of f at z, in scaled coordinates.

    With scale = (s0, s1) the map is conjugated by diag(s0, s1), which leaves
    the determinant unchanged and balances badly scaled entries.
    """
    s = np.asarray(scale, dtype=float)
    z = np.asarray(z, dtype=float)
    jac = np.empty((2, 2))
    for k in range(2):
        dz = np.zeros(2)
        dz[k] = h * s[k]
        vals = []
        for m in (2, 1, -1, -2):
            vals.append(np.asarray(f(*(z + m * dz)), dtype=float))
        d1 = vals[1] - vals[2]
        d2 = vals[0] - vals[3]
        if wrap_angle:
            d1[0] = float(wrap_pi(d1[0]))
            d2[0] = float(wrap_pi(d2[0]))
        jac[:, k] = (8.0 * d1 - d2) / (12.0 * h) / s
    return jac


def fd_det(f, z, h: float = 1e-4, scale=(1.0, 1.0), wrap_angle: bool = True) -> float:
    return float(np.linalg.det(fd_jacobian(f, z, h, scale, wrap_angle)))
