"""Restricted three-body problem near parabolic infinity.

McGehee coordinates (x, y, beta, G) with r = 2 / x**2, radial velocity y,
angular momentum G and beta = alpha - t the polar angle measured in the
frame rotating with the mean motion of the primaries.  Time has period 2 pi.

Besides the vector field and integrator the module holds closed-form models
of the two scattering maps of the parabolic cylinder, their transversality
amplitude, the B0/B1 gap estimate, the drift controller and a wrapper that
turns the model maps into twist-map handles for the blender machinery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numba import njit
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .arithmetic import RotationNumber, continued_fraction, diophantine_constant
from .errors import BudgetExhausted, NearCollision, StepUnderflow
from .twist_maps import make_frequency_kick, make_frequency_twist

TWO_PI = 2.0 * math.pi
COLLISION_FLOOR = 1e-6


# --------------------------------------------------------------------------
# primaries

def true_anomaly(t, zeta):
    """True anomaly f(t) with f(0) = 0 and unit mean motion (Kepler's equation)."""
    t = np.asarray(t, dtype=float)
    if zeta == 0.0:
        return t.copy() if t.ndim else float(t)
    M = t - TWO_PI * np.round(t / TWO_PI)
    E = M + zeta * np.sin(M)
    for _ in range(30):
        dE = (E - zeta * np.sin(E) - M) / (1.0 - zeta * np.cos(E))
        E = E - dE
        if np.all(np.abs(dE) < 1e-15):
            break
    f = 2.0 * np.arctan2(math.sqrt(1.0 + zeta) * np.sin(E / 2), math.sqrt(1.0 - zeta) * np.cos(E / 2))
    f = f + (t - M)
    return f if f.ndim else float(f)


def primaries(f, mu, zeta):
    """Positions of the masses 1 - mu and mu at true anomaly f."""
    rho = (1.0 - zeta * zeta) / (1.0 + zeta * math.cos(f))
    u = np.array([math.cos(f), math.sin(f)])
    return mu * rho * u, -(1.0 - mu) * rho * u


# --------------------------------------------------------------------------
# state and vector field

@dataclass(frozen=True)
class McGeheeState:
    x: float
    y: float
    beta: float
    G: float
    t: float = 0.0

    def __post_init__(self):
        if not self.x >= 0.0:
            raise ValueError(f"x = {self.x} must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.beta, self.G])

    @property
    def r(self) -> float:
        return math.inf if self.x == 0.0 else 2.0 / self.x ** 2

    @classmethod
    def from_array(cls, z, t=0.0) -> "McGeheeState":
        return cls(float(z[0]), float(z[1]), float(z[2]), float(z[3]), float(t))


def _potential_parts(x, alpha, f, mu, zeta, perturb=True):
    """Return (V, dU/dr, dU/dalpha) at the configuration point.

    V = U - 1/r is formed without cancellation of the Kepler term.
    """
    r = 2.0 / (x * x)
    e = np.array([math.cos(alpha), math.sin(alpha)])
    q = r * e
    if not perturb:
        return 0.0, -1.0 / (r * r), 0.0
    V = 0.0
    grad = np.zeros(2)
    for m, p in zip((1.0 - mu, mu), primaries(f, mu, zeta)):
        d_vec = q - p
        d = math.hypot(d_vec[0], d_vec[1])
        if d < COLLISION_FLOOR:
            raise NearCollision(f"distance {d:.3g} to a primary below {COLLISION_FLOOR}")
        # m/d - m/r = m (r^2 - d^2) / (r d (r + d))
        V += m * (2.0 * (q @ p) - p @ p) / (r * d * (r + d))
        grad -= m * d_vec / d ** 3
    dUdr = grad @ e
    dUda = r * (grad @ np.array([-e[1], e[0]]))
    return V, dUdr, dUda


def mcgehee_field(state, mu, zeta, f=None, perturb=True) -> np.ndarray:
    """Time derivative of (x, y, beta, G) at ``state``.

    ``f`` is the true anomaly at state.t; it is solved from Kepler's
    equation when omitted.  ``perturb=False`` drops the primaries' structure
    and leaves the Kepler problem.
    """
    if isinstance(state, McGeheeState):
        x, y, beta, G, t = state.x, state.y, state.beta, state.G, state.t
    else:
        x, y, beta, G, t = state
    if x == 0.0:
        return np.array([0.0, 0.0, -1.0, 0.0])
    if f is None:
        f = true_anomaly(t, zeta)
    _, dUdr, dUda = _potential_parts(x, beta + t, f, mu, zeta, perturb)
    x3 = x ** 3
    return np.array([
        -0.25 * x3 * y,
        0.125 * G * G * x3 * x3 + dUdr,
        0.25 * G * x3 * x - 1.0,
        dUda,
    ])


def potential_remainder(x, phi, mu, zeta=0.0, t=0.0):
    """V(x, alpha, t) = U - x**2 / 2 at alpha = phi + t."""
    return _potential_parts(x, phi + t, true_anomaly(t, zeta), mu, zeta)[0]


def hamiltonian(state, mu, zeta, f=None) -> float:
    """y**2/2 - x**2/2 + G**2 x**4 / 8 - V."""
    x, y, beta, G, t = (state.x, state.y, state.beta, state.G, state.t) \
        if isinstance(state, McGeheeState) else state
    if x == 0.0:
        return 0.5 * y * y
    if f is None:
        f = true_anomaly(t, zeta)
    V = _potential_parts(x, beta + t, f, mu, zeta)[0]
    return 0.5 * y * y - 0.5 * x * x + G * G * x ** 4 / 8.0 - V


def jacobi(state, mu, f=None) -> float:
    """H - G, conserved at zeta = 0 (uniformly rotating primaries)."""
    G = state.G if isinstance(state, McGeheeState) else state[3]
    return hamiltonian(state, mu, 0.0, f) - G


def jacobi_gradient(state, mu) -> np.ndarray:
    """Analytic gradient of H - G in (x, y, beta, G) at zeta = 0.

    With the primaries rotating uniformly V depends on beta only, so there
    is no explicit time dependence in these coordinates.
    """
    x, y, beta, G, t = (state.x, state.y, state.beta, state.G, state.t) \
        if isinstance(state, McGeheeState) else state
    _, dUdr, dUda = _potential_parts(x, beta + t, t, mu, 0.0)
    # dV/dx = dU/dr * dr/dx - x with dr/dx = -4 / x**3
    dVdx = -4.0 * dUdr / x ** 3 - x
    return np.array([
        -x + 0.5 * G * G * x ** 3 - dVdx,
        y,
        -dUda,
        0.25 * G * x ** 4 - 1.0,
    ])


# --------------------------------------------------------------------------
# integration

@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray            # shape (len(t), 4): x, y, beta, G
    sol: object = None            # dense output
    t_events: list = field(default_factory=list)
    y_events: list = field(default_factory=list)
    mu: float = 0.0
    zeta: float = 0.0
    tol: float = 0.0

    def state(self, i=-1) -> McGeheeState:
        return McGeheeState.from_array(self.states[i], self.t[i])

    def __call__(self, t) -> np.ndarray:
        return self.sol(t)[:4]

    def rows(self):
        return np.column_stack([self.t, self.states])


def integrate(state0: McGeheeState, t_span, tol=1e-11, mu=0.3, zeta=0.0, events=None,
              perturb=True, dense=True, max_step=np.inf, t_eval=None) -> Trajectory:
    """Adaptive DOP853 integration of the McGehee field.

    The true anomaly is integrated alongside the state from its differential
    equation, so the primaries are exact at any zeta < 1.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol = {tol} outside [1e-13, 1e-6]")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if state0.t != t0:
        raise ValueError("state0.t must equal t_span[0]")
    s = (1.0 - zeta * zeta) ** -1.5

    def rhs(t, z):
        dz = np.empty(5)
        if z[0] < 0.0:
            z = z.copy()
            z[0] = 0.0
        dz[:4] = mcgehee_field((z[0], z[1], z[2], z[3], t), mu, zeta, f=z[4], perturb=perturb)
        dz[4] = (1.0 + zeta * math.cos(z[4])) ** 2 * s
        return dz

    z0 = np.append(state0.as_array(), true_anomaly(t0, zeta))
    sol = solve_ivp(rhs, (t0, t1), z0, method="DOP853", rtol=tol, atol=tol * 1e-3,
                    events=events, dense_output=dense, max_step=max_step, t_eval=t_eval)
    if sol.status == -1:
        if "step size" in sol.message.lower():
            raise StepUnderflow(sol.message)
        raise NearCollision(sol.message)
    return Trajectory(t=sol.t, states=sol.y[:4].T.copy(), sol=sol.sol,
                      t_events=list(sol.t_events or []),
                      y_events=[ye[:, :4] for ye in (sol.y_events or [])],
                      mu=mu, zeta=zeta, tol=tol)


def section_event(coordinate: int = 1, value: float = 0.0, direction: float = 0.0):
    """Event function for crossings of {state[coordinate] = value}."""
    def ev(t, z):
        return z[coordinate] - value
    ev.direction = direction
    return ev


# --------------------------------------------------------------------------
# scattering maps

def freq_constant(mu) -> float:
    """A with omega(G) = -A / G**4."""
    return mu * (1.0 - mu) * 3.0 * math.pi / 2.0


def kick_constant(mu) -> float:
    """c with r(phi, G) = c sin(phi) / G**5."""
    return mu * (1.0 - mu) * (1.0 - 2.0 * mu) * 15.0 * math.pi / 8.0


def melnikov_constant(mu) -> float:
    """|C| in the transversality amplitude (the sign enters only through phi)."""
    return mu * mu * (1.0 - mu) ** 2 * 9.0 * (TWO_PI ** 1.5)


def omega(G, mu):
    return -freq_constant(mu) / np.asarray(G, dtype=float) ** 4


@dataclass(frozen=True)
class MelnikovAmplitude:
    log_value: float
    value: float
    underflow: bool


def melnikov_amplitude(G0, J, zeta, mu) -> MelnikovAmplitude:
    """|C| zeta (G0 + J)**(-5/2) exp(-(G0 + J)**3 / 3), kept in log scale."""
    if G0 < 2.0:
        raise ValueError("G0 must be >= 2")
    if zeta == 0.0:
        return MelnikovAmplitude(-math.inf, 0.0, False)
    G = G0 + J
    log_a = math.log(melnikov_constant(mu)) + math.log(zeta) - 2.5 * math.log(G) - G ** 3 / 3.0
    val = math.exp(log_a) if log_a > -745.0 else 0.0
    return MelnikovAmplitude(log_a, val, val == 0.0 or val < 2.2250738585072014e-308)


@dataclass(frozen=True)
class ScatteringModel:
    """Closed-form scattering map model of index 0 or 1.

    Generating function phi G' + P(phi, G') with
    P = (zeta c / G'**5 + index * E(G')) cos(phi), followed by the rotation
    phi -> phi + omega(G').  E is the transversality amplitude in
    'asymptotic' mode and the constant ``eps`` in 'model' mode.
    """
    mu: float
    zeta: float
    index: int
    mode: str = "asymptotic"
    eps: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.mu < 0.5 + 1e-15:
            raise ValueError("mu must lie in (0, 1/2]")
        if not 0.0 <= self.zeta < 1.0:
            raise ValueError("zeta must lie in [0, 1)")
        if self.index not in (0, 1):
            raise ValueError("index must be 0 or 1")
        if self.mode not in ("asymptotic", "model"):
            raise ValueError("mode must be 'asymptotic' or 'model'")

    @property
    def params(self) -> np.ndarray:
        """[A, zeta c, index flag, mode flag, eps, log |C| + log zeta]."""
        logc = math.log(melnikov_constant(self.mu) * self.zeta) if self.zeta > 0 else -math.inf
        return np.array([freq_constant(self.mu), self.zeta * kick_constant(self.mu),
                         float(self.index), 1.0 if self.mode == "model" else 0.0,
                         self.eps, logc])

    def __call__(self, phi, G):
        return scattering_model_map(self, phi, G)

    def inverse(self, phi, G):
        return _scatter_inverse(self.params, float(phi), float(G))


@njit(cache=True)
def _amp(p, G):
    """Amplitude of cos(phi) in P and its G-derivative."""
    a = p[1] / G ** 5
    da = -5.0 * a / G
    if p[2] == 1.0:
        if p[3] == 1.0:
            a += p[4]
        elif p[5] > -1e300:
            la = p[5] - 2.5 * math.log(G) - G ** 3 / 3.0
            e = math.exp(la) if la > -745.0 else 0.0
            a += e
            da += e * (-2.5 / G - G * G)
    return a, da


@njit(cache=True)
def _scatter(p, phi, G):
    s, c = math.sin(phi), math.cos(phi)
    Gp = G
    for _ in range(50):
        a, da = _amp(p, Gp)
        g = Gp - G - a * s
        step = g / (1.0 - da * s)
        Gp -= step
        if abs(step) <= 1e-16 * max(1.0, abs(Gp)):
            break
    a, da = _amp(p, Gp)
    return phi + da * c - p[0] / Gp ** 4, Gp


@njit(cache=True)
def _scatter_inverse(p, phi1, G1):
    phih = phi1 + p[0] / G1 ** 4
    a, da = _amp(p, G1)
    phi = phih
    for _ in range(50):
        g = phi + da * math.cos(phi) - phih
        step = g / (1.0 - da * math.sin(phi))
        phi -= step
        if abs(step) <= 1e-16:
            break
    return phi, G1 - a * math.sin(phi)


def scattering_model_map(model: ScatteringModel, phi, G):
    """Apply the model scattering map; returns (phi', G') (phi not reduced)."""
    if np.ndim(phi) == 0 and np.ndim(G) == 0:
        return _scatter(model.params, float(phi), float(G))
    phi, G = np.broadcast_arrays(np.asarray(phi, float), np.asarray(G, float))
    out = np.array([_scatter(model.params, a, b) for a, b in zip(phi.ravel(), G.ravel())])
    return out[:, 0].reshape(phi.shape), out[:, 1].reshape(phi.shape)


# --------------------------------------------------------------------------
# B0 / B1 gap

@dataclass(frozen=True)
class GapResult:
    G0: float
    eps_hat: float
    log_eps_hat: float
    tau_hat: float
    alpha_hat: float
    ratio: float
    log_ratio: float
    admissible: bool
    ratios: dict


def b0b1_gap(G0, zeta, mu, q_max=1000, eps0=1e-2) -> GapResult:
    """Compare the transversality amplitude with the torsion and Diophantine scale.

    alpha_hat is the empirical Diophantine constant of omega(G0) / 2 pi mod 1
    over denominators up to ``q_max``.
    """
    if G0 < 2.0:
        raise ValueError("G0 must be >= 2")
    amp = melnikov_amplitude(G0, 0.0, zeta, mu)
    tau = 4.0 * freq_constant(mu) / G0 ** 5
    beta = math.fmod(float(omega(G0, mu)) / TWO_PI, 1.0) % 1.0
    alpha = diophantine_constant(beta, q_max)
    lo = min(tau, alpha)
    log_ratio = amp.log_value - math.log(lo)
    ratio = math.exp(log_ratio) if log_ratio > -745.0 else 0.0
    return GapResult(G0=G0, eps_hat=amp.value, log_eps_hat=amp.log_value, tau_hat=tau,
                     alpha_hat=alpha, ratio=ratio, log_ratio=log_ratio,
                     admissible=log_ratio < math.log(eps0),
                     ratios={"eps/tau": math.exp(min(amp.log_value - math.log(tau), 700.0)),
                             "eps/alpha": math.exp(min(amp.log_value - math.log(alpha), 700.0))})


# --------------------------------------------------------------------------
# drift

@dataclass
class DriftResult:
    success: bool
    kicks: int
    evaluations: int
    G_start: float
    G_end: float
    delta_G_target: float
    trace: np.ndarray             # rows (kick_index, phi, G) after each index-1 kick
    mode: str
    kick_amplitude: float

    @property
    def delta_G(self) -> float:
        return self.G_end - self.G_start


@njit(cache=True)
def _drift(p0, p1, phi, G, target, sign, budget, max_trace, out):
    """Greedy drift: S0 until sign * sin(phi) >= 1/2, then S1 while inside."""
    G_start = G
    n_eval = 0
    k = 0
    while n_eval < budget:
        if sign * (G - G_start) >= target:
            return phi, G, n_eval, k, 0
        if sign * math.sin(phi) >= 0.5:
            phi, G = _scatter(p1, phi, G)
            if k < max_trace:
                out[k, 0] = k
                out[k, 1] = phi
                out[k, 2] = G
            k += 1
        else:
            phi, G = _scatter(p0, phi, G)
        phi = phi - TWO_PI * math.floor(phi / TWO_PI)
        n_eval += 1
    return phi, G, n_eval, k, 1


def drift_orbit(mu, eps, G_start, delta_G_target, budget=10 ** 9, zeta=0.0, mode="model",
                phi0=0.0, max_trace=10 ** 7) -> DriftResult:
    """Drive G by ``delta_G_target`` (signed) with the positioning-then-kick controller.

    In 'model' mode ``eps`` is the index-1 kick amplitude; in 'asymptotic'
    mode it is the eccentricity zeta and the kick is the transversality
    amplitude at G_start.
    """
    if mode == "model":
        m0 = ScatteringModel(mu, zeta, 0, "model", eps)
        m1 = ScatteringModel(mu, zeta, 1, "model", eps)
        kick = eps
    else:
        m0 = ScatteringModel(mu, eps, 0)
        m1 = ScatteringModel(mu, eps, 1)
        kick = melnikov_amplitude(G_start, 0.0, eps, mu).value
    if not kick > 1e-12:
        raise ValueError(f"kick amplitude {kick:.3g} <= 1e-12; use model mode")
    sign = 1.0 if delta_G_target >= 0 else -1.0
    out = np.zeros((min(max_trace, int(4 * abs(delta_G_target) / kick) + 16), 3))
    phi, G, n, k, st = _drift(m0.params, m1.params, float(phi0), float(G_start),
                              abs(delta_G_target), sign, int(budget), out.shape[0], out)
    res = DriftResult(success=st == 0, kicks=int(k), evaluations=int(n), G_start=G_start,
                      G_end=G, delta_G_target=delta_G_target, trace=out[:min(k, out.shape[0])],
                      mode=mode, kick_amplitude=kick)
    if st != 0:
        err = BudgetExhausted(f"drift reached dG = {G - G_start:.3g} of {delta_G_target} "
                              f"after {n} evaluations")
        err.partial = res
        raise err
    return res


def windowed_monotone_fraction(values, window=100, sign=1.0) -> float:
    """Fraction of consecutive window averages moving in direction ``sign``."""
    v = np.asarray(values, float)
    m = len(v) // window
    if m < 2:
        return 1.0
    avg = v[:m * window].reshape(m, window).mean(axis=1)
    return float(np.mean(sign * np.diff(avg) > 0))


# --------------------------------------------------------------------------
# instantiation as twist maps

@dataclass
class Instantiation:
    t0: object
    t1: object
    mu: float
    zeta: float
    G0: float
    G0_requested: float
    A: float
    beta: RotationNumber
    eps_model: float
    info: dict


def snap_frequency(mu, G0, depth=2):
    """Nearest G to G0 whose omega(G) / 2 pi mod 1 has partial quotients 1 after ``depth``.

    Returns (G, beta).  Generic frequencies have tiny Diophantine constants
    over practical denominator ranges; the snapped one is of constant type.
    """
    A = freq_constant(mu)
    beta0 = math.fmod(float(omega(G0, mu)) / TWO_PI, 1.0) % 1.0
    q = continued_fraction(beta0, depth)
    beta = RotationNumber.from_quotients(q)
    with mpmath.workdps(40):
        # -A / G**4 = 2 pi (beta - 1), G in the branch where omega in (-2 pi, 0)
        G = float((A / (2 * mpmath.pi * (1 - beta.mp))) ** mpmath.mpf(0.25))
    return G, beta


def ifs_instantiation(mu, zeta, G0, eps_model=None, chi=0.05, N_target=10 ** 7,
                      snap_depth=2) -> Instantiation:
    """Wrap the model scattering maps as (T0-like, T1-like) handles in (phi, J = G - G0).

    T0-like is the integrable part phi -> phi + omega(G0 + J); T1-like is
    the index-1 kick eps_model sin(phi) followed by the same rotation.  The
    common zeta-term of both maps is left out (it is of size
    zeta c / G0**5 and reported in ``info``).  ``eps_model`` defaults to
    chi**2 / (N_target tau) so a blender regime exists at that chi.
    """
    G, beta = snap_frequency(mu, G0, snap_depth)
    A = freq_constant(mu)
    tau = 4.0 * A / G ** 5
    if eps_model is None:
        eps_model = chi * chi / (N_target * tau) * (1 + 1e-9)
    t0 = make_frequency_twist(A, G, beta)
    t1 = make_frequency_kick(eps_model, A, G)
    info = {"mode": "model", "tau": tau, "omega0": float(omega(G, mu)),
            "common_term": zeta * kick_constant(mu) / G ** 5,
            "asymptotic_amplitude_log": melnikov_amplitude(G, 0.0, zeta, mu).log_value
            if zeta > 0 else -math.inf}
    return Instantiation(t0=t0, t1=t1, mu=mu, zeta=zeta, G0=G, G0_requested=G0, A=A,
                         beta=beta, eps_model=eps_model, info=info)


# --------------------------------------------------------------------------
# checks

def potential_decay_slope(mu, phi=0.7, xs=None) -> float:
    """Log-log slope of |V| against x at zeta = 0 over small x."""
    xs = np.geomspace(1e-3, 1e-2, 9) if xs is None else np.asarray(xs)
    vals = np.array([abs(potential_remainder(x, phi, mu)) for x in xs])
    return float(np.polyfit(np.log(xs), np.log(vals), 1)[0])


def find_escape_time(traj: Trajectory, x_level: float) -> float:
    """First time x drops below ``x_level`` along a dense trajectory."""
    xs = traj.states[:, 0]
    idx = np.flatnonzero(xs < x_level)
    if idx.size == 0 or idx[0] == 0:
        return math.nan
    i = idx[0]
    return brentq(lambda s: traj(s)[0] - x_level, traj.t[i - 1], traj.t[i])
