import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symblend.arithmetic import RotationNumber
from symblend.errors import LeftDomain, NotHyperbolic, RegimeViolation
from symblend.twist_maps import (AnnulusPoint, T0Spec, T1Spec, affine_model,
                                 compose_word, compose_word_inverse, eigen_symplectic,
                                 fd_det, make_frequency_kick, make_frequency_twist,
                                 make_t0, make_t1, rle_decode, rle_encode, wrap_pi)

TWO_PI = 2 * math.pi
GOLDEN = RotationNumber.golden()
T0 = make_t0(T0Spec(GOLDEN, 1.0, mu3=0.05))
T1 = make_t1(T1Spec(1e-3, (0.3, 0.1)))


def test_t0_rotates_zero_section():
    for phi in (0.0, 1.0, 5.5):
        p, J = T0(phi, 0.0)
        assert J == 0.0
        assert abs(wrap_pi(p - phi - TWO_PI * GOLDEN.value)) < 1e-15


def test_t0_integrable_when_mu3_zero():
    t = make_t0(T0Spec(GOLDEN, 2.0, mu3=0.0))
    p, J = t(1.0, 0.3)
    assert J == 0.3
    assert abs(wrap_pi(p - 1.0 - TWO_PI * GOLDEN.value - 0.6)) < 1e-15


def test_t0_generating_function_relations():
    phi, J = 0.7, 0.4
    p1, J1 = T0(phi, J)
    assert abs(J - (J1 - 0.05 * J1 ** 3 * math.sin(phi))) < 1e-15
    expect = phi + TWO_PI * GOLDEN.value + J1 + 3 * 0.05 * J1 ** 2 * math.cos(phi)
    assert abs(wrap_pi(p1 - expect)) < 1e-14


def test_t1_origin_and_kick_slope():
    assert T1(0.0, 0.0) == pytest.approx((0.3, 0.0), abs=1e-16)
    h = 1e-5
    d = ((T1(h, 0.0)[1] - 0.0) - (T1(-h, 0.0)[1] - 0.0)) / (2 * h)
    assert abs(d - 1e-3) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.floats(0, TWO_PI), st.floats(-0.9, 0.9))
def test_inverses_round_trip(phi, J):
    for m in (T0, T1):
        p, j = m.inverse(*m(phi, J))
        assert abs(wrap_pi(p - phi)) < 1e-13 and abs(j - J) < 1e-14


@settings(max_examples=50, deadline=None)
@given(st.floats(0, TWO_PI), st.floats(-0.95, 0.95))
def test_single_map_area_preserving(phi, J):
    for m in (T0, T1):
        assert abs(fd_det(m, (phi, J)) - 1.0) < 1e-9


def test_zero_word_rotation():
    n = 37
    z = compose_word(T0, T1, [0] * n, (0.25, 0.0))
    assert z.J == 0.0
    assert abs(wrap_pi(z.phi - 0.25 - n * TWO_PI * GOLDEN.value)) < 1e-13


def test_word_order_first_symbol_first():
    z = compose_word(T0, T1, [1, 0], (0.4, 0.1))
    ref = T0(*T1(0.4, 0.1))
    assert z == pytest.approx(ref, abs=1e-15)


def test_left_domain_reports_step():
    kick = make_t1(T1Spec(0.5, (0.0,)))
    with pytest.raises(LeftDomain) as err:
        compose_word(T0, kick, [1, 1], (math.pi / 2, 0.9))
    assert err.value.step == 1


def test_rle_round_trip():
    w = [0, 0, 1, 0, 1, 1, 1, 0]
    s, c = rle_encode(w)
    assert list(s) == [0, 1, 0, 1, 0] and list(c) == [2, 1, 1, 3, 1]
    assert list(rle_decode(s, c)) == w


@settings(max_examples=40, deadline=None)
@given(st.floats(0, TWO_PI), st.floats(-5e-8, 5e-8), st.integers(1, 200000))
def test_fast_power_matches_iteration(phi, J, k):
    fast = T0.power(phi, J, k)
    slow = compose_word(T0, T1, [[0, k]], (phi, J), allow_fast=False)
    # iteration accumulates one rounding of 2 pi beta per step
    assert abs(wrap_pi(fast[0] - slow.phi)) < 1e-15 * k + 1e-13
    assert abs(fast[1] - slow.J) <= 1e-15 * abs(J) + 1e-22


def test_fast_power_inverse():
    z = (1.0, 3e-8)
    p, j = T0.power(*T0.power(*z, 10**6), -10**6)
    assert abs(wrap_pi(p - 1.0)) < 1e-12 and abs(j - 3e-8) < 1e-22


def test_word_inverse():
    word = [1, 0, 0, 1, 0, 1, 1, 0]
    z = compose_word(T0, T1, word, (2.0, 0.2))
    back = compose_word_inverse(T0, T1, word, z)
    assert abs(wrap_pi(back.phi - 2.0)) < 1e-13 and abs(back.J - 0.2) < 1e-14


def test_frequency_maps():
    A, G0 = 0.21 * 3 * math.pi / 2, 2.0
    t0 = make_frequency_twist(A, G0)
    t1 = make_frequency_kick(1e-6, A, G0)
    p, J = t0(0.5, 0.01)
    assert J == 0.01
    assert abs(wrap_pi(p - 0.5 + A / (G0 + 0.01) ** 4)) < 1e-15
    assert t1(0.0, 0.0) == pytest.approx((TWO_PI - A / G0 ** 4, 0.0), abs=1e-15)
    assert abs(t0.tau - 4 * A / G0 ** 5) < 1e-15
    p1, J1 = t0.power(0.5, 0.01, 1000)
    slow = compose_word(t0, t1, [[0, 1000]], (0.5, 0.01), allow_fast=False)
    assert abs(wrap_pi(p1 - slow.phi)) < 1e-11


def test_jets_vanish_at_zero_section():
    h = 1e-3
    for phi in np.linspace(0, TWO_PI, 9):
        D = [T0(phi, s * h)[1] - s * h for s in (-1, 0, 1)]
        first = (D[2] - D[0]) / (2 * h)
        second = (D[2] - 2 * D[1] + D[0]) / h ** 2
        assert abs(first) <= 1e-6 and abs(second) <= 1e-6


def test_affine_model_n0_and_bounds():
    m = affine_model(T0, T1, 0)
    assert np.array_equal(m.A, np.array([[1.0, 0.0], [1e-3, 1.0]]))
    assert m.b == pytest.approx([0.3, 0.0])
    with pytest.raises(RegimeViolation):
        affine_model(T0, T1, 251)
    assert affine_model(T0, T1, 250).n == 250


def test_eigen_example():
    A = np.array([[1.01, 1.0], [0.01, 1.0]])
    e = eigen_symplectic(A)
    oracle = np.sort(np.linalg.eigvals(A).real)[0]
    assert abs(e.lam - oracle) < 1e-14
    assert abs(e.lam - 0.904875) < 1e-6
    assert e.v * e.w < 0
    assert abs(abs(e.v) / 0.1 - 1) < 0.1 and abs(abs(e.w) / 0.1 - 1) < 0.1
    assert np.allclose(A @ [1, e.v], e.lam * np.array([1, e.v]))
    assert np.allclose(A @ [1, e.w], np.array([1, e.w]) / e.lam)


def test_eigen_not_hyperbolic():
    with pytest.raises(NotHyperbolic):
        eigen_symplectic(np.array([[1.0, 0.0], [0.01, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e-1), st.floats(0.1, 10.0))
def test_eigen_tiny_trace(x, ntau):
    A = np.array([[1 + x, ntau], [x / ntau, 1.0]])
    e = eigen_symplectic(A)
    assert abs(e.lam - (1 - math.sqrt(x))) <= 5 * x
    assert np.allclose(A @ [1, e.v], e.lam * np.array([1, e.v]), rtol=1e-10, atol=1e-14)


def _lin(m, z0=(0.0, 0.0)):
    h = 1e-6
    c = np.array(m(*z0))
    J = np.empty((2, 2))
    for k in range(2):
        d = np.zeros(2)
        d[k] = h
        J[:, k] = (np.array(m(*(np.array(z0) + d))) - np.array(m(*(np.array(z0) - d)))) / (2 * h)
    c[0] = wrap_pi(c[0])
    return c, J


def _reversal_residual(m, b):
    c, M = _lin(m)
    # psi(x) = (b - phi, J);  psi L psi versus L^{-1}
    S = np.diag([-1.0, 1.0])
    tpsi = np.array([b, 0.0])
    lhs_M = S @ M @ S
    lhs_c = S @ (c + M @ tpsi) + tpsi
    inv_M = np.linalg.inv(M)
    inv_c = -inv_M @ c
    return max(np.abs(lhs_M - inv_M).max(), np.abs(lhs_c - inv_c).max())


def test_linear_reversibility():
    b = T1.b
    assert _reversal_residual(T0, b) < 1e-9
    pure = make_t1(T1Spec(1e-3, (0.3,)))
    assert _reversal_residual(pure, b) < 1e-9
    # the J'-dependent rotation breaks it at order b1 * eps
    assert _reversal_residual(T1, b) <= 2 * 0.1 * 1e-3 * (1 + b)


words = st.lists(st.tuples(st.integers(0, 1), st.integers(1, 200)), min_size=1, max_size=8)


@settings(max_examples=60, deadline=None)
@given(words, st.floats(0, TWO_PI), st.floats(-0.05, 0.05))
def test_word_area_preserving(runs, phi, J):
    runs = [[s, c if s == 0 else min(c, 3)] for s, c in runs]
    if sum(c for _, c in runs) > 1000:
        return
    n0 = sum(c for s, c in runs if s == 0)
    f = lambda p, j: tuple(compose_word(T0, T1, runs, (p, j)))
    # conjugate by diag(1, 1/(1 + n0 tau)) to balance the twist
    scale = (1.0, 1.0 / (1.0 + n0 * T0.tau))
    assert abs(fd_det(f, (phi, J), scale=scale) - 1.0) < 1e-8
