import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from symblend.arithmetic import (RotationNumber, continued_fraction, convergents,
                                 diophantine_constant, dirichlet_constant,
                                 frac_multiples, orbit_density_radius)
from symblend.errors import RationalDetected

GOLDEN = RotationNumber.golden()


def test_golden_quotients():
    assert continued_fraction(GOLDEN, 6) == [1] * 6
    assert continued_fraction(GOLDEN, 40) == [1] * 40


def test_sqrt2_quotients():
    with mpmath.workdps(60):
        assert continued_fraction(mpmath.sqrt(2) - 1, 5) == [2] * 5


def test_near_half():
    # 1/2 + 1e-15 = [0; 1, 1, 2.5e14, ...]: the third quotient exceeds the ceiling
    assert continued_fraction(0.5 + 1e-15, 1) == [1]
    with pytest.raises(RationalDetected):
        continued_fraction(0.5 + 1e-15, 3)
    assert continued_fraction(Fraction(1, 2), 1) == [2]
    with pytest.raises(RationalDetected):
        continued_fraction(Fraction(1, 2), 2)


def test_golden_diophantine():
    # oracle: q dist(q beta, Z) at q = 1 in extended precision
    with mpmath.workdps(50):
        g = (mpmath.sqrt(5) - 1) / 2
        expected = float(min(g, 1 - g))
    assert diophantine_constant(GOLDEN, 1) == pytest.approx(expected, abs=1e-15)
    assert abs(diophantine_constant(GOLDEN, 1) - 0.381966) < 1e-6
    assert diophantine_constant(GOLDEN, 10**5) >= 0.38


def test_large_quotient_destroys_constant():
    beta = RotationNumber.from_quotients([1, 1, 10**6])
    assert continued_fraction(beta, 4) == [1, 1, 10**6, 1]
    assert diophantine_constant(beta, 10**5) < 1e-5


def test_density_single_point():
    assert orbit_density_radius(GOLDEN, 0.3, 1) == 0.5


def test_density_dirichlet_bound():
    alpha = diophantine_constant(GOLDEN, 10**5)
    for N in (10, 100, 1000, 10**4, 10**5):
        r = orbit_density_radius(GOLDEN, 0.0, N)
        assert r <= 3.0 / (N * alpha)
    assert dirichlet_constant(GOLDEN, 10**4) <= 3.0


def test_density_halves_with_doubling():
    for N in (500, 2000, 8000):
        r1 = orbit_density_radius(GOLDEN, 0.1, N)
        r2 = orbit_density_radius(GOLDEN, 0.1, 2 * N)
        assert 0.25 <= r2 / r1 <= 1.0


def test_frac_multiples_exact():
    n = np.array([1, 7, 12345, 10**6, 10**7 + 3])
    with mpmath.workdps(60):
        ref = [float(k * GOLDEN.mp - mpmath.floor(k * GOLDEN.mp)) for k in n]
    assert np.allclose(frac_multiples(GOLDEN, n), ref, atol=1e-15, rtol=0)


quotients = st.lists(st.integers(1, 50), min_size=3, max_size=8)


@settings(max_examples=30, deadline=None)
@given(quotients)
def test_convergent_inequality(qs):
    beta = RotationNumber.from_quotients(qs)
    cf = continued_fraction(beta, len(qs))
    assert cf == qs
    with mpmath.workdps(60):
        for p, q in convergents(cf):
            assert abs(beta.mp - mpmath.mpf(p) / q) < mpmath.mpf(1) / q ** 2


@settings(max_examples=30, deadline=None)
@given(quotients, st.integers(2, 2000))
def test_diophantine_monotone(qs, q):
    beta = RotationNumber.from_quotients(qs)
    assert diophantine_constant(beta, 2 * q) <= diophantine_constant(beta, q)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 3000), st.floats(0, 1))
def test_density_bound_property(b, N, offset):
    beta = RotationNumber.from_value(b)
    alpha = diophantine_constant(beta, N)
    assume(alpha > 0)
    r = orbit_density_radius(beta, offset, N)
    assert r <= 3.0 / (N * alpha) + 1e-12
