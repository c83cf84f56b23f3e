import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symblend.blender import BandBall, verify_certificate
from symblend.errors import WindowTooShort
from symblend.skew_product import (SkewCertificate, SkewTransitivity, SymbolTrack, SymbolWindow,
                                   coupling_c1_distance, fiber_compose, fiber_map, make_skew,
                                   skew_context, track_compose, truncation_depth,
                                   verify_skew_certificate, window_sensitivity)
from symblend.twist_maps import compose_word

from conftest import EPS


@pytest.fixture(scope="module")
def skew(maps):
    return make_skew(*maps, delta=0.1)


def test_truncation_depth():
    assert truncation_depth(0.0) == 0
    assert truncation_depth(0.1) == 16
    assert truncation_depth(1e-3) == 6


def test_delta_zero_is_locally_constant(maps):
    t0, t1 = maps
    s = make_skew(t0, t1, 0.0)
    rng = np.random.default_rng(3)
    w = SymbolWindow.random(rng, 5)
    z = (1.2, 0.03)
    got = fiber_map(s, w, z)
    want = (t0 if w[0] == 0 else t1)(*z)
    assert got == pytest.approx(want, abs=0)


def test_all_zero_window_rotates(maps):
    s = make_skew(*maps, delta=0.1)
    w = SymbolWindow.constant(30, 0)
    z = fiber_compose(s, w, 7, (0.5, 0.0))
    angle = maps[0].angle
    assert abs(((z.phi - 0.5 - 7 * angle) + math.pi) % (2 * math.pi) - math.pi) < 1e-12
    assert z.J == 0.0


def test_compose_identity_and_round_trip(skew):
    rng = np.random.default_rng(4)
    w = SymbolWindow.random(rng, 40)
    z = (2.0, 0.04)
    assert fiber_compose(skew, w, 0, z) == z
    fwd = fiber_compose(skew, w, 20, z)
    # shift the window so that the inverse runs over the same positions
    shifted = SymbolWindow.from_array(list(w.symbols[20:]) + [0] * 20)
    back = fiber_compose(skew, shifted, 20, fwd, inverse=True)
    assert abs(back.phi - z[0]) < 1e-9 and abs(back.J - z[1]) < 1e-9


def test_window_too_short(skew):
    w = SymbolWindow.constant(10)
    with pytest.raises(WindowTooShort):
        fiber_compose(skew, w, 5, (0.0, 0.0))


def test_depth_three_bound(skew):
    rng = np.random.default_rng(5)
    w = SymbolWindow.random(rng, 24)
    w2 = w.flipped(4).flipped(-7)
    c0, _ = window_sensitivity(skew, w, w2, 1)
    assert c0 <= 0.1 ** 3


def test_identical_windows_zero(skew):
    w = SymbolWindow.random(np.random.default_rng(6), 24)
    assert window_sensitivity(skew, w, w, 2) == (0.0, 0.0)


def test_c1_distance_to_base(skew):
    w = SymbolWindow.random(np.random.default_rng(7), 24)
    assert coupling_c1_distance(skew, w) <= 2 * skew.delta


def test_sensitivity_requires_agreement(skew):
    w = SymbolWindow.random(np.random.default_rng(8), 24)
    with pytest.raises(ValueError):
        window_sensitivity(skew, w, w.flipped(1), 2)


def test_sensitivity_decay_slope(skew):
    rng = np.random.default_rng(9)
    w = SymbolWindow.random(rng, 30)
    depths = np.arange(1, 7)
    vals = [window_sensitivity(skew, w, w.flipped(d + 1), 1)[0] for d in depths]
    slope = np.polyfit(depths, np.log(vals), 1)[0]
    assert abs(slope - math.log(skew.delta)) <= 0.15 * abs(math.log(skew.delta))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), m=st.integers(1, 6), n=st.integers(1, 6))
def test_shift_equivariance(skew, seed, m, n):
    rng = np.random.default_rng(seed)
    w = SymbolWindow.random(rng, 40)
    z = (rng.uniform(0, 2 * math.pi), rng.uniform(-0.05, 0.05))
    whole = fiber_compose(skew, w, m + n, z)
    shifted = SymbolWindow.from_array(list(w.symbols[m:]) + [0] * m)
    part = fiber_compose(skew, shifted, n, fiber_compose(skew, w, m, z))
    assert abs(whole.phi - part.phi) < 1e-9 and abs(whole.J - part.J) < 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_fiber_maps_area_preserving(skew, seed):
    rng = np.random.default_rng(seed)
    w = SymbolWindow.random(rng, 20)
    z = np.array([rng.uniform(0, 2 * math.pi), rng.uniform(-0.05, 0.05)])
    h = 1e-5
    cols = []
    for e in np.eye(2):
        a = np.array(fiber_map(skew, w, z + h * e))
        b = np.array(fiber_map(skew, w, z - h * e))
        cols.append((a - b) / (2 * h))
    assert abs(np.linalg.det(np.array(cols).T) - 1) < 1e-7


def test_track_json_round_trip():
    tr = SymbolTrack.from_symbols([0, 0, 1, 1, 1, 0], origin=2)
    back = SymbolTrack.from_json(tr.to_json())
    assert back.segment(-4, 6) == tr.segment(-4, 6) == [0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0]


def test_skew_search_delta_zero_matches_plain_words(maps, regime, transit):
    s = make_skew(*maps, delta=0.0)
    rng = np.random.default_rng(10)
    wa, wb = SymbolWindow.random(rng, 4), SymbolWindow.random(rng, 4)
    B1 = BandBall((0.2, 0.3), 0.02, transit.r_band)
    B2 = BandBall((0.6, -0.2), 0.02, transit.r_band)
    cert = SkewTransitivity(s, transit).search(wa, B1, wb, B2, 2)
    assert verify_skew_certificate(cert, s)
    # with delta = 0 the fiber maps are T0, T1 and the word is a plain certificate
    lo = cert.track.origin
    syms, counts = cert.track.syms, cert.track.counts
    flat_start = np.concatenate([[0], np.cumsum(counts)])
    # cut the run list to orbit positions [0, M)
    word = []
    for s_, a, b in zip(syms, flat_start[:-1], flat_start[1:]):
        a2, b2 = max(a, lo), min(b, lo + cert.M)
        if b2 > a2:
            word.append([int(s_), int(b2 - a2)])
    end = compose_word(regime.t0, regime.t1, word, cert.start)
    assert abs(end.phi - cert.end.phi) < 1e-9 and abs(end.J - cert.end.J) < 1e-15
    back = SkewCertificate.from_json(cert.to_json())
    assert verify_skew_certificate(back, s)


@pytest.mark.slow
def test_skew_search_small_delta(maps, regime):
    s = make_skew(*maps, delta=1e-3, kernel_scale=EPS)
    ctx = skew_context(s, regime)
    rng = np.random.default_rng(11)
    st_ = SkewTransitivity(s, ctx)
    wa, wb = SymbolWindow.random(rng, 8), SymbolWindow.random(rng, 8)
    B1 = BandBall((0.4, 0.5), 0.02, ctx.r_band)
    B2 = BandBall((0.1, -0.6), 0.02, ctx.r_band)
    cert = st_.search(wa, B1, wb, B2, 2)
    assert verify_skew_certificate(cert, s)
    assert cert.track.segment(cert.M - 2, cert.M + 2) == wb.segment(-2, 2)
