import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symblend.blender import (LONG_CURVE, BandBall, Certificate, GraphCurve, covering_check,
                              cs_blender_search, cs_blender_search_pair, find_fixed_point,
                              graph_transform_manifold, reachability_oracle,
                              reversibility_residual, search_depth, steer_to_blender,
                              steering_radius, verify_certificate)
from symblend.errors import NotHyperbolic
from symblend.twist_maps import compose_many

from conftest import CHI


class AffineSaddle:
    """(xi, eta) -> (b + (1 - chi) xi, (1 + chi) eta)."""

    def __init__(self, b, chi):
        self.b, self.chi = b, chi

    def forward(self, n, xi, eta):
        return self.b + (1 - self.chi) * np.asarray(xi), (1 + self.chi) * np.asarray(eta)

    def inverse(self, n, xi, eta):
        return (np.asarray(xi) - self.b) / (1 - self.chi), np.asarray(eta) / (1 + self.chi)

    def jacobian(self, n, xi, eta, h=1e-5, inverse=False):
        d = np.diag([1 - self.chi, 1 + self.chi])
        return np.linalg.inv(d) if inverse else d


def test_covering_and_radius(regime, chart):
    res = covering_check(regime, chart, grid_res=101)
    assert res.covered
    assert res.a_estimate >= 1 - 10 * CHI


def test_covering_robust_to_shrink(regime, chart):
    assert covering_check(regime, chart, grid_res=101, shrink=CHI / 2).covered


def test_single_map_does_not_cover(regime, chart):
    res = covering_check(regime, chart, grid_res=51, family=[regime.working_family()[0]])
    assert not res.covered
    assert len(res.uncovered) > 0


def test_affine_fixed_point_and_vertical_manifold():
    fam = AffineSaddle(0.02, CHI)
    p = find_fixed_point(None, family=fam, n=0, seed=(0.3, 0.1))
    assert np.allclose(p.fixed_point, [0.02 / CHI, 0.0], atol=1e-13)
    u = graph_transform_manifold(p, "unstable")
    assert np.abs(u.values - 0.02 / CHI).max() < 1e-13
    s = graph_transform_manifold(p, "stable")
    assert np.abs(s.values).max() < 1e-13
    assert p.log["unstable"]["iterations"] <= 2


def test_affine_not_hyperbolic():
    fam = AffineSaddle(0.0, 0.0)
    with pytest.raises((NotHyperbolic, np.linalg.LinAlgError)):
        find_fixed_point(None, family=fam, n=0, seed=(0.1, 0.0))


def test_blender_fixed_points(double_blender, regime):
    left, right = double_blender.cs
    assert left.fixed_point[0] < 0 < right.fixed_point[0]
    for p in (left, right):
        fam = p.family
        z = np.array(fam.forward(p.n_index, *p.fixed_point))
        assert np.abs(z - p.fixed_point).max() <= 1e-10
        lam_s, lam_u = p.eigenvalues
        assert abs(lam_s - (1 - CHI)) <= 3 * CHI ** 2
        assert abs(lam_u - (1 + CHI)) <= 3 * CHI ** 2
        # near the seed (b_n / chi, 0)
        assert abs(p.fixed_point[0] - regime.b_of(p.n_index) / CHI) <= 0.5 * CHI


def test_graph_transform_contraction(double_blender, regime):
    for p in double_blender.cs:
        info = p.log["unstable"]
        assert info["max_ratio"] <= info["bound"]
        u = p.unstable_graph
        dev = np.abs(u(np.linspace(-1, 1, 201)) - regime.b_of(p.n_index) / CHI).max()
        assert dev <= 3 * CHI
        assert u.lipschitz < 1


def test_stable_graph_is_s_curve(double_blender):
    p = double_blender.cs[0]
    s = graph_transform_manifold(p, "stable")
    assert s.kind == "s" and s.lipschitz < 1
    # invariance: F_n^{-1} maps the stable graph into itself
    x, y = p.family.inverse(p.n_index, *s.xy())
    ok = np.abs(x) <= 1
    assert np.abs(y[ok] - s(x[ok])).max() < 1e-9


def test_search_full_curve_immediate(double_blender, regime):
    c = GraphCurve.constant("s", -1.0, 1.0, 0.0)
    res = cs_blender_search(c, regime, double_blender.cs)
    assert res.word == []
    u = double_blender.cs[res.blender].unstable_graph
    assert abs(res.witness[0] - u(res.witness[1])) < 1e-12


def test_search_short_curve_word_bound(double_blender, regime):
    c = GraphCurve.constant("s", -0.05, 0.05, 0.0)
    res = cs_blender_search(c, regime, double_blender.cs)
    assert 0 < len(res.word) <= search_depth(0.1, CHI)
    assert search_depth(0.1, CHI) == math.ceil(math.log(18) / math.log(1 + CHI / 2))
    # the witness pushed forward lands back on the initial curve
    x0, y0 = res.witness_start
    assert abs(x0) <= 0.05 + 1e-9 and abs(y0) < 1e-9
    assert res.curve.length >= LONG_CURVE


def test_search_pair_shares_word(double_blender, regime):
    c1 = GraphCurve.constant("s", -0.06, 0.04, 0.1)
    c2 = GraphCurve("s", np.linspace(-0.02, 0.08, 401), -0.2 + 0.3 * np.linspace(-0.02, 0.08, 401))
    r1, r2 = cs_blender_search_pair([c1, c2], regime, double_blender.cs)
    assert r1.word == r2.word
    for c, r in ((c1, r1), (c2, r2)):
        x0, y0 = r.witness_start
        assert abs(y0 - c(x0)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(center=st.floats(-0.8, 0.8), length=st.floats(0.02, 0.3),
       slope=st.floats(-0.5, 0.5), height=st.floats(-0.8, 0.8))
def test_search_terminates_property(double_blender, regime, center, length, slope, height):
    g = np.linspace(center - length / 2, center + length / 2, 401)
    c = GraphCurve("s", g, height + slope * (g - center))
    res = cs_blender_search(c, regime, double_blender.cs)
    assert len(res.word) <= search_depth(length, CHI) + 5
    x0, y0 = res.witness_start
    assert abs(y0 - c(x0)) < 1e-8


def test_double_blender_crossing(double_blender):
    assert double_blender.slope >= math.tan(math.radians(35))
    # the connection sits near the reflection axis phi = b / 2
    b = double_blender.regime.t1.b
    assert abs(double_blender.witness.phi - b / 2) < 0.05


def test_reversibility_residual(double_blender, regime):
    n = double_blender.cs[0].n_index
    assert reversibility_residual(regime, n) < 1e-3


def test_steer_monotone(regime, chart):
    r = steering_radius(regime)
    z = (0.0, 0.8 * r)
    res = steer_to_blender(z, chart, regime)
    t0, t1 = regime.t0, regime.t1
    # replay the word and record J after each kick
    Js = []
    phi, J = np.array([z[0]]), np.array([z[1]])
    for s, c in zip(res.syms, res.counts):
        phi, J = compose_many(t0, t1, (np.array([s], np.int8), np.array([c])), phi, J)
        if s == 1:
            Js.append(J[0])
    assert np.all(np.diff(Js) < 0)
    assert abs(res.chart_point[0]) <= 0.5 + 1e-9 and abs(res.chart_point[1]) <= 0.6 + 1e-9
    # kicks bounded by the action distance over eps / 2
    assert res.kicks <= 0.8 * r / (0.5 * regime.eps) + 2


def test_steer_already_in_band(regime, chart):
    res = steer_to_blender((0.0, 0.0), chart, regime)
    assert res.kicks == 0
    assert set(res.syms.tolist()) <= {0}


def test_transitivity_same_ball(transit, regime):
    B = BandBall((0.0, 0.0), 0.01, transit.r_band)
    cert = transit.search(B, B)
    assert cert.length > 0
    assert verify_certificate(cert, regime.t0, regime.t1)
    back = Certificate.from_json(cert.to_json())
    assert verify_certificate(back, regime.t0, regime.t1)


def test_tampered_certificate_fails(transit, regime):
    B1 = BandBall((0.3, 0.2), 0.02, transit.r_band)
    B2 = BandBall((0.7, -0.4), 0.02, transit.r_band)
    cert = transit.search(B1, B2)
    d = cert.to_json()
    d["word"][-1][1] += 1
    assert not verify_certificate(Certificate.from_json(d), regime.t0, regime.t1)


def test_oracle_identity_and_certified(transit, regime):
    R0 = reachability_oracle(regime, (8, 8), max_len=0, r_band=transit.r_band)
    assert np.array_equal(R0.matrix, np.eye(64, dtype=bool))
    R = reachability_oracle(regime, (16, 16), max_len=64, r_band=transit.r_band)
    B1 = BandBall((0.1, 0.5), 0.02, transit.r_band)
    B2 = BandBall((0.9, -0.5), 0.02, transit.r_band)
    cert = transit.search(B1, B2)
    assert R.reachable(cert.start, cert.end)
    assert R.matrix.all()
