import math
from fractions import Fraction

import numpy as np
import pytest

from abctorus.analytic import (AnalyticError, AnalyticMap, AnalyticStage,
                               AnalyticStep, RangeError, TrigPolynomial,
                               approx_blockslide, approx_permutation,
                               approximate_step, build_stage,
                               commutation_residual, complex_eval,
                               conjugated_rotation, find_l_star,
                               good_set_fraction, jacobian_determinants,
                               rotation_map, strip_distance,
                               strip_half_distance)
from abctorus.blockslide import (BlockSlideMap, Slide, StepFunction,
                                 column_interchange, permutation_to_blockslide)
from abctorus.params import StageParams
from abctorus.towers import GridPermutation

F = Fraction


def test_constant_step_is_exact():
    sf = StepFunction((F(0),), (F(2, 7),))
    tp = approximate_step(sf, 1, 1e-6, 0.01)
    assert tp.harmonics == 0
    assert tp.eval(0.37) == pytest.approx(2 / 7, abs=0)


def test_half_step_approximation():
    sf = StepFunction((F(0), F(1, 2)), (F(0), F(1, 2)))
    tp = approximate_step(sf, 1, 1e-3, 0.05)
    assert abs(tp.eval(0.25) - 0.0) < 1e-3
    assert abs(tp.eval(0.75) - 0.5) < 1e-3
    assert tp.achieved_error < 1e-3


def test_periodicity_exact_by_frequency_restriction():
    sf = StepFunction((F(0), F(1, 4), F(1, 2), F(3, 4)),
                      (F(0), F(1, 3), F(0), F(1, 3)), period_divisor=2)
    tp = approximate_step(sf, 2, 1e-2, 0.1)
    xs = np.random.default_rng(0).random(1000)
    assert np.abs(tp.eval(xs + 0.5) - tp.eval(xs)).max() < 1e-10
    zs = xs[:100] + 1j * 0.08
    assert np.abs(tp.eval(zs + 0.5) - tp.eval(zs)).max() < 1e-10 * \
        np.abs(tp.eval(zs)).max() + 1e-12


def test_complex_eval_constant_and_cosh():
    tp = TrigPolynomial(1, 0.25, (), ())
    assert complex_eval(tp, 1.3 + 0.2j) == 0.25
    tp1 = TrigPolynomial(1, 0.0, (1.0,), (0.0,))
    val = complex_eval(tp1, 0.3j)
    assert val == pytest.approx(math.cosh(2 * math.pi * 0.3), rel=1e-12)


def test_complex_eval_overflow_reported():
    tp = TrigPolynomial(4, 0.0, tuple([0.0] * 199 + [1.0]),
                        tuple([0.0] * 200))
    with pytest.raises(RangeError):
        complex_eval(tp, 0.9j)


def test_approx_blockslide_identity():
    from abctorus.blockslide import IDENTITY
    ap = approx_blockslide(IDENTITY, 3, 1e-3, 0.01)
    assert len(ap.map) == 0


def test_approx_single_slide_close_outside_strips():
    sf = StepFunction((F(0), F(1, 2)), (F(1, 2), F(0)))
    bs = BlockSlideMap((Slide("h", sf),))
    ap = approx_blockslide(bs, 1, 1e-3, 0.05)
    xs = np.linspace(0, 1, 10000, endpoint=False)
    dist = np.minimum(np.abs(xs % 0.5), 0.5 - np.abs(xs % 0.5))
    mask = dist > 0.05 / 4
    pts = np.stack([np.full_like(xs, 0.3), xs], axis=1)
    img = ap.map.apply(pts)
    exact = np.where(xs < 0.5, 0.3 + 0.5, 0.3)
    assert np.abs(img[mask, 0] - exact[mask]).max() < 1e-3


def test_vertical_slide_period_must_match_rotation():
    sf = StepFunction((F(0), F(1, 2)), (F(0), F(1, 2)), period_divisor=1)
    bs = BlockSlideMap((Slide("v", sf),))
    with pytest.raises(AnalyticError):
        approx_blockslide(bs, 2, 1e-2, 0.1)


def test_commutation_structural():
    f = column_interchange(0, 2, 2)
    ap = approx_blockslide(f, 2, 1e-2, 0.1, harmonics=4)
    pts = np.random.default_rng(1).random((500, 2))
    assert commutation_residual(ap.map, 2, pts) <= 1e-12
    assert len(ap.map) == 8


def test_jacobian_of_shear_stack():
    tp_v = TrigPolynomial(2, 0.25, (0.1, 0.03), (0.05, 0.0))
    tp_h = TrigPolynomial(1, -0.125, (0.08,), (0.02,))
    m = AnalyticMap((AnalyticStep("v", poly=tp_v), AnalyticStep("h", poly=tp_h),
                     AnalyticStep("rot", amount=F(1, 3))))
    pts = np.random.default_rng(2).random((1000, 2))
    jd = jacobian_determinants(m, pts)
    assert np.abs(jd - 1.0).max() < 1e-6


def test_good_set_fraction_identityish():
    perm = GridPermutation.identity(2, 1, 2)
    pa = approx_permutation(perm, 0.05, samples=2000, seed=0)
    assert pa.good_fraction == 1.0


def test_strip_distance_zero_for_equal_maps():
    r = rotation_map(F(1, 3))
    assert strip_distance(r, r, 0.1).value == 0.0


def test_strip_distance_rotations_mod_one():
    d = strip_distance(rotation_map(F(1, 4)), rotation_map(F(9, 10)), 0.37,
                       grid=8)
    assert d.value == pytest.approx(0.35, abs=1e-12)


def test_strip_estimate_monotone_in_grid():
    sf = StepFunction((F(0), F(1, 2)), (F(0), F(1, 2)))
    bs = BlockSlideMap((Slide("v", sf),))
    f = approx_blockslide(bs, 1, 1e-2, 0.1, harmonics=3).map
    g = AnalyticMap(())
    vals = [strip_half_distance(f, g, 0.1, grid).value for grid in (4, 8, 16, 32)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_strip_distance_triangle_inequality_sampled():
    rng = np.random.default_rng(5)
    maps = []
    for _ in range(3):
        coeffs = rng.normal(scale=0.02, size=2)
        tp = TrigPolynomial(2, float(rng.normal(scale=0.05)),
                            (float(coeffs[0]),), (float(coeffs[1]),))
        maps.append(AnalyticMap((AnalyticStep("v", poly=tp),)))
    f, g, h = maps
    rho, grid = 0.1, 12
    dfg = strip_distance(f, g, rho, grid).value
    dgh = strip_distance(g, h, rho, grid).value
    dfh = strip_distance(f, h, rho, grid).value
    assert dfh <= dfg + dgh + 1e-9


def test_build_stage_zero_is_rotation():
    par0 = StageParams(n=0, k=2, l=2, s=2, p=1, q=1)
    st0 = AnalyticStage(par0, None, rotation_map(par0.alpha), None)
    assert len(st0.transform) <= 1


def test_conjugated_rotation_round_trip():
    perm = GridPermutation(2, 1, 2, ((0, 1), (1, 0), (0, 0), (1, 1)))
    ap = approx_blockslide(permutation_to_blockslide(perm), 1, 1e-2, 0.1,
                           harmonics=2)
    t = conjugated_rotation([ap.map], F(1, 4))
    pts = np.random.default_rng(3).random((200, 2))
    # T^4 = H R^{4/4} H^{-1} = identity on the torus
    out = pts.copy()
    for _ in range(4):
        out = t.apply(out, reduce=True)
    diff = out - pts
    diff -= np.round(diff)
    assert np.abs(diff).max() < 1e-9


def test_serialization_round_trip_bit_exact():
    perm = GridPermutation(2, 2, 2, ((0, 1), (1, 0), (0, 0), (1, 1)))
    ap = approx_blockslide(permutation_to_blockslide(perm), 2, 1e-2, 0.1,
                           harmonics=3)
    blob = ap.map.to_json_list()
    back = AnalyticMap.from_json_list(blob)
    pts = np.random.default_rng(4).random((50, 2))
    assert np.array_equal(back.apply(pts), ap.map.apply(pts))
    assert back.to_json_list() == blob


def _stage_chain():
    par0 = StageParams(n=0, k=2, l=2, s=2, p=1, q=1)
    st0 = AnalyticStage(par0, None, rotation_map(par0.alpha), None)
    perm = GridPermutation(2, 1, 2, ((0, 0), (1, 1), (0, 1), (1, 0)))
    ap = approx_blockslide(permutation_to_blockslide(perm), 1, 1e-2, 0.1,
                           harmonics=2)
    return [st0], ap.map


def test_find_l_star_huge_threshold_returns_two():
    prev, h = _stage_chain()
    res = find_l_star(prev, [h], 2, 0.1, eps_n=10.0, l_budget=8)
    assert res.found and res.l_star == 2


def test_find_l_star_gap_history_decreases():
    prev, h = _stage_chain()
    res = find_l_star(prev, [h], 2, 0.1, eps_n=0.4, l_budget=32)
    assert res.found
    hist = dict(res.history)
    for a, b in ((2, 4), (4, 8)):
        if a in hist and b in hist:
            assert hist[b] <= hist[a]


def test_find_l_star_budget_exhausted_reports_best():
    prev, h = _stage_chain()
    res = find_l_star(prev, [h], 2, 0.1, eps_n=1e-9, l_budget=4)
    assert not res.found
    assert res.gap > res.threshold
    assert res.l_star in (2, 3, 4)
