import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from convexcrowd import (
    DomainError,
    ModelHandle,
    crossing_g,
    evaluate,
    full_objective,
    reduced_gradient,
    reduced_objective,
    validate_responses,
)
from convexcrowd.models import full_gradient, scalar_kernel

from conftest import DIFFERENTIABLE, SPAMMER_FAMILIES

LN2 = math.log(2)
DS = ModelHandle("dawid_skene")
PL = ModelHandle("convex_pl")
GLAD = ModelHandle("glad_restricted")


@pytest.mark.parametrize(
    "family,x,w,expected",
    [
        ("dawid_skene", 0.3, 0.0, LN2),
        ("dawid_skene", 1.0, 1.0, 0.0),
        ("convex_pl", 0.0, 0.0, 1.0),
        ("convex_pl", 1.0, 1.0, -3.0),
        ("glad_restricted", 0.7, 0.0, LN2),
        ("additive_noise", 0.5, 0.9, LN2),
        ("minimax_restricted", 0.5, 0.7, -0.5),
        # 50-digit mpmath evaluation of -(0.5 ln 0.75 + 0.5 ln 0.25)
        ("dawid_skene", 0.5, 0.5, 0.83698821678583577),
    ],
)
def test_reduced_examples(family, x, w, expected):
    assert reduced_objective(ModelHandle(family), x, w, 1) == pytest.approx(expected, abs=1e-15)


def test_convex_pl_branches():
    assert evaluate(PL, 0.0, 0.0, 1).branch == "H1"
    ev = evaluate(PL, 1.0, 1.0, 1)
    assert ev.value == -3.0 and ev.branch == "tie"
    assert evaluate(PL, 0.9, 0.1, 1).branch == "H0"


def test_domain_is_enforced():
    with pytest.raises(DomainError):
        reduced_objective(DS, 1.2, 0.5, 1)
    with pytest.raises(DomainError):
        reduced_objective(DS, 0.5, -0.1, 1)
    with pytest.raises(DomainError):
        reduced_objective(DS, 0.5, 0.5, 2)
    with pytest.raises(DomainError):
        reduced_objective(ModelHandle("glad_restricted", w_max=0.5), 0.5, 0.6, 1)
    # log((1 - w)/2) diverges at w = 1 unless its weight 1 - x is zero
    with pytest.raises(DomainError):
        reduced_objective(DS, 0.5, 1.0, 1)
    with pytest.raises(DomainError):
        reduced_gradient(DS, 0.5, 1.0, 1)


def test_gaussian_noise_at_center():
    m = ModelHandle("additive_noise", noise_cdf="gaussian")
    assert reduced_objective(m, 0.5, 0.4, 1) == pytest.approx(LN2, abs=1e-15)
    # -log Phi(0.25 * 0.8) against math.erf
    expected = -math.log(0.5 * (1 + math.erf(0.2 / math.sqrt(2))))
    assert reduced_objective(m, 0.75, 0.8, 1) == pytest.approx(expected, rel=1e-14)


@given(
    st.sampled_from(["dawid_skene", "additive_noise", "minimax_restricted", "glad_restricted", "convex_pl"]),
    st.floats(0, 1),
    st.floats(0, 0.999),
)
def test_reflection_is_exact(family, x, w):
    m = ModelHandle(family)
    assert reduced_objective(m, x, w, 0) == reduced_objective(m, 1 - x, w, 1)


@given(
    st.sampled_from(["dawid_skene", "additive_noise", "minimax_restricted", "glad_restricted", "convex_pl"]),
    st.integers(1, 1000),
    st.floats(0, 1),
    st.floats(0, 0.999),
)
def test_scale_linearity(family, n, x, w):
    one = reduced_objective(ModelHandle(family), x, w, 1)
    scaled = reduced_objective(ModelHandle(family, n=n), x, w, 1)
    assert scaled == pytest.approx(n * one, rel=4e-16, abs=1e-300)


def test_ds_crossing_gradient_vanishes():
    for x in np.linspace(0.5, 0.99, 25):
        gx, gw = reduced_gradient(DS, x, 2 * x - 1, 1)
        assert abs(gw) < 1e-12


def test_convex_pl_subgradients():
    assert reduced_gradient(PL, 0.0, 0.0, 1) == (-5.0, 1.0)
    assert reduced_gradient(PL, 0.9, 0.1, 1) == (-1.0, -1.0)
    # tie resolves to H1
    assert reduced_gradient(PL, 0.75, 0.5, 1) == (-5.0, 1.0)


def central_difference(f, x, w, h=1e-5):
    return (f(x + h, w) - f(x - h, w)) / (2 * h), (f(x, w + h) - f(x, w - h)) / (2 * h)


def test_glad_gradient_example():
    gx, gw = reduced_gradient(GLAD, 0.3, 0.4, 1)
    fx, fw = central_difference(lambda a, b: reduced_objective(GLAD, a, b, 1), 0.3, 0.4)
    assert abs(gx - fx) / abs(fx) < 1e-6
    assert abs(gw - fw) / abs(fw) < 1e-6


def fd_relative_errors(m, points, y=1):
    errs = []
    for x, w in points:
        g = reduced_gradient(m, x, w, y)
        fd = central_difference(lambda a, b: reduced_objective(m, a, b, y), x, w)
        for a, b in zip(g, fd):
            errs.append(abs(a - b) / max(abs(b), 1e-3))
    return np.array(errs)


@pytest.mark.parametrize("m", DIFFERENTIABLE, ids=lambda m: f"{m.family}-{m.noise_cdf}")
def test_gradient_matches_finite_differences(m):
    rng = np.random.default_rng(7)
    pts = np.column_stack([rng.uniform(0.01, 0.99, 1000), rng.uniform(0.01, 0.95, 1000)])
    assert fd_relative_errors(m, pts, 1).max() < 1e-6
    assert fd_relative_errors(m, pts[:100], 0).max() < 1e-6


@pytest.mark.parametrize("m", DIFFERENTIABLE + [PL], ids=lambda m: f"{m.family}-{m.noise_cdf}")
def test_scalar_kernel_agrees_with_public_api(m):
    f = scalar_kernel(m)
    rng = np.random.default_rng(3)
    for x, w in zip(rng.uniform(0, 1, 200), rng.uniform(0, 0.99, 200)):
        v, gx, gw = f(float(x), float(w))
        assert v == pytest.approx(reduced_objective(m, x, w, 1), rel=1e-13, abs=1e-13)
        assert (gx, gw) == pytest.approx(reduced_gradient(m, x, w, 1), rel=1e-12, abs=1e-13)


def test_convex_pl_is_max_of_hyperplanes_exactly():
    for x in np.linspace(0, 1, 101):
        for w in np.linspace(0, 1, 101):
            fx, fw = Fraction(float(x)), Fraction(float(w))
            h0, h1 = float(-fw - fx - 1), float(fw - 5 * fx + 1)
            assert reduced_objective(PL, x, w, 1) == max(h0, h1)


@pytest.mark.parametrize("family", SPAMMER_FAMILIES)
def test_spammer_constancy(family):
    m = ModelHandle(family)
    base = reduced_objective(m, 0.0, 0.0, 1)
    dev = max(abs(reduced_objective(m, x, 0.0, 1) - base) for x in np.linspace(0, 1, 101))
    assert dev < 1e-12


@pytest.mark.parametrize(
    "family,w,expected",
    [("dawid_skene", 0.0, 0.5), ("glad_restricted", 0.0, 0.5), ("convex_pl", 0.6, 0.8), ("additive_noise", 0.7, 0.5)],
)
def test_crossing_g_examples(family, w, expected):
    assert crossing_g(ModelHandle(family), w) == pytest.approx(expected, abs=1e-15)


def test_crossing_g_range_and_monotone(model):
    ws = np.linspace(0, 0.999, 200)
    g = np.array([crossing_g(model, w) for w in ws])
    assert np.all((g >= 0.5) & (g < 1)) and np.all(np.diff(g) >= 0)
    with pytest.raises(DomainError):
        crossing_g(model, model.w_max)


def test_full_objective_examples():
    Y = validate_responses(3, 1, [(1, 1, 1), (2, 1, 1), (3, 1, 1)])
    for family in ("dawid_skene", "glad_restricted", "convex_pl"):
        m = ModelHandle(family)
        got = full_objective(m, [0.4], [0.3, 0.3, 0.3], Y)
        assert got == pytest.approx(3 * reduced_objective(m, 0.4, 0.3, 1), rel=1e-15)
    assert full_objective(DS, [1.0], [1.0], validate_responses(1, 1, [(1, 1, 1)])) == 0.0
    # reflection to x = 0.8, then max(-0.5 - 0.8 - 1, 0.5 - 4 + 1) = max(-2.3, -2.5)
    Y0 = validate_responses(1, 1, [(1, 1, 0)])
    assert full_objective(PL, [0.2], [0.5], Y0) == pytest.approx(-2.3, abs=1e-15)
    assert reduced_objective(PL, 0.8, 0.5, 1) == -2.3


def test_full_objective_dimension_mismatch():
    Y = validate_responses(2, 2, [(1, 1, 1)])
    with pytest.raises(DomainError):
        full_objective(DS, [0.5], [0.5, 0.5], Y)
    with pytest.raises(DomainError):
        full_objective(DS, [0.5, 0.5], [0.5, 1.5], Y)


@given(st.data())
def test_full_is_sum_of_reduced(data):
    family = data.draw(st.sampled_from(["dawid_skene", "additive_noise", "minimax_restricted", "glad_restricted", "convex_pl"]))
    m = ModelHandle(family)
    k, d = data.draw(st.integers(1, 4)), data.draw(st.integers(1, 4))
    cells = data.draw(st.sets(st.tuples(st.integers(1, k), st.integers(1, d)), min_size=1))
    Y = validate_responses(k, d, [(i, j, data.draw(st.integers(0, 1))) for i, j in cells])
    x = data.draw(st.lists(st.floats(0, 1), min_size=d, max_size=d))
    w = data.draw(st.lists(st.floats(0, 0.99), min_size=k, max_size=k))
    expected = math.fsum(reduced_objective(m, x[j], w[i], y) for i, j, y in Y.entries)
    assert full_objective(m, x, w, Y) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_full_gradient_matches_finite_differences():
    Y = validate_responses(3, 4, [(1, 1, 1), (1, 2, 0), (2, 2, 1), (2, 4, 0), (3, 3, 1), (3, 1, 0), (1, 4, 1)])
    rng = np.random.default_rng(11)
    for m in DIFFERENTIABLE:
        x, w = rng.uniform(0.1, 0.9, 4), rng.uniform(0.1, 0.8, 3)
        gx, gw = full_gradient(m, x, w, Y)
        h = 1e-6
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (full_objective(m, x + e, w, Y) - full_objective(m, x - e, w, Y)) / (2 * h)
            assert gx[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (full_objective(m, x, w + e, Y) - full_objective(m, x, w - e, Y)) / (2 * h)
            assert gw[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)
