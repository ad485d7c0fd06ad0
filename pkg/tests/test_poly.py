import itertools

import numpy as np
import pytest

from moqa import poly
from moqa.config import Settings
from moqa.exceptions import (
    DimensionMismatch,
    EnumerationCapExceeded,
    InvalidParameter,
    SymbolicBudgetExceeded,
    VariableIndexOutOfRange,
)
from moqa.poly import (
    Polynomial,
    add,
    constant,
    from_json,
    from_values,
    ising_from_json,
    make_poly,
    multiply,
    power,
    projected_power_terms,
    scale,
    to_binary,
    to_ising,
    variable,
    zero,
)


def oracle(raw_terms, b):
    total = 0.0
    for vars_, coef in raw_terms:
        prod = coef
        for i in vars_:
            prod *= b[i]
        total += prod
    return total


def all_bits(n):
    return [list(b)[::-1] for b in itertools.product([0, 1], repeat=n)]


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def random_raw(rng, n, max_terms=8, max_degree=4):
    raw = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        k = int(rng.integers(0, min(n, max_degree) + 1))
        vars_ = sorted(rng.choice(n, size=k, replace=False).tolist())
        raw.append((vars_, float(rng.normal())))
    return raw


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def test_make_poly_idempotence_and_merge():
    x0 = make_poly(2, [([0, 0], 1.0)])
    assert x0 == variable(2, 0)
    assert make_poly(2, [([0], 1.0), ([0], 2.0)]) == scale(variable(2, 0), 3.0)


def test_make_poly_example():
    P = make_poly(3, [([0, 1], 2.0), ([], 3.0)])
    assert P.evaluate([1, 1, 0]) == 5.0
    assert P.decompose() == [([], 3.0), ([0, 1], 2.0)]


def test_make_poly_errors():
    with pytest.raises(VariableIndexOutOfRange):
        make_poly(2, [([2], 1.0)])
    with pytest.raises(VariableIndexOutOfRange):
        make_poly(65, [])


def test_evaluate():
    assert zero(3).evaluate([1, 0, 1]) == 0.0
    P = make_poly(2, [([0, 1], 2.0), ([], 3.0)])
    assert poly.evaluate(P, [1, 1]) == 5.0
    with pytest.raises(DimensionMismatch):
        P.evaluate([1, 1, 1])


def test_evaluate_matches_oracle(rng):
    raw = [(sorted(rng.choice(4, size=int(rng.integers(0, 5)), replace=False).tolist()), float(rng.normal())) for _ in range(10)]
    P = make_poly(4, raw)
    values = P.evaluate_all()
    for k, b in enumerate(all_bits(4)):
        assert close(P.evaluate(b), oracle(raw, b))
        assert close(values[k], oracle(raw, b))


def test_add_scale_identities():
    P = make_poly(2, [([0, 1], 2.0), ([1], -1.0)])
    assert add(P, zero(2)) == P
    assert scale(P, 1.0) == P
    x0 = variable(2, 0)
    assert add(x0, scale(x0, -1.0)).term_count() == 0
    with pytest.raises(DimensionMismatch):
        add(P, zero(3))


def test_multiply_examples():
    x0, x1 = variable(2, 0), variable(2, 1)
    assert multiply(x0, x0) == x0
    s = x0 + x1
    expected = make_poly(2, [([0], 1.0), ([1], 1.0), ([0, 1], 2.0)])
    assert multiply(s, s) == expected
    assert multiply(s, s + 0.0) == expected
    assert multiply(s, constant(2, 1.0)) == s


def test_power_examples():
    x0, x1 = variable(2, 0), variable(2, 1)
    s = x0 + x1
    assert power(s, 1) == s
    assert power(s, 2) == make_poly(2, [([0], 1.0), ([1], 1.0), ([0, 1], 2.0)])
    P = variable(1, 0) + 2.0
    cube = P**3
    assert cube.evaluate([1]) == pytest.approx(27.0)
    assert cube.evaluate([0]) == pytest.approx(8.0)


def test_power_rejects_bad_exponent():
    with pytest.raises(InvalidParameter):
        power(variable(1, 0), 0)
    with pytest.raises(InvalidParameter):
        power(variable(1, 0), 1.5)


def test_power_budget_guard():
    P = make_poly(12, [([i], 1.0) for i in range(12)])
    with pytest.raises(SymbolicBudgetExceeded):
        power(P, 6, Settings(term_budget=100))
    assert projected_power_terms(P, 6) <= 12**6


def test_degree_and_term_count():
    assert poly.degree(zero(3)) == 0 and poly.term_count(zero(3)) == 0
    P = make_poly(3, [([0, 1, 2], 2.0), ([0], 1.0)])
    assert P.degree() == 3
    assert P.term_count() == 2


def test_to_ising_examples():
    I = to_ising(variable(1, 0))
    assert I.constant == 0.5
    assert I[1] == -0.5
    assert to_ising(constant(3, 4.0)).decompose() == [([], 4.0)]


def test_ising_round_trip(rng):
    raw = random_raw(rng, 5)
    P = make_poly(5, raw)
    I = to_ising(P)
    for b in all_bits(5):
        z = [1 - 2 * bi for bi in b]
        assert close(I.evaluate(z), P.evaluate(b))
    assert np.allclose(I.evaluate_all(), P.evaluate_all())
    back = to_binary(I)
    assert np.allclose(back.evaluate_all(), P.evaluate_all())
    assert I.degree() <= P.degree()


def test_algebra_matches_oracles(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        raw_p, raw_q = random_raw(rng, n), random_raw(rng, n)
        P, Q = make_poly(n, raw_p), make_poly(n, raw_q)
        p = int(rng.integers(1, 4))
        s = float(rng.normal())
        total, prod, powered = add(P, Q), multiply(P, Q), power(P, p)
        ising = to_ising(P)
        scaled = scale(P, s)
        for b in all_bits(n):
            vp, vq = oracle(raw_p, b), oracle(raw_q, b)
            assert close(total.evaluate(b), vp + vq)
            assert close(scaled.evaluate(b), s * vp)
            assert close(prod.evaluate(b), vp * vq)
            assert close(powered.evaluate(b), vp**p)
            assert close(ising.evaluate([1 - 2 * bi for bi in b]), vp)
        assert powered.term_count() <= P.term_count() ** p
        assert powered.degree() <= min(n, P.degree() * p)


def test_canonical_form_stability(rng):
    P = make_poly(6, random_raw(rng, 6))
    assert make_poly(6, P.decompose()) == P
    assert from_json(P.to_json()) == P
    I = to_ising(P)
    assert ising_from_json(I.to_json()) == I


def test_zero_threshold_drops_tiny_coefficients():
    P = make_poly(2, [([0], 1e-13), ([1], 1.0)])
    assert P.term_count() == 1
    assert make_poly(2, [([0], 1e-6)], Settings(zero_threshold=1e-3)).term_count() == 0


def test_from_values_is_normal_form(rng):
    n = 4
    values = rng.normal(size=1 << n)
    P = from_values(n, values)
    assert np.allclose(P.evaluate_all(), values)
    Q = make_poly(n, random_raw(rng, n))
    assert np.allclose(from_values(n, Q.evaluate_all()).evaluate_all(), Q.evaluate_all())
    with pytest.raises(DimensionMismatch):
        from_values(3, values)


def test_operators():
    x0 = variable(2, 0)
    assert (x0 - x0).term_count() == 0
    assert (2 * x0).evaluate([1, 0]) == 2.0
    assert (1 - x0).evaluate([1, 0]) == 0.0
    assert (-x0).evaluate([1, 1]) == -1.0
    assert isinstance(sum([x0, x0]), Polynomial)


def test_evaluate_all_respects_cap():
    with pytest.raises(EnumerationCapExceeded):
        variable(30, 0).evaluate_all()
