import io
import json
import math

import numpy as np
import pytest

from moqa.config import Settings
from moqa.ensemble import sample_instance, sample_problem
from moqa.exceptions import EnumerationCapExceeded, InvalidParameter, UndefinedGapRatio
from moqa.poly import constant, from_values, make_poly, variable
from moqa.problem import MultiObjective, hp_values, joint_shift_nonneg, objective_values, qubo_objective
from moqa.spectra import (
    check_sandwich,
    enumerate_spectrum,
    gap_ratio,
    landscape_rows,
    lp_roots,
    p_for_accuracy,
    recommended_p,
    relative_gap,
    save_spectrum_binary,
    separation_ratio,
    smallest_recovering_p,
    spectrum_from_values,
    threshold_p,
    verify_theorem,
    write_landscape_csv,
    write_spectrum_csv,
)


def two_objectives(h1_values, h2_values, n):
    return MultiObjective(n=n, objectives=(from_values(n, h1_values), from_values(n, h2_values)))


def degenerate_instance(rng, n=4):
    """Two minimizers of h_max at value 1 with different second objectives"""
    size = 1 << n
    h1 = rng.uniform(1.5, 5.0, size)
    h2 = rng.uniform(1.5, 5.0, size)
    i, j = rng.choice(size, size=2, replace=False)
    h1[i], h2[i] = 1.0, rng.uniform(0.3, 0.9)
    h1[j], h2[j] = rng.uniform(0.3, 0.9), 1.0
    return two_objectives(h1, h2, n), {int(i), int(j)}


class TestSpectrum:
    def test_constant_function(self):
        s = enumerate_spectrum(lambda b: 2.0, 3)
        assert s.lambda1 == s.lambda_max == 2.0
        assert s.lambda2 is None
        assert s.ground_set == tuple(range(8))
        assert s.is_constant()

    def test_single_variable(self):
        s = enumerate_spectrum(variable(1, 0).evaluate, 1)
        assert s.lambda1 == 0.0
        assert s.lambda2 == 1.0
        assert s.argmin == 0

    def test_matches_independent_loop(self):
        rng = np.random.default_rng(8)
        h = qubo_objective(np.triu(rng.normal(size=(8, 8))), rng.normal(size=8))
        s = enumerate_spectrum(h.evaluate, 8)
        best_k, best_v = None, math.inf
        for k in range(256):
            v = h.evaluate([(k >> i) & 1 for i in range(8)])
            if v < best_v:
                best_k, best_v = k, v
        assert s.lambda1 == pytest.approx(best_v, rel=1e-12)
        assert s.argmin == best_k

    def test_cap(self):
        with pytest.raises(EnumerationCapExceeded):
            enumerate_spectrum(lambda b: 0.0, 30)
        with pytest.raises(EnumerationCapExceeded):
            enumerate_spectrum(lambda b: 0.0, 5, Settings(enumeration_cap=4))

    def test_near_ties_are_degenerate(self):
        s = spectrum_from_values([1.0, 1.0 + 1e-12, 3.0])
        assert s.ground_set == (0, 1)
        assert s.lambda2 == 3.0


def test_gap_ratio_examples():
    assert gap_ratio(spectrum_from_values([1.0, 2.0, 4.0])) == 1.0
    assert gap_ratio(spectrum_from_values([1.0, 1.0, 3.0])) == 2.0
    with pytest.raises(UndefinedGapRatio):
        gap_ratio(spectrum_from_values([0.0, 1.0]))
    with pytest.raises(UndefinedGapRatio):
        gap_ratio(spectrum_from_values([2.0, 2.0]))


def test_gap_ratio_is_reproducible():
    mo = sample_instance(12, 6.0, 99)
    first = gap_ratio(spectrum_from_values(objective_values(mo).max(axis=0)))
    second = gap_ratio(enumerate_spectrum(lambda b: max(h.evaluate(b) for h in mo.objectives), 12))
    assert first == pytest.approx(second, rel=1e-12)


def test_relative_gap_examples():
    assert relative_gap(spectrum_from_values([1.0, 2.0, 4.0])) == pytest.approx(1 / 3)
    assert relative_gap(spectrum_from_values([1.0, 5.0])) == 1.0
    with pytest.raises(UndefinedGapRatio):
        relative_gap(spectrum_from_values([3.0, 3.0]))


def test_relative_gap_affine_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        values = rng.normal(size=32)
        a, c = rng.uniform(0.5, 4.0), rng.normal() * 10
        before = relative_gap(spectrum_from_values(values))
        after = relative_gap(spectrum_from_values(a * values + c))
        assert after == pytest.approx(before, rel=1e-8)


def test_threshold_p_examples():
    assert threshold_p(1, 0.5) == 0.0
    assert threshold_p(2, 1.0) == pytest.approx(1.0)
    assert threshold_p(2, 0.1) == pytest.approx(7.2725, abs=1e-4)
    assert smallest_recovering_p(2, 0.1) == 8
    with pytest.raises(InvalidParameter):
        threshold_p(2, 0.0)
    with pytest.raises(InvalidParameter):
        threshold_p(0, 1.0)


def test_p_for_accuracy():
    assert p_for_accuracy(1, 0.5) == 1
    p = p_for_accuracy(2, 0.9)
    assert 2 ** (-1.0 / p) >= 0.9
    assert 2 ** (-1.0 / (p - 1)) < 0.9
    with pytest.raises(InvalidParameter):
        p_for_accuracy(2, 1.0)


def test_sandwich_single_objective_is_tight():
    mo = MultiObjective(n=3, objectives=(make_poly(3, [([0, 2], 2.0), ([], 1.0)]),))
    for p in range(1, 9):
        assert check_sandwich(mo, p) == 0.0


def test_sandwich_identical_objectives_lower_bound_tight():
    h = make_poly(2, [([0], 3.0), ([], 1.0)])
    mo = MultiObjective(n=2, objectives=(h, h))
    table = objective_values(mo)
    for p in range(1, 9):
        roots = (np.sum(table**p, axis=0)) ** (1.0 / p)
        assert np.allclose(2 ** (-1.0 / p) * roots, table.max(axis=0), rtol=1e-12)


def test_sandwich_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(100):
        mo = sample_instance(6, 120.0, int(rng.integers(0, 2**32)))
        for p in range(1, 9):
            assert check_sandwich(mo, p, relative=True) <= 1e-9


@pytest.mark.slow
def test_sandwich_suite():
    rng = np.random.default_rng(2024)
    for _ in range(500):
        n = int(rng.integers(4, 13))
        gamma = float(rng.choice([6.0, 120.0]))
        mo = sample_instance(n, gamma, int(rng.integers(0, 2**32)))
        for p in range(1, 9):
            assert check_sandwich(mo, p, relative=True) <= 1e-9


class TestVerifyTheorem:
    def test_single_objective_p1(self):
        mo = MultiObjective(n=2, objectives=(make_poly(2, [([0], 1.0), ([1], 2.0), ([], 1.0)]),))
        report = verify_theorem(mo, 1)
        assert report.same_ground_space
        assert report.r_p == pytest.approx(report.r_max)
        assert report.p0 == 0.0
        assert report.holds()

    def test_unit_ratio_two_objectives(self):
        mo = two_objectives([1.0, 2.0, 3.0, 4.0], [0.5, 2.0, 1.0, 4.0], 2)
        report = verify_theorem(mo, 2)
        assert report.r_max == pytest.approx(1.0)
        assert report.p0 == pytest.approx(1.0)
        assert report.recovery_guaranteed
        assert report.same_ground_space
        assert report.ratio_grew
        assert report.ratio_bound_holds
        assert report.holds()
        json.dumps(report.to_json())

    def test_symbolic_path_agrees(self):
        mo = sample_instance(5, 6.0, 17)
        numeric = verify_theorem(mo, 3)
        symbolic = verify_theorem(mo, 3, symbolic=True)
        assert numeric.ground_set_p == symbolic.ground_set_p
        assert numeric.nu1 == pytest.approx(symbolic.nu1, rel=1e-6)

    def test_constant_landscape_has_no_ratio(self):
        mo = MultiObjective(n=2, objectives=(constant(2, 1.0),))
        with pytest.raises(UndefinedGapRatio):
            verify_theorem(mo, 2)

    def test_bad_p(self):
        mo = sample_instance(3, 6.0, 1)
        with pytest.raises(InvalidParameter):
            verify_theorem(mo, 0)

    def test_recovery_on_random_instances(self):
        rng = np.random.default_rng(42)
        checked = 0
        for _ in range(30):
            mo = sample_instance(int(rng.integers(3, 9)), 6.0, int(rng.integers(0, 2**32)))
            p = recommended_p(mo)
            if p > 41:
                continue
            report = verify_theorem(mo, p)
            if not report.unique_minimizer:
                continue
            assert report.same_ground_space
            assert report.ratio_grew
            assert report.holds()
            checked += 1
        assert checked > 0

    def test_ratio_can_shrink_just_above_threshold(self):
        mo = two_objectives([100.0, 110.0, 200.0, 200.0], [100.0, 1.0, 1.0, 1.0], 2)
        report = verify_theorem(mo, 8)
        assert report.r_max == pytest.approx(0.1)
        assert 7 < report.p0 < 8
        assert report.recovery_guaranteed and report.same_ground_space
        # growth of the ratio needs p - 1 >= p0
        assert not report.ratio_growth_guaranteed
        assert not report.ratio_grew
        assert report.r_p == pytest.approx(0.0718, abs=1e-4)
        assert report.violations() == []
        assert verify_theorem(mo, 9).ratio_grew

    def test_degenerate_minimum_subset(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            mo, ground = degenerate_instance(rng)
            report = verify_theorem(mo, 3)
            assert set(report.ground_set_max) == ground
            assert report.recovery_guaranteed
            assert report.ground_subset
            assert report.degeneracy_broken


@pytest.mark.slow
def test_recovery_suite():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        n = int(rng.integers(4, 11))
        mo = sample_instance(n, float(rng.choice([6.0, 120.0])), int(rng.integers(0, 2**32)))
        report = verify_theorem(mo, 1)
        if not report.unique_minimizer or report.p0 > 40:
            continue
        report = verify_theorem(mo, math.ceil(report.p0) + 1)
        assert report.same_ground_space
        assert report.ratio_grew
        assert report.violations() == []
        checked += 1


def test_separation_ratio():
    assert separation_ratio(np.array([1.0, 3.0, 2.0]), [0]) == pytest.approx(1.0)
    assert separation_ratio(np.array([1.0, 1.0]), [0, 1]) is None


def test_landscape_rows_and_csv():
    mo = MultiObjective(n=2, objectives=(make_poly(2, [([0], 1.0), ([], 1.0)]),))
    rows = landscape_rows(mo, [1, 2])
    assert len(rows) == 4
    assert rows[1]["bits"] == "10"
    assert rows[1]["h_max"] == 2.0
    assert rows[1]["hp_root_2"] == pytest.approx(2.0)
    out = io.StringIO()
    write_landscape_csv(rows, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "assignment,bits,h_max,hp_root_1,hp_root_2"
    assert lines[2].startswith("1,10,2,")


def test_landscape_mean_mode_matches_sum_bound():
    mo = sample_instance(4, 6.0, 2)
    rows = landscape_rows(mo, [4], "mean")
    for row in rows:
        assert row["hp_root_4"] <= row["h_max"] * (1 + 1e-12)


def test_spectrum_outputs(tmp_path):
    s = spectrum_from_values([3.0, 1.0, 2.0], n=None)
    out = io.StringIO()
    write_spectrum_csv(s, out)
    assert out.getvalue() == "assignment,value\n0,3\n1,1\n2,2\n"
    path = tmp_path / "spectrum.npy"
    save_spectrum_binary(s, str(path))
    assert np.load(str(path)).tolist() == [3.0, 1.0, 2.0]


@pytest.fixture
def random_instances():
    rng = np.random.default_rng(31)
    return [
        sample_instance(int(rng.integers(3, 8)), float(rng.choice([6.0, 120.0])), int(rng.integers(0, 2**32)))
        for _ in range(50)
    ]


def test_roots_approach_h_max_monotonically(random_instances):
    for mo in random_instances:
        table = objective_values(mo)
        h_max = table.max(axis=0)
        gaps = [float(np.max(lp_roots(table, p) - h_max)) for p in range(1, 9)]
        scale = float(h_max.max())
        assert all(b <= a + 1e-12 * scale for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] >= -1e-12 * scale


def test_sum_and_mean_share_minimizers(random_instances):
    for mo in random_instances:
        table = objective_values(mo)
        for p in range(1, 9):
            total = spectrum_from_values(hp_values(table, p, "sum"))
            mean = spectrum_from_values(hp_values(table, p, "mean"))
            assert total.ground_set == mean.ground_set


def test_powers_keep_objective_order(random_instances):
    for mo in random_instances:
        for values in objective_values(mo):
            before = values[:, None] <= values[None, :]
            for p in range(1, 9):
                powered = values**p
                assert np.array_equal(before, powered[:, None] <= powered[None, :])


@pytest.mark.parametrize("eta", [0.5, 1.0, 7.0])
def test_shift_keeps_minimizer_set(eta):
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(3, 8))
        raw = sample_problem(n, float(rng.choice([6.0, 120.0])), int(rng.integers(0, 2**32)))
        unshifted = raw.to_objectives("bound")
        shifted = joint_shift_nonneg(unshifted, eta, "exact")
        before = spectrum_from_values(objective_values(unshifted).max(axis=0))
        after = spectrum_from_values(objective_values(shifted).max(axis=0))
        assert before.ground_set == after.ground_set
