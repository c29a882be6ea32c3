import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_dcov, brute_pearson, literal_u_statistic, literal_u_statistic_quadruples, random_table
from tabpower.sim import scenario_table
from tabpower.tables import (
    AlternativeSpec,
    CountTable,
    DomainError,
    JointTable,
    dcov_functional,
    dcov_unbiased_from_probs,
    lemma1_constant,
    mle_table,
    pearson_functional,
    read_table,
    scaled_mle_unbiased_gap,
    stat_dcov_mle,
    stat_dcov_unbiased,
    stat_pearson,
    table_from_csv,
    table_from_json,
    table_to_csv,
    table_to_json,
)


# --- construction -----------------------------------------------------------


def test_mle_table_uniform():
    t = mle_table(CountTable([[1, 1], [1, 1]]))
    np.testing.assert_array_equal(t.probs, [[0.25, 0.25], [0.25, 0.25]])


def test_mle_table_diagonal():
    np.testing.assert_array_equal(mle_table(CountTable([[2, 0], [0, 2]])).probs, [[0.5, 0], [0, 0.5]])


def test_mle_table_marginals():
    t = mle_table(CountTable([[3, 1], [1, 3]]))
    np.testing.assert_array_equal(t.probs, [[0.375, 0.125], [0.125, 0.375]])
    np.testing.assert_array_equal(t.row_marginals, [0.5, 0.5])


@pytest.mark.parametrize(
    "probs",
    [
        [[0.5, 0.6], [0.0, -0.1]],
        [[0.3, 0.3], [0.3, 0.3]],
        [[0.5, 0.5]],
    ],
)
def test_joint_table_rejects_invalid(probs):
    with pytest.raises(DomainError):
        JointTable(np.array(probs))


def test_joint_table_is_read_only():
    t = JointTable(np.full((2, 2), 0.25))
    with pytest.raises(ValueError):
        t.probs[0, 0] = 1.0


def test_zero_marginal_flagged():
    t = JointTable(np.array([[0.5, 0.5], [0.0, 0.0]]))
    assert t.has_zero_marginal
    with pytest.raises(DomainError, match="row marginal 2"):
        pearson_functional(t)


def test_count_table_rejects_negative_and_fractional():
    with pytest.raises(DomainError):
        CountTable([[1, -1], [1, 1]])
    with pytest.raises(DomainError):
        CountTable([[1.5, 1], [1, 1]])
    with pytest.raises(DomainError):
        CountTable([[0, 0], [0, 0]])


def test_alternative_requires_zero_row_and_column_sums():
    r = s = np.array([0.5, 0.5])
    with pytest.raises(DomainError):
        AlternativeSpec(r, s, np.array([[0.1, 0.0], [0.0, -0.1]]))
    with pytest.raises(DomainError):
        AlternativeSpec(r, s, np.array([[0.3, -0.3], [-0.3, 0.3]]))
    alt = AlternativeSpec(r, s, np.array([[0.05, -0.05], [-0.05, 0.05]]))
    np.testing.assert_allclose(alt.table.probs, [[0.3, 0.2], [0.2, 0.3]])
    assert not alt.is_null


def test_alternative_round_trip(rng):
    t = random_table(rng, (3, 4))
    alt = AlternativeSpec.from_table(t)
    np.testing.assert_allclose(alt.table.probs, t.probs, atol=1e-15)
    np.testing.assert_allclose(alt.table.row_marginals, alt.row_marginals, atol=1e-12)


# --- functionals ------------------------------------------------------------


def test_functionals_vanish_on_outer_products(rng):
    for shape in [(2, 2), (3, 5), (6, 6)]:
        t = JointTable.from_marginals(rng.dirichlet(np.ones(shape[0])), rng.dirichlet(np.ones(shape[1])))
        assert abs(pearson_functional(t)) < 1e-14
        assert abs(dcov_functional(t)) < 1e-14


def test_hand_values_2x2():
    t = JointTable(np.array([[0.3, 0.2], [0.2, 0.3]]))
    assert pearson_functional(t) == pytest.approx(0.04, abs=1e-14)
    assert dcov_functional(t) == pytest.approx(0.01, abs=1e-15)


def test_setting1_dcov():
    assert dcov_functional(scenario_table("setting1", 1 / 40)) == pytest.approx(36 / 1600, abs=1e-15)


def test_setting2_pearson_brute_force():
    t = scenario_table("setting2", 0.1)
    assert pearson_functional(t) == pytest.approx(brute_pearson(t.probs), rel=1e-13)
    assert dcov_functional(t) == pytest.approx(brute_dcov(t.probs), rel=1e-13)


# --- statistics -------------------------------------------------------------


def test_statistics_at_empirical_independence():
    c = CountTable([[5, 5], [5, 5]])
    assert stat_pearson(c) == 0.0
    assert stat_dcov_mle(c) == 0.0


def test_pearson_hand_value():
    c = CountTable([[3, 1], [1, 3]])
    assert stat_pearson(c) == pytest.approx(0.25, abs=1e-15)
    assert c.n * stat_pearson(c) == pytest.approx(2.0, abs=1e-14)


def test_dcov_mle_hand_value():
    assert stat_dcov_mle(CountTable([[3, 1], [1, 3]])) == pytest.approx(0.0625, abs=1e-15)


def test_dcov_unbiased_term_by_term():
    c = np.array([[3, 1], [1, 3]])
    n = 8
    P = c / n
    r = P.sum(1)
    s = P.sum(0)
    dhat = ((P - np.outer(r, s)) ** 2).sum()
    t1 = n / (n - 3) * dhat
    t2 = -4 * n / ((n - 2) * (n - 3)) * (P * np.outer(r, s)).sum()
    t3 = n / ((n - 1) * (n - 3)) * ((r**2).sum() + (s**2).sum())
    t4 = n * (3 * n - 2) / ((n - 1) * (n - 2) * (n - 3)) * (r**2).sum() * (s**2).sum()
    t5 = -n / ((n - 1) * (n - 3))
    expected = t1 + t2 + t3 + t4 + t5
    assert stat_dcov_unbiased(CountTable(c)) == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx(0.3 / 7, abs=1e-15)


def test_dcov_unbiased_matches_literal_quadruple_sum():
    for c in ([[3, 1], [1, 3]], [[2, 1, 1], [0, 2, 1]], [[1, 2], [2, 0], [1, 1]]):
        assert stat_dcov_unbiased(CountTable(c)) == pytest.approx(literal_u_statistic_quadruples(c), abs=1e-13)


def test_statistics_match_brute_force_on_random_tables(rng):
    for _ in range(100):
        c = rng.integers(1, 12, size=(3, 4))
        ct = CountTable(c)
        P = c / c.sum()
        assert stat_dcov_mle(ct) == pytest.approx(brute_dcov(P), abs=1e-12)
        assert stat_dcov_unbiased(ct) == pytest.approx(literal_u_statistic(c), abs=1e-12)
        assert stat_pearson(ct) == pytest.approx(brute_pearson(P), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dcov_unbiased_needs_four_observations(n):
    c = np.zeros((2, 2), dtype=int)
    c[0, 0] = n
    with pytest.raises(DomainError):
        stat_dcov_unbiased(CountTable(c))


def test_pearson_rejects_zero_sample_marginal():
    with pytest.raises(DomainError):
        stat_pearson(CountTable([[3, 0], [2, 0]]))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 20), min_size=12, max_size=12).filter(lambda v: sum(v) >= 4),
    st.permutations(range(3)),
    st.permutations(range(4)),
)
def test_invariants_under_permutation(cells, rows, cols):
    c = np.array(cells).reshape(3, 4)
    ct = CountTable(c)
    perm = CountTable(c[np.ix_(rows, cols)])
    assert stat_dcov_mle(ct) >= 0.0
    assert stat_dcov_mle(perm) == pytest.approx(stat_dcov_mle(ct), abs=1e-14)
    if (c.sum(0) > 0).all() and (c.sum(1) > 0).all():
        assert stat_pearson(ct) >= 0.0
        assert stat_pearson(perm) == pytest.approx(stat_pearson(ct), abs=1e-13)


def test_mle_unbiased_gap_tends_to_centring_constant(rng):
    t = random_table(rng, (3, 4))
    gaps = [scaled_mle_unbiased_gap(t, n) for n in (1e3, 1e4, 1e5, 1e6)]
    errs = np.abs(np.array(gaps) - lemma1_constant(t))
    assert errs[-1] < 1e-4
    assert np.all(np.diff(errs) < 0)


# --- Lemma-1 constant -------------------------------------------------------


def test_centring_constant_uniform_2x2():
    assert lemma1_constant(JointTable(np.full((2, 2), 0.25))) == pytest.approx(0.25, abs=1e-15)


def test_centring_constant_uniform_6x6():
    assert lemma1_constant(JointTable(np.full((6, 6), 1 / 36))) == pytest.approx(25 / 36, abs=1e-15)


def test_centring_constant_setting2_direct():
    t = scenario_table("setting2", 0.1)
    p = t.probs
    r = p.sum(1)
    s = p.sum(0)
    A = (r**2).sum()
    B = (s**2).sum()
    direct = 1 - A - B - 3 * A * B + 4 * (p * np.outer(r, s)).sum() - 3 * brute_dcov(p)
    assert lemma1_constant(t) == pytest.approx(direct, abs=1e-15)


def test_centring_constant_reduces_to_product_form(rng):
    r = rng.dirichlet(np.ones(4))
    s = rng.dirichlet(np.ones(5))
    t = JointTable.from_marginals(r, s)
    assert lemma1_constant(t) == pytest.approx((1 - r @ r) * (1 - s @ s), abs=1e-14)


def test_unbiased_from_probs_rejects_small_n():
    with pytest.raises(DomainError):
        dcov_unbiased_from_probs(np.full((2, 2), 0.25), 3)


# --- serialization ----------------------------------------------------------


def test_json_round_trip(rng):
    t = random_table(rng, (3, 3))
    back = table_from_json(table_to_json(t))
    np.testing.assert_array_equal(back.probs, t.probs)
    ct = CountTable([[1, 2], [3, 4]])
    assert table_from_json(table_to_json(ct), kind="counts") == ct


def test_csv_round_trip_is_exact(rng):
    t = random_table(rng, (4, 2))
    for header in (False, True):
        back = table_from_csv(table_to_csv(t, header=header))
        np.testing.assert_array_equal(back.probs, t.probs)


def test_json_shape_mismatch():
    with pytest.raises(DomainError):
        table_from_json('{"I": 2, "J": 2, "cells": [[0.5, 0.5]]}')


def test_read_table_by_extension(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n0.25,0.25\n0.25,0.25\n")
    assert read_table(p).shape == (2, 2)
    q = tmp_path / "t.json"
    q.write_text(table_to_json(CountTable([[1, 2], [3, 4]])))
    assert read_table(q, kind="counts").n == 10
