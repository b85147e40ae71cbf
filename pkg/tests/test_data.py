import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bayesnmf.data import (SPARSITY_SLACK, ParseError, RatingsFile, SplitSpec, add_noise,
                           bundled_fixture, clean_min_observed, holdout_split,
                           load_ratings, split_train_test, synthetic_generate,
                           train_size, write_triples)
from bayesnmf.model import ObservedMatrix


def write(tmp_path, text, name="r.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_udata_line(tmp_path):
    p = write(tmp_path, "196\t242\t3\t881250949\n186\t302\t3\t891717742\n")
    d = load_ratings(p, "u.data")
    assert d.shape == (2, 2)
    # users sorted (186, 196), items sorted (242, 302)
    assert d.values[1, 0] == 3.0 and d.mask[1, 0]
    assert d.observed_count == 2


def test_ratings_dat_line(tmp_path):
    p = write(tmp_path, "1::1193::5::978300760\n")
    d = load_ratings(RatingsFile(p, "ratings.dat"))
    assert d.values.tolist() == [[5.0]]


def test_duplicate_pair_keeps_last_value(tmp_path):
    p = write(tmp_path, "1\t1\t2\t0\n1\t2\t4\t0\n1\t1\t5\t0\n")
    d = load_ratings(p)
    assert d.observed_count == 2 and d.values[0, 0] == 5.0


@pytest.mark.parametrize("text,lineno", [("1\t1\t3\t0\n1\t2\n", 2),
                                         ("1\tx\t3\t0\n", 1),
                                         ("1\t1\t3\t0\n\n2\t1\t7\t0\n", 3)])
def test_malformed_lines_report_line_number(tmp_path, text, lineno):
    with pytest.raises(ParseError) as err:
        load_ratings(write(tmp_path, text))
    assert err.value.lineno == lineno


def test_empty_file_rejected(tmp_path):
    with pytest.raises(ValueError):
        load_ratings(write(tmp_path, "\n"))


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValueError):
        RatingsFile(tmp_path / "x", "csv")


def test_triples_round_trip(tmp_path):
    data, _, _ = synthetic_generate(6, 5, 2, 0.3, seed=1)
    data = data.with_mask(np.random.default_rng(0).random(data.shape) < 0.8)
    data.mask[:, 0] = data.mask[0, :] = True  # keep every row and column present
    write_triples(tmp_path / "t.tsv", data)
    back = load_ratings(tmp_path / "t.tsv", "synthetic")
    np.testing.assert_array_equal(back.mask, data.mask)
    np.testing.assert_array_equal(back.values[back.mask], data.values[data.mask])


def test_bundled_fixture_is_full_50_by_40():
    d = load_ratings(bundled_fixture(), "synthetic")
    assert d.shape == (50, 40) and d.mask.all()


def mask_from_rows(rows, n_cols):
    m = np.zeros((len(rows), n_cols), bool)
    for i, cols in enumerate(rows):
        m[i, list(cols)] = True
    return ObservedMatrix(np.arange(m.size, dtype=float).reshape(m.shape), m)


def test_clean_single_pass():
    d = mask_from_rows([(0, 1, 2), (0, 1, 2), (0, 1, 2), (0, 1)], 3)
    out = clean_min_observed(d, 3)
    assert out.shape == (3, 3) and out.mask.all()


def test_clean_cascade():
    # row 3 has two entries; dropping it leaves column 3 with two, whose
    # removal leaves row 4 with two
    d = mask_from_rows([(0, 1, 2, 3), (0, 1, 2), (0, 1, 2, 4), (3, 4), (0, 1, 3)], 5)
    out = clean_min_observed(d, 3)
    assert out.shape == (3, 3)
    np.testing.assert_array_equal(out.values, d.values[:3, :3])


def test_clean_fixed_point():
    d = mask_from_rows([(0, 1, 2)] * 3, 3)
    out = clean_min_observed(d, 3)
    np.testing.assert_array_equal(out.mask, d.mask)
    np.testing.assert_array_equal(out.values, d.values)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.2, 0.9))
def test_clean_result_satisfies_minimum(seed, density):
    rng = np.random.default_rng(seed)
    m = rng.random((12, 10)) < density
    try:
        out = clean_min_observed(ObservedMatrix(np.ones(m.shape), m), 3)
    except ValueError:
        return
    assert (out.mask.sum(axis=0) >= 3).all() and (out.mask.sum(axis=1) >= 3).all()


def test_split_counts_and_disjointness():
    m = np.zeros((4, 5), bool)
    m.flat[:10] = True
    d = ObservedMatrix(np.ones((4, 5)), m)
    # 10 observed of 20 cells; 0.75 unobserved leaves 5 in train
    tr, te = split_train_test(d, SplitSpec(0.75, seed=3))
    assert tr.observed_count == 5 and te.observed_count == 5
    assert not (tr.mask & te.mask).any()
    assert ((tr.mask | te.mask) == d.mask).all()


def test_split_deterministic():
    d, _, _ = synthetic_generate(10, 10, 2, 0.0, 0)
    a = split_train_test(d, SplitSpec(0.5, 9))
    b = split_train_test(d, SplitSpec(0.5, 9))
    np.testing.assert_array_equal(a[0].mask, b[0].mask)


def test_split_at_intrinsic_sparsity_leaves_empty_test():
    m = np.random.default_rng(0).random((30, 40)) < 0.072
    d = ObservedMatrix(np.ones(m.shape), m)
    tr, te = split_train_test(d, SplitSpec(round(1 - d.observed_fraction, 3), 0))
    assert te.observed_count == 0 and tr.observed_count == d.observed_count


def test_split_below_intrinsic_sparsity_rejected():
    m = np.zeros((10, 10), bool)
    m[:5] = True
    d = ObservedMatrix(np.ones(m.shape), m)
    with pytest.raises(ValueError):
        train_size(d, 0.5 - 2 * SPARSITY_SLACK)


def test_holdout_fraction():
    d, _, _ = synthetic_generate(20, 10, 2, 0.0, 0)
    tr, te = holdout_split(d, 0.1, 4)
    assert te.observed_count == 20 and tr.observed_count == 180


def test_noise_zero_is_identity():
    d, _, _ = synthetic_generate(5, 4, 2, 0.1, 0)
    out = add_noise(d, 0.0, 1)
    np.testing.assert_array_equal(out.values, d.values)
    assert out is not d


def test_noise_variance_and_mask():
    rng = np.random.default_rng(0)
    values = rng.normal(0, np.sqrt(1.25), (150, 100))
    mask = rng.random(values.shape) < 0.8
    values[~mask] = 7.0
    d = ObservedMatrix(values, mask)
    ratio = 1.25 / np.var(values[mask])  # noise variance of exactly 1.25
    out = add_noise(d, ratio, 5)
    diff = (out.values - d.values)[mask]
    assert mask.sum() >= 10_000
    assert np.var(diff) == pytest.approx(1.25, rel=0.05)
    assert (out.values[~mask] == 7.0).all()


def test_synthetic_noise_free_is_low_rank_nonnegative():
    d, W, Z = synthetic_generate(20, 15, 3, 0.0, 2)
    assert (d.values >= 0).all()
    assert np.linalg.matrix_rank(d.values) <= 3
    np.testing.assert_array_equal(d.values, W @ Z)


def test_synthetic_mean_matches_moment():
    d, _, _ = synthetic_generate(200, 200, 5, 0.0, 3)
    # each entry is a sum of 5 products of unit exponentials
    assert d.values.mean() == pytest.approx(5.0, rel=0.05)


def test_synthetic_deterministic():
    a = synthetic_generate(4, 3, 2, 0.1, 8)
    b = synthetic_generate(4, 3, 2, 0.1, 8)
    for x, y in zip((a[0].values, a[1], a[2]), (b[0].values, b[1], b[2])):
        np.testing.assert_array_equal(x, y)


def test_movielens_100k_cleaned_shape(ml100k_path):
    d = clean_min_observed(load_ratings(ml100k_path, "u.data"), 3)
    assert d.shape == (943, 1473)
    assert d.observed_count == 99_723
    assert round(d.observed_fraction, 3) == 0.072
