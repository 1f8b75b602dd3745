"""Oracle and property tests for the evaluation metrics."""

import json

import numpy as np
import pytest
from scipy.optimize import linprog

from margctgan.data import (
    CATEGORICAL,
    NUMERICAL,
    Column,
    DataError,
    MixtureColumn,
    PriorColumn,
    Schema,
    Table,
    TargetRule,
    ToySpec,
    split,
    toy_dataset,
)
from margctgan.metrics import (
    CSV_COLUMNS,
    METRIC_NAMES,
    NUMERICAL_BIN_SIZES,
    REPRESENTATIVE_METRICS,
    GridHistogram,
    MetricError,
    MetricReport,
    association_matrix,
    associations_difference,
    categorical_histogram,
    column_correlation,
    column_correlation_info,
    correlation_ratio,
    cramers_v,
    csv_line,
    dimension_wise_prediction,
    distance_to_closest_record,
    evaluate,
    f1_score,
    feature_map,
    fit_logreg,
    fit_mlp,
    fit_tree,
    histogram_intersection,
    jensen_shannon_distance,
    likelihood_approximation,
    ml_efficacy,
    numerical_histogram,
    pearson_correlation,
    r2_normalized,
    wasserstein_1d,
)


def hist(positions, mass):
    return GridHistogram(np.asarray(positions, dtype=float), np.asarray(mass, dtype=float))


def random_hist(rng, positions):
    mass = rng.random(len(positions)) + 1e-3
    return hist(positions, mass / mass.sum())


def transport_lp(p: GridHistogram, q: GridHistogram) -> float:
    """Exhaustive minimal-transport cost via a linear program."""
    n = len(p.positions)
    cost = np.abs(p.positions[:, None] - q.positions[None, :]).ravel()
    a_eq = np.zeros((2 * n, n * n))
    for i in range(n):
        a_eq[i, i * n : (i + 1) * n] = 1.0
        a_eq[n + i, i::n] = 1.0
    res = linprog(
        cost,
        A_eq=a_eq,
        b_eq=np.concatenate([p.mass, q.mass]),
        bounds=(0, None),
        method="highs",
    )
    assert res.success
    return float(res.fun)


# ---------------------------------------------------------------------------
# grid histograms


class TestGridHistogram:
    def test_mass_must_normalize(self):
        with pytest.raises(MetricError):
            hist([0.0, 1.0], [0.5, 0.4])

    def test_mass_must_be_nonnegative(self):
        with pytest.raises(MetricError):
            hist([0.0, 1.0], [1.5, -0.5])

    def test_positions_strictly_increasing(self):
        with pytest.raises(MetricError):
            hist([0.0, 0.0], [0.5, 0.5])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            hist([0.0, 0.5, 1.0], [0.5, 0.5])

    def test_empty_column_rejected(self):
        with pytest.raises(MetricError):
            numerical_histogram(np.array([]), 25, 0.0, 1.0)
        with pytest.raises(MetricError):
            categorical_histogram(np.array([], dtype=int), 3)

    def test_numerical_grid_and_placement(self):
        h = numerical_histogram(np.array([0.0, 10.0, 10.0, 5.0]), 25, 0.0, 10.0)
        assert np.array_equal(h.positions, np.linspace(0.0, 1.0, 25))
        assert h.mass[0] == 0.25
        assert h.mass[-1] == 0.5
        assert h.mass[12] == 0.25  # midpoint lands on the central grid point

    def test_out_of_range_values_clip_into_end_bins(self):
        h = numerical_histogram(np.array([-50.0, 50.0]), 25, 0.0, 10.0)
        assert h.mass[0] == 0.5 and h.mass[-1] == 0.5

    def test_degenerate_bounds_collapse_to_first_bin(self):
        h = numerical_histogram(np.array([3.0, 3.0]), 25, 3.0, 3.0)
        assert h.mass[0] == 1.0

    def test_categorical_unit_spacing(self):
        h = categorical_histogram(np.array([0, 1, 1, 3]), 4)
        assert np.array_equal(h.positions, np.arange(4.0))
        assert np.allclose(h.mass, [0.25, 0.5, 0.0, 0.25])

    def test_categorical_code_range_checked(self):
        with pytest.raises(MetricError):
            categorical_histogram(np.array([0, 3]), 3)

    def test_grid_mismatch_rejected(self):
        p = hist([0.0, 1.0], [0.5, 0.5])
        q = hist([0.0, 2.0], [0.5, 0.5])
        with pytest.raises(MetricError):
            histogram_intersection(p, q)


class TestMarginalMetrics:
    def test_intersection_identity(self):
        p = hist([0.0, 0.5, 1.0], [0.2, 0.3, 0.5])
        assert histogram_intersection(p, p) == pytest.approx(1.0)

    def test_intersection_disjoint(self):
        p = hist([0.0, 1.0], [1.0, 0.0])
        q = hist([0.0, 1.0], [0.0, 1.0])
        assert histogram_intersection(p, q) == 0.0

    def test_intersection_example(self):
        p = hist([0.0, 1.0], [0.5, 0.5])
        q = hist([0.0, 1.0], [0.25, 0.75])
        assert histogram_intersection(p, q) == pytest.approx(0.75)

    def test_js_identity_and_disjoint(self):
        p = hist([0.0, 1.0], [0.3, 0.7])
        q = hist([0.0, 1.0], [0.0, 1.0])
        r = hist([0.0, 1.0], [1.0, 0.0])
        assert jensen_shannon_distance(p, p) == pytest.approx(0.0, abs=1e-12)
        assert jensen_shannon_distance(q, r) == pytest.approx(1.0)

    def test_js_half_mass_example(self):
        p = hist([0.0, 1.0], [1.0, 0.0])
        q = hist([0.0, 1.0], [0.5, 0.5])
        assert jensen_shannon_distance(p, q) == pytest.approx(np.sqrt(0.31128), abs=1e-4)

    def test_w1_identity(self):
        p = hist(np.linspace(0, 1, 25), np.full(25, 1 / 25))
        assert wasserstein_1d(p, p) == 0.0

    def test_w1_unit_masses_at_ends(self):
        grid = np.linspace(0.0, 1.0, 50)
        p = hist(grid, np.eye(50)[0])
        q = hist(grid, np.eye(50)[-1])
        assert wasserstein_1d(p, q) == pytest.approx(1.0)

    def test_w1_two_bin_example(self):
        p = hist([0.0, 1.0], [0.5, 0.5])
        q = hist([0.0, 1.0], [1.0, 0.0])
        assert wasserstein_1d(p, q) == pytest.approx(0.5)

    def test_w1_matches_transport_lp(self):
        # brute-force minimal transport on every small histogram pair
        rng = np.random.default_rng(7)
        for trial in range(40):
            bins = int(rng.integers(2, 5))
            if trial % 2 == 0:
                grid = np.linspace(0.0, 1.0, bins)
            else:
                grid = np.sort(rng.random(bins) * 0.8 + 0.1 * np.arange(bins))
            p = random_hist(rng, grid)
            q = random_hist(rng, grid)
            assert wasserstein_1d(p, q) == pytest.approx(transport_lp(p, q), abs=1e-3)

    def test_marginal_metric_symmetry_and_ranges(self):
        rng = np.random.default_rng(11)
        grid = np.linspace(0.0, 1.0, 25)
        for _ in range(25):
            p = random_hist(rng, grid)
            q = random_hist(rng, grid)
            hi = histogram_intersection(p, q)
            js = jensen_shannon_distance(p, q)
            w1 = wasserstein_1d(p, q)
            assert hi == pytest.approx(histogram_intersection(q, p))
            assert js == pytest.approx(jensen_shannon_distance(q, p))
            assert w1 == pytest.approx(wasserstein_1d(q, p))
            assert 0.0 <= hi <= 1.0
            assert 0.0 <= js <= 1.0
            assert 0.0 <= w1 <= 1.0

    def test_column_correlation_identity_and_anti(self):
        p = hist([0.0, 1.0], [1.0, 0.0])
        q = hist([0.0, 1.0], [0.0, 1.0])
        r = hist([0.0, 0.5, 1.0], [0.2, 0.3, 0.5])
        assert column_correlation(r, r) == pytest.approx(1.0)
        assert column_correlation(p, q) == 0.0  # r = -1 clamps to the floor

    def test_column_correlation_formula_oracle(self):
        rng = np.random.default_rng(5)
        grid = np.linspace(0.0, 1.0, 50)
        p = random_hist(rng, grid)
        q = random_hist(rng, grid)
        a, b = p.mass, q.mass
        direct = np.mean((a - a.mean()) * (b - b.mean())) / (a.std() * b.std())
        value, fell_back = column_correlation_info(p, q)
        assert not fell_back
        assert value == pytest.approx(min(max(direct, 0.0), 1.0), abs=1e-12)

    def test_column_correlation_uniform_falls_back(self):
        p = hist([0.0, 0.5, 1.0], np.full(3, 1 / 3))
        value, fell_back = column_correlation_info(p, p)
        assert fell_back
        assert value == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# association metrics


def codes_from_contingency(table: np.ndarray):
    a, b = [], []
    for i in range(table.shape[0]):
        for j in range(table.shape[1]):
            a.extend([i] * int(table[i, j]))
            b.extend([j] * int(table[i, j]))
    return np.array(a), np.array(b)


def cramers_v_direct(table: np.ndarray) -> float:
    n = table.sum()
    rows = table.sum(axis=1, keepdims=True)
    cols = table.sum(axis=0, keepdims=True)
    expected = rows @ cols / n
    chi2 = np.sum((table - expected) ** 2 / expected)
    return float(np.sqrt(chi2 / (n * (min(table.shape) - 1))))


class TestAssociation:
    def test_pearson_basic(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert pearson_correlation(x, 2 * x + 1) == pytest.approx(1.0)
        assert pearson_correlation(x, -x) == pytest.approx(-1.0)
        assert pearson_correlation(x, np.full(4, 2.0)) == 0.0

    def test_cramers_v_hand_case(self):
        a, b = codes_from_contingency(np.array([[30, 10], [10, 30]]))
        assert cramers_v(a, b) == pytest.approx(0.5, abs=1e-12)

    def test_cramers_v_independent_and_diagonal(self):
        a, b = codes_from_contingency(np.array([[20, 20], [20, 20]]))
        assert cramers_v(a, b) == pytest.approx(0.0, abs=1e-12)
        a, b = codes_from_contingency(np.array([[40, 0], [0, 40]]))
        assert cramers_v(a, b) == pytest.approx(1.0)

    def test_cramers_v_single_level_column(self):
        a = np.zeros(10, dtype=int)
        b = np.array([0, 1] * 5)
        assert cramers_v(a, b) == 0.0

    def test_cramers_v_property_100_tables(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            table = rng.integers(1, 20, size=(3, 3))
            a, b = codes_from_contingency(table)
            assert cramers_v(a, b) == pytest.approx(cramers_v_direct(table), abs=1e-9)

    def test_correlation_ratio_hand_case(self):
        codes = np.array([0, 0, 1, 1])
        values = np.array([1.0, 3.0, 5.0, 7.0])
        assert correlation_ratio(codes, values) == pytest.approx(np.sqrt(0.8), abs=1e-12)

    def test_correlation_ratio_extremes(self):
        codes = np.array([0, 0, 1, 1])
        assert correlation_ratio(codes, np.array([2.0, 2.0, 5.0, 5.0])) == pytest.approx(1.0)
        assert correlation_ratio(codes, np.array([1.0, 3.0, 1.0, 3.0])) == pytest.approx(0.0)
        # zero total variance is defined as 0
        assert correlation_ratio(codes, np.full(4, 1.0)) == 0.0

    def test_correlation_ratio_property_100_cases(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            codes = np.concatenate([np.arange(3), rng.integers(0, 3, 40)])
            values = rng.normal(size=codes.size)
            grand = values.mean()
            between = sum(
                (codes == g).sum() * (values[codes == g].mean() - grand) ** 2
                for g in range(3)
            )
            total = np.sum((values - grand) ** 2)
            assert correlation_ratio(codes, values) == pytest.approx(
                np.sqrt(between / total), abs=1e-9
            )


def mixed_schema():
    return Schema(
        (
            Column("x", NUMERICAL),
            Column("y", NUMERICAL),
            Column("c", CATEGORICAL, ("a", "b")),
        )
    )


def mixed_table(seed, n=200):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    codes = rng.integers(0, 2, size=n)
    y = x + codes + 0.3 * rng.normal(size=n)
    return Table(mixed_schema(), np.column_stack([x, y]), codes[:, None])


class TestAssociationMatrix:
    def test_symmetry_diagonal_and_ranges(self):
        m = association_matrix(mixed_table(0))
        assert m.shape == (3, 3)
        assert np.allclose(m, m.T)
        assert np.allclose(np.diag(m), 1.0)
        assert m[0, 1] == pytest.approx(
            pearson_correlation(mixed_table(0).numerical_column("x"),
                                mixed_table(0).numerical_column("y"))
        )
        assert 0.0 <= m[0, 2] <= 1.0 and 0.0 <= m[1, 2] <= 1.0

    def test_difference_identity(self):
        t = mixed_table(1)
        assert associations_difference(t, t) == 0.0

    def test_single_column_table(self):
        schema = Schema((Column("x", NUMERICAL),))
        a = Table(schema, np.arange(5.0)[:, None], np.zeros((5, 0), dtype=int))
        b = Table(schema, np.arange(5.0)[:, None] * 2 + 3, np.zeros((5, 0), dtype=int))
        assert associations_difference(a, b) == 0.0

    def test_entrywise_recomputation(self):
        real, synth = mixed_table(2), mixed_table(3)
        diff = np.abs(association_matrix(real) - association_matrix(synth))
        assert associations_difference(real, synth) == pytest.approx(diff.mean(), abs=1e-12)

    def test_schema_mismatch_rejected(self):
        t = mixed_table(4)
        schema = Schema((Column("x", NUMERICAL),))
        other = Table(schema, np.arange(5.0)[:, None], np.zeros((5, 0), dtype=int))
        with pytest.raises(MetricError):
            associations_difference(t, other)


# ---------------------------------------------------------------------------
# joint fidelity


def one_cat_table(codes):
    schema = Schema((Column("c", CATEGORICAL, ("a", "b")),))
    codes = np.asarray(codes, dtype=int)
    return Table(schema, np.zeros((codes.size, 0)), codes[:, None])


def one_num_table(values):
    schema = Schema((Column("x", NUMERICAL),))
    values = np.asarray(values, dtype=float)
    return Table(schema, values[:, None], np.zeros((values.size, 0), dtype=int))


class TestJointFidelity:
    def test_dcr_exact_copy_is_zero(self):
        t = mixed_table(5, n=60)
        assert distance_to_closest_record(t, t) == 0.0

    def test_dcr_onehot_flip_is_sqrt2(self):
        synth = one_cat_table([0])
        test = one_cat_table([1])
        assert distance_to_closest_record(synth, test) == pytest.approx(np.sqrt(2.0))

    def test_dcr_row_permutation_invariant(self):
        rng = np.random.default_rng(0)
        synth, test = mixed_table(6, n=40), mixed_table(7, n=50)
        base = distance_to_closest_record(synth, test)
        perm_s = synth.take(rng.permutation(40))
        perm_t = test.take(rng.permutation(50))
        assert distance_to_closest_record(perm_s, perm_t) == pytest.approx(base, abs=1e-12)

    def test_dcr_kth_neighbor(self):
        synth = one_num_table([0.0])
        test = one_num_table([0.0, 1.0])
        assert distance_to_closest_record(synth, test, k=1) == 0.0
        assert distance_to_closest_record(synth, test, k=2) == pytest.approx(1.0)
        with pytest.raises(MetricError):
            distance_to_closest_record(synth, test, k=3)

    def test_dcr_sampling_cap_is_seeded(self):
        synth, test = mixed_table(8, n=30), mixed_table(9, n=120)
        a = distance_to_closest_record(synth, test, sample_cap=40, rng=np.random.default_rng(3))
        b = distance_to_closest_record(synth, test, sample_cap=40, rng=np.random.default_rng(3))
        assert a == b

    def test_likelihood_superset_is_zero(self):
        t = mixed_table(10, n=40)
        assert likelihood_approximation(t, t) == 0.0

    def test_likelihood_two_row_mean(self):
        test = one_num_table([0.0, 1.0])
        synth = one_num_table([0.0])
        assert likelihood_approximation(test, synth) == pytest.approx(0.5)

    def test_likelihood_monotone_under_union(self):
        rng = np.random.default_rng(1)
        test = mixed_table(11, n=50)
        small = mixed_table(12, n=20)
        extra = mixed_table(13, n=30)
        union = Table(
            small.schema,
            np.vstack([small.numerical, extra.numerical]),
            np.vstack([small.categorical, extra.categorical]),
        )
        assert likelihood_approximation(test, union) <= likelihood_approximation(test, small)

    def test_empty_inputs_rejected(self):
        t = mixed_table(14, n=10)
        empty = Table(t.schema, np.zeros((0, 2)), np.zeros((0, 1), dtype=int))
        with pytest.raises(MetricError):
            distance_to_closest_record(empty, t)
        with pytest.raises(MetricError):
            likelihood_approximation(t, empty)


# ---------------------------------------------------------------------------
# downstream predictors


def two_blob_features(rng, n=200, gap=2.0, std=0.3):
    y = rng.integers(0, 2, size=n)
    x = rng.normal(size=(n, 2)) * std
    x[:, 0] += gap * (y - 0.5)
    return x, y


class TestPredictors:
    def test_logreg_separable_training_accuracy(self):
        rng = np.random.default_rng(0)
        x, y = two_blob_features(rng)
        model = fit_logreg(x, y, "classification")
        assert np.mean(model.predict(x) == y) == 1.0

    def test_logreg_boundary_near_midpoint(self):
        rng = np.random.default_rng(1)
        n = 400
        y = rng.integers(0, 2, size=n)
        x = (rng.normal(size=n) * 0.3 + (2.0 * y - 1.0))[:, None]
        model = fit_logreg(x, y, "classification")
        xs = np.linspace(-1.0, 1.0, 2001)[:, None]
        pred = model.predict(xs)
        flips = np.nonzero(np.diff(pred))[0]
        assert flips.size >= 1
        boundary = xs[flips[0], 0]
        assert abs(boundary) < 0.1

    def test_linreg_recovers_line(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(100, 1))
        y = 2.0 * x[:, 0] + 1.0
        model = fit_logreg(x, y, "regression")
        assert np.allclose(model.predict(x), y, atol=1e-4)
        assert model.weights[0] == pytest.approx(2.0, abs=1e-4)
        assert model.bias[0] == pytest.approx(1.0, abs=1e-4)

    def test_tree_shatters_training_set(self):
        rng = np.random.default_rng(3)
        x = np.arange(16.0)[:, None]
        y = rng.integers(0, 2, size=16)
        model = fit_tree(x, y, "classification")
        assert np.mean(model.predict(x) == y) == 1.0

    def test_tree_regression_split(self):
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.0, 0.0, 10.0, 10.0])
        model = fit_tree(x, y, "regression")
        assert np.allclose(model.predict(x), y)
        assert model.root.threshold == pytest.approx(1.5)

    def test_tree_depth_limit(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(50, 3))
        y = rng.integers(0, 2, size=50)
        stump = fit_tree(x, y, "classification", max_depth=0)
        assert np.unique(stump.predict(x)).size == 1

    def test_mlp_learns_separable_toy(self):
        rng = np.random.default_rng(5)
        x, y = two_blob_features(rng, n=300)
        model = fit_mlp(x, y, "classification", seed=0)
        assert np.mean(model.predict(x) == y) >= 0.95

    def test_mlp_regression_fits_line(self):
        rng = np.random.default_rng(6)
        x = rng.uniform(-1, 1, size=(200, 1))
        y = 3.0 * x[:, 0]
        model = fit_mlp(x, y, "regression", seed=0)
        assert r2_normalized(model.predict(x), y) > 0.95

    def test_mlp_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        x, y = two_blob_features(rng, n=100)
        a = fit_mlp(x, y, "classification", seed=9).predict(x)
        b = fit_mlp(x, y, "classification", seed=9).predict(x)
        assert np.array_equal(a, b)

    def test_single_class_degenerates_to_constant(self):
        x = np.random.default_rng(8).normal(size=(20, 2))
        y = np.ones(20, dtype=int)
        for fit in (fit_logreg, fit_tree, fit_mlp):
            model = fit(x, y, "classification")
            assert model.degenerate
            assert np.all(model.predict(x) == 1)

    def test_zero_features_degenerate(self):
        x = np.zeros((10, 0))
        y = np.array([0, 0, 0, 1, 1, 1, 1, 1, 1, 1])
        model = fit_logreg(x, y, "classification")
        assert model.degenerate
        assert np.all(model.predict(x) == 1)

    def test_unknown_task_rejected(self):
        with pytest.raises(MetricError):
            fit_logreg(np.zeros((3, 1)), np.zeros(3), "ranking")


class TestScores:
    def test_f1_perfect(self):
        y = np.array([0, 1, 1, 0])
        assert f1_score(y, y, positive=1) == 1.0

    def test_f1_half_case(self):
        pred = np.array([1, 1, 0, 0])
        true = np.array([1, 0, 1, 0])
        assert f1_score(pred, true, positive=1) == pytest.approx(0.5)

    def test_f1_macro(self):
        pred = np.array([0, 1, 2, 1])
        true = np.array([0, 1, 1, 2])
        # class 0: 1.0, class 1: 0.5, class 2: 0.0
        assert f1_score(pred, true) == pytest.approx(0.5)

    def test_f1_no_true_positives(self):
        assert f1_score(np.zeros(4, dtype=int), np.ones(4, dtype=int), positive=1) == 0.0

    def test_r2_normalized_map(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert r2_normalized(y, y) == 1.0
        assert r2_normalized(np.full(4, y.mean()), y) == pytest.approx(0.5)
        assert r2_normalized(np.full(4, 100.0), y) == 0.0  # r2 below the -1 floor

    def test_r2_constant_truth(self):
        assert r2_normalized(np.ones(3), np.ones(3)) == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# utility metrics


def utility_toy(flip=0.02):
    return ToySpec(
        numericals=(MixtureColumn("x", means=(-2.0, 2.0), stds=(0.3, 0.3), weights=(0.45, 0.55)),),
        categoricals=(
            PriorColumn("group", ("a", "b"), (0.6, 0.4)),
            PriorColumn("label", ("neg", "pos"), (0.5, 0.5)),
        ),
        rule=TargetRule("label", "x", (0.0,), flip),
        target="label",
    )


@pytest.fixture(scope="module")
def utility_split():
    table = toy_dataset(utility_toy(), 1000, seed=21)
    return split(table, 0.3, seed=1)


class TestUtility:
    def test_efficacy_on_real_data_is_high(self, utility_split):
        train, test = utility_split
        result = ml_efficacy(train, test, seed=0)
        assert result.score >= 0.9
        assert set(result.breakdown) == {"linear", "tree", "mlp"}
        for value in result.breakdown.values():
            assert 0.0 <= value <= 1.0
        assert result.score == pytest.approx(np.mean(list(result.breakdown.values())))

    def test_efficacy_deterministic(self, utility_split):
        train, test = utility_split
        a = ml_efficacy(train, test, seed=3)
        b = ml_efficacy(train, test, seed=3)
        assert a == b

    def test_shuffled_target_drops_to_baseline(self, utility_split):
        train, test = utility_split
        rng = np.random.default_rng(0)
        cat = train.categorical.copy()
        label_pos = train.schema.categorical_names.index("label")
        cat[:, label_pos] = rng.permutation(cat[:, label_pos])
        shuffled = Table(train.schema, train.numerical.copy(), cat)

        majority = np.argmax(np.bincount(shuffled.categorical_codes("label")))
        y_test = test.categorical_codes("label")
        baseline = f1_score(np.full(y_test.size, majority), y_test, positive=1)
        result = ml_efficacy(shuffled, test, seed=0)
        assert result.score <= baseline + 0.05

    def test_positive_label_comes_from_schema(self, utility_split):
        train, test = utility_split
        assert train.schema.positive_label is None
        # default positive class is the last category ("pos")
        result = ml_efficacy(train, test, seed=0)
        flipped_schema = Schema(
            train.schema.columns,
            target="label",
            task="classification",
            positive_label="neg",
        )
        flipped_train = Table(flipped_schema, train.numerical, train.categorical)
        flipped_test = Table(flipped_schema, test.numerical, test.categorical)
        other = ml_efficacy(flipped_train, flipped_test, seed=0)
        assert other.score != pytest.approx(result.score)

    def test_efficacy_requires_target(self):
        t = mixed_table(20)
        with pytest.raises(MetricError):
            ml_efficacy(t, t, seed=0)

    def test_dimension_wise_matches_per_column_runs(self, utility_split):
        train, test = utility_split
        overall = dimension_wise_prediction(train, test, seed=0)
        assert set(overall.breakdown) == set(train.schema.names)
        for name in train.schema.names:
            cell = ml_efficacy(train, test, target=name, seed=0)
            assert overall.breakdown[name] == pytest.approx(cell.score, abs=1e-12)
        assert overall.score == pytest.approx(np.mean(list(overall.breakdown.values())))

    def test_independent_coins_have_no_signal(self):
        rng = np.random.default_rng(30)
        schema = Schema(
            (
                Column("c1", CATEGORICAL, ("h", "t")),
                Column("c2", CATEGORICAL, ("h", "t")),
            )
        )
        codes = rng.integers(0, 2, size=(500, 2))
        table = Table(schema, np.zeros((500, 0)), codes)
        test = Table(schema, np.zeros((500, 0)), rng.integers(0, 2, size=(500, 2)))
        result = dimension_wise_prediction(table, test, seed=0)
        for value in result.breakdown.values():
            assert value <= 0.8  # nothing learnable beyond the majority class


# ---------------------------------------------------------------------------
# full report


@pytest.fixture(scope="module")
def report_inputs():
    spec = utility_toy()
    table = toy_dataset(spec, 900, seed=33)
    train, test = split(table, 0.3, seed=2)
    synth = toy_dataset(spec, 600, seed=34)
    return train, test, synth


@pytest.fixture(scope="module")
def toy_report(report_inputs):
    train, test, synth = report_inputs
    meta = {"dataset": "toy", "subset_size": -1, "variant": "margctgan", "seed": 0, "trial": 0}
    return evaluate(train, test, synth, k=1, seed=0, metadata=meta)


class TestReport:
    def test_all_nine_scores_present_and_finite(self, toy_report):
        assert set(toy_report.scores) == set(METRIC_NAMES)
        for value in toy_report.scores.values():
            assert np.isfinite(value)

    def test_representative_metrics_are_a_subset(self):
        assert set(REPRESENTATIVE_METRICS) <= set(METRIC_NAMES)
        assert len(REPRESENTATIVE_METRICS) == 4

    def test_breakdown_means_reproduce_scalars(self, toy_report):
        for metric in (
            "histogram_intersection",
            "jensen_shannon_distance",
            "wasserstein_1d",
            "column_correlation",
        ):
            by_column = toy_report.breakdowns[metric]["by_column"]
            assert toy_report.scores[metric] == pytest.approx(
                np.mean(list(by_column.values())), abs=1e-12
            )
        eff = toy_report.breakdowns["ml_efficacy"]["by_model"]
        assert toy_report.scores["ml_efficacy"] == pytest.approx(
            np.mean(list(eff.values())), abs=1e-12
        )
        dwp = toy_report.breakdowns["dimension_wise_prediction"]["by_column"]
        assert toy_report.scores["dimension_wise_prediction"] == pytest.approx(
            np.mean(list(dwp.values())), abs=1e-12
        )

    def test_numerical_columns_average_three_bin_counts(self, toy_report):
        bins = toy_report.breakdowns["histogram_intersection"]["by_bins"]["x"]
        assert set(bins) == {str(b) for b in NUMERICAL_BIN_SIZES}
        assert toy_report.breakdowns["histogram_intersection"]["by_column"]["x"] == pytest.approx(
            np.mean(list(bins.values()))
        )

    def test_json_round_trip_is_stable(self, toy_report):
        text = toy_report.to_json()
        again = MetricReport.from_json(text)
        assert again == toy_report
        assert again.to_json() == text

    def test_csv_row_matches_header(self, toy_report):
        line = csv_line(toy_report)
        assert len(line.split(",")) == len(CSV_COLUMNS)
        row = toy_report.csv_row()
        assert row["dataset"] == "toy"
        assert row["variant"] == "margctgan"
        for metric in METRIC_NAMES:
            assert row[metric] == toy_report.scores[metric]

    def test_evaluate_deterministic(self, report_inputs, toy_report):
        train, test, synth = report_inputs
        meta = {"dataset": "toy", "subset_size": -1, "variant": "margctgan", "seed": 0, "trial": 0}
        again = evaluate(train, test, synth, k=1, seed=0, metadata=meta)
        assert again.to_json() == toy_report.to_json()

    def test_reference_run_beats_independent_synth(self, report_inputs, toy_report):
        train, test, _ = report_inputs
        ref = evaluate(train, test, train, seed=0)
        assert ref.scores["histogram_intersection"] >= 0.8
        assert ref.scores["ml_efficacy"] >= 0.9
        assert ref.scores["associations_difference"] <= 0.15

    def test_report_validates_scores(self):
        with pytest.raises(MetricError):
            MetricReport({}, {m: 0.5 for m in METRIC_NAMES[:-1]}, {})
        scores = {m: 0.5 for m in METRIC_NAMES}
        scores["ml_efficacy"] = float("nan")
        with pytest.raises(MetricError):
            MetricReport({}, scores, {})

    def test_schema_mismatch_rejected(self, report_inputs):
        train, test, _ = report_inputs
        with pytest.raises(MetricError):
            evaluate(train, test, mixed_table(0))

    def test_json_is_plain_serializable(self, toy_report):
        payload = json.loads(toy_report.to_json())
        assert set(payload) == {"metadata", "scores", "breakdowns"}


class TestFeatureMap:
    def test_classification_standardizes_numericals(self):
        t = mixed_table(40)
        fm = feature_map(t, "c", "classification")
        x = fm.apply(t)
        assert x.shape == (t.n_rows, 2)
        assert np.allclose(x.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(x.std(axis=0), 1.0, atol=1e-9)

    def test_regression_keeps_raw_numericals(self):
        t = mixed_table(41)
        fm = feature_map(t, "y", "regression")
        x = fm.apply(t)
        assert np.array_equal(x[:, 0], t.numerical_column("x"))
        # categorical block is one-hot
        assert np.array_equal(x[:, 1:], np.eye(2)[t.categorical_codes("c")])

    def test_target_excluded_and_width(self):
        t = mixed_table(42)
        fm = feature_map(t, "x", "regression")
        assert "x" not in fm.numericals
        assert fm.width == 1 + 2

    def test_unknown_target_rejected(self):
        with pytest.raises(DataError):
            feature_map(mixed_table(43), "nope", "regression")
