import numpy as np
import pytest

from udsparse.analysis import (
    AttributeMatrix,
    DegenerateError,
    align_matrices,
    binarized_f1,
    edge_attribute_matrix,
    median_baseline,
    node_attribute_matrix,
    pearson_per_attribute,
    psi,
    psi_matrix,
    tune_thresholds,
)
from udsparse.synthetic import SyntheticGrammarConfig, generate_synthetic

PROPS = ("p1", "p2", "p3", "p4")


def matrix(values, confidence=None, properties=PROPS, keys=None):
    values = np.asarray(values, dtype=float)
    if confidence is None:
        confidence = np.ones_like(values)
    keys = keys or tuple(f"row{i}" for i in range(values.shape[0]))
    return AttributeMatrix(tuple(properties), tuple(keys), values,
                           np.asarray(confidence, dtype=float))


def correlated_pair(n, rho, seed, noise=0.0):
    """Two gold columns with target correlation, plus noisy predictions."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 2))
    a = z[:, 0]
    b = rho * z[:, 0] + np.sqrt(1 - rho ** 2) * z[:, 1]
    gold = np.column_stack([a, b])
    pred = gold + noise * rng.standard_normal(gold.shape)
    return np.clip(pred, -3, 3), np.clip(gold, -3, 3)


class TestPearson:
    def test_perfect_correlation(self):
        gold = matrix([[1.0, -1.0], [2.0, 0.5], [0.0, 2.0]], properties=("a", "b"))
        out = pearson_per_attribute(gold, gold)
        assert out["a"].rho == pytest.approx(1.0)
        assert out["a"].p_value == pytest.approx(0.0)

    def test_anti_correlation(self):
        gold = matrix([[1.0], [2.0], [3.0]], properties=("a",))
        pred = matrix([[-1.0], [-2.0], [-3.0]], properties=("a",))
        out = pearson_per_attribute(pred, gold)
        assert out["a"].rho == pytest.approx(-1.0)

    def test_constant_prediction_undefined(self):
        gold = matrix([[1.0], [2.0], [3.0]], properties=("a",))
        pred = matrix([[0.5], [0.5], [0.5]], properties=("a",))
        out = pearson_per_attribute(pred, gold)
        assert out["a"].undefined
        assert out["a"].n == 3

    def test_p_value_matches_scipy(self):
        from scipy.stats import pearsonr

        pred_v, gold_v = correlated_pair(40, 0.6, seed=1, noise=0.5)
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        ours = pearson_per_attribute(pred, gold)["a"]
        ref = pearsonr(pred_v[:, 0], gold_v[:, 0])
        assert ours.rho == pytest.approx(ref.statistic, rel=1e-10)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-8)

    def test_respects_annotation_mask(self):
        gold = matrix([[1.0], [2.0], [3.0], [0.0]],
                      confidence=[[1.0], [1.0], [1.0], [0.0]], properties=("a",))
        pred = matrix([[1.0], [2.0], [3.0], [9 - 9]], properties=("a",))
        out = pearson_per_attribute(pred, gold)
        assert out["a"].n == 3


class TestThresholds:
    def test_perfect_separation(self):
        gold = matrix([[2.0], [1.0], [-1.0], [-2.0]], properties=("a",))
        pred = matrix([[0.9], [0.8], [0.1], [0.05]], properties=("a",))
        thresholds = tune_thresholds(pred, gold)
        report = binarized_f1(pred, gold, thresholds)
        assert report.per_property["a"][2] == pytest.approx(1.0)

    def test_all_positive_gold(self):
        gold = matrix([[1.0], [2.0], [0.5]], properties=("a",))
        pred = matrix([[0.3], [0.4], [0.2]], properties=("a",))
        thresholds = tune_thresholds(pred, gold)
        assert thresholds["a"] == pytest.approx(-3.0)
        report = binarized_f1(pred, gold, thresholds)
        assert report.per_property["a"][2] == pytest.approx(1.0)

    def test_threshold_no_worse_than_zero(self):
        rng = np.random.default_rng(7)
        gold_v = rng.uniform(-3, 3, size=(60, 1))
        pred_v = gold_v + rng.normal(scale=1.5, size=gold_v.shape)
        gold = matrix(gold_v, properties=("a",))
        pred = matrix(np.clip(pred_v, -3, 3), properties=("a",))
        thresholds = tune_thresholds(pred, gold)
        tuned = binarized_f1(pred, gold, thresholds).per_property["a"][2]
        at_zero = binarized_f1(pred, gold, {"a": 0.0}).per_property["a"][2]
        assert tuned >= at_zero - 1e-12

    def test_reapplication_consistency(self):
        pred_v, gold_v = correlated_pair(50, 0.7, seed=3, noise=0.8)
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        thresholds = tune_thresholds(pred, gold)
        first = binarized_f1(pred, gold, thresholds)
        second = binarized_f1(pred, gold, thresholds)
        assert first.per_property == second.per_property

    def test_no_pairs_defaults_to_zero(self):
        gold = matrix([[1.0]], confidence=[[0.0]], properties=("a",))
        pred = matrix([[1.0]], properties=("a",))
        assert tune_thresholds(pred, gold)["a"] == 0.0

    def test_macro_is_mean_of_defined(self):
        gold = matrix([[1.0, -1.0], [-1.0, 2.0]], properties=("a", "b"))
        pred = matrix([[1.0, -1.0], [-1.0, 2.0]], properties=("a", "b"))
        report = binarized_f1(pred, gold, {"a": 0.0, "b": 0.0})
        per = [report.per_property[p][2] for p in ("a", "b")]
        assert report.macro_f1 == pytest.approx(np.mean(per))


class TestMedianBaseline:
    def test_odd_count(self):
        gold = matrix([[1.0], [2.0], [3.0]], properties=("a",))
        assert median_baseline(gold).medians["a"] == 2.0

    def test_even_count_mean_of_middle(self):
        gold = matrix([[1.0], [3.0]], properties=("a",))
        assert median_baseline(gold).medians["a"] == 2.0

    def test_rho_undefined_by_construction(self):
        gold = matrix([[1.0], [2.0], [-1.0]], properties=("a",))
        baseline = median_baseline(gold).predict_like(gold)
        out = pearson_per_attribute(baseline, gold)
        assert out["a"].undefined

    def test_skips_unannotated_property(self):
        gold = matrix([[1.0, 0.0]], confidence=[[1.0, 0.0]], properties=("a", "b"))
        base = median_baseline(gold)
        assert "b" not in base.medians
        pred = base.predict_like(gold)
        assert pred.confidence[0, 1] == 0.0


class TestPsi:
    def test_zero_residual_correlation_gives_tanh_one(self):
        pred_v, gold_v = correlated_pair(4000, 0.8, seed=5, noise=0.3)
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        value = psi(pred, gold, "a", "b")
        assert value == pytest.approx(np.tanh(1.0), abs=0.12)

    def test_ratio_one_gives_zero(self):
        # pred == 0 everywhere: residual = gold, so the ratio is exactly 1
        gold_v = correlated_pair(500, 0.9, seed=6)[1]
        # shift gold to zero mean per column so centered and uncentered
        # correlations coincide
        gold_v = gold_v - gold_v.mean(axis=0)
        gold_v = np.clip(gold_v, -3, 3)
        pred = matrix(np.zeros_like(gold_v), properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        assert psi(pred, gold, "a", "b") == pytest.approx(0.0, abs=1e-9)

    def test_double_residual_gives_tanh_minus_one(self):
        # gold pair correlated at exactly 0.5; residuals identical across the
        # two properties, so their (uncentered) correlation is exactly 1 and
        # the ratio is exactly 2
        gold_a = np.array([1.0, 1, 1, 1, -1, -1, -1, -1])
        gold_b = np.array([1.0, 1, -1, 1, -1, -1, 1, -1])
        resid = np.array([1.0, -1, 1, -1, 1, -1, 1, -1])
        gold_v = np.column_stack([gold_a, gold_b])
        pred_v = gold_v - np.column_stack([resid, resid])
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        assert psi(pred, gold, "a", "b") == pytest.approx(np.tanh(-1.0), abs=1e-12)

    def test_too_few_instances(self):
        pred = matrix([[1.0, 1.0], [0.5, 0.5]], properties=("a", "b"))
        with pytest.raises(DegenerateError):
            psi(pred, pred, "a", "b")

    def test_perfect_prediction_degenerate(self):
        gold_v = correlated_pair(100, 0.8, seed=8)[1]
        gold = matrix(gold_v, properties=("a", "b"))
        with pytest.raises(DegenerateError):
            psi(gold, gold, "a", "b")


class TestPsiMatrix:
    def test_symmetry(self):
        pred_v, gold_v = correlated_pair(300, 0.7, seed=9, noise=0.4)
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        report = psi_matrix(pred, gold, replicants=100, seed=0)
        np.testing.assert_allclose(report.psi, report.psi.T, atol=1e-12)
        np.testing.assert_array_equal(report.significant, report.significant.T)

    def test_correlated_pair_significant_positive(self):
        pred_v, gold_v = correlated_pair(400, 0.85, seed=10, noise=0.3)
        pred = matrix(pred_v, properties=("a", "b"))
        gold = matrix(gold_v, properties=("a", "b"))
        report = psi_matrix(pred, gold, replicants=300, seed=1)
        assert report.significant[0, 1]
        assert report.psi[0, 1] > 0.4

    def test_independent_mostly_insignificant(self):
        rng = np.random.default_rng(11)
        k, n = 6, 200
        gold = matrix(np.clip(rng.standard_normal((n, k)), -3, 3),
                      properties=tuple(f"q{i}" for i in range(k)))
        pred = matrix(np.clip(rng.standard_normal((n, k)), -3, 3),
                      properties=gold.properties)
        report = psi_matrix(pred, gold, replicants=200, alpha=0.05, seed=2)
        off = ~np.eye(k, dtype=bool)
        frac = report.significant[off].mean()
        assert frac <= 0.05

    def test_undefined_rendered_zero_insignificant(self):
        gold_v = correlated_pair(100, 0.8, seed=12)[1]
        gold = matrix(gold_v, properties=("a", "b"))
        report = psi_matrix(gold, gold, replicants=50, seed=3)  # zero residuals
        assert report.psi[0, 1] == 0.0
        assert not report.significant[0, 1]


class TestMatrixBuilders:
    def test_from_graphs_round_trip(self):
        corpus = generate_synthetic(SyntheticGrammarConfig(sentence_count=6, seed=13))
        nodes = node_attribute_matrix(corpus.graphs)
        edges = edge_attribute_matrix(corpus.graphs)
        n_nodes = sum(len(g.semantics_nodes) for g in corpus.graphs)
        n_edges = sum(len(g.semantics_edges) for g in corpus.graphs)
        assert nodes.values.shape == (n_nodes, 44)
        assert edges.values.shape == (n_edges, 14)
        # spot-check one annotated cell against the source graph
        g = corpus.graphs[0]
        node = next(n for n in g.semantics_nodes if n.attributes)
        prop, rec = sorted(node.attributes.items())[0]
        i = nodes.row_keys.index((g.sentence_id, node.node_id))
        j = nodes.column(prop)
        assert nodes.values[i, j] == rec.value
        assert nodes.confidence[i, j] == rec.confidence

    def test_align_matrices(self):
        a = matrix([[1.0], [2.0]], properties=("a",), keys=("k1", "k2"))
        b = matrix([[5.0], [6.0]], properties=("a",), keys=("k2", "k3"))
        a2, b2 = align_matrices(a, b)
        assert a2.row_keys == ("k2",)
        assert a2.values[0, 0] == 2.0
        assert b2.values[0, 0] == 5.0
