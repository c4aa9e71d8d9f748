"""Attribute evaluation statistics: Pearson correlations, threshold-tuned
binarized F1, the constant-median baseline, and the correlational-strength
coefficient with bootstrap significance.

Instances (annotated nodes or edges, paired across a predicted and a gold
corpus by sentence and node ids) form the rows of an AttributeMatrix;
properties are columns.  A cell is present when its confidence is
positive; absent cells are never zero-filled into statistics.

The correlational-strength coefficient for a property pair (j, k) is

    tanh(1 - |corr(residual_j, residual_k)| / |corr(gold_j, gold_k)|)

where the residual correlation is normalized by raw second moments of the
residuals (not centered variances) and the gold correlation is ordinary
Pearson.  Positive values mean the model tracks the gold correlation
between the two properties; zero means it does not (or the pair is not
significant); negative values mean systematic joint errors.  Significance
is a Bonferroni-corrected nonparametric bootstrap over instances: a pair
is significant when the corrected percentile interval excludes zero.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .inventory import EDGE_PROPERTIES, NODE_PROPERTIES


class DegenerateError(Exception):
    """A correlation denominator is zero (or too few paired instances)."""


@dataclass(frozen=True)
class AttributeMatrix:
    properties: tuple
    row_keys: tuple
    values: np.ndarray  # (N, K)
    confidence: np.ndarray  # (N, K); 0 = absent

    @property
    def mask(self):
        return self.confidence > 0

    def column(self, prop):
        return self.properties.index(prop)


def node_attribute_matrix(graphs, properties=NODE_PROPERTIES):
    rows = []
    for graph in graphs:
        for node in graph.semantics_nodes:
            rows.append(((graph.sentence_id, node.node_id), node.attributes))
    return _matrix_from_rows(rows, properties)


def edge_attribute_matrix(graphs, properties=EDGE_PROPERTIES):
    rows = []
    for graph in graphs:
        for edge in graph.semantics_edges:
            rows.append(((graph.sentence_id, edge.head, edge.dep), edge.attributes))
    return _matrix_from_rows(rows, properties)


def _matrix_from_rows(rows, properties):
    n, k = len(rows), len(properties)
    values = np.zeros((n, k))
    confidence = np.zeros((n, k))
    keys = []
    index = {p: j for j, p in enumerate(properties)}
    for i, (key, attrs) in enumerate(rows):
        keys.append(key)
        for prop, rec in attrs.items():
            j = index.get(prop)
            if j is not None and rec.confidence > 0:
                values[i, j] = rec.value
                confidence[i, j] = rec.confidence
    return AttributeMatrix(
        properties=tuple(properties), row_keys=tuple(keys),
        values=values, confidence=confidence,
    )


def align_matrices(pred, gold):
    """Restrict both matrices to their shared row keys, in sorted order."""
    if pred.properties != gold.properties:
        raise ValueError("matrices cover different properties")
    shared = sorted(set(pred.row_keys) & set(gold.row_keys))
    pred_pos = {key: i for i, key in enumerate(pred.row_keys)}
    gold_pos = {key: i for i, key in enumerate(gold.row_keys)}
    p_idx = [pred_pos[k] for k in shared]
    g_idx = [gold_pos[k] for k in shared]
    return (
        AttributeMatrix(pred.properties, tuple(shared),
                        pred.values[p_idx], pred.confidence[p_idx]),
        AttributeMatrix(gold.properties, tuple(shared),
                        gold.values[g_idx], gold.confidence[g_idx]),
    )


@dataclass(frozen=True)
class PearsonResult:
    rho: float | None
    p_value: float | None
    n: int

    @property
    def undefined(self):
        return self.rho is None


def pearson_per_attribute(pred, gold):
    """Pearson rho and two-sided t-test p-value per property.

    Pairs over cells annotated on the gold side and present on the
    predicted side.  Zero variance on either side (the constant baseline,
    for instance) makes the correlation undefined.
    """
    out = {}
    paired = gold.mask & pred.mask
    for j, prop in enumerate(gold.properties):
        rows = paired[:, j]
        n = int(rows.sum())
        if n < 2:
            out[prop] = PearsonResult(None, None, n)
            continue
        x = pred.values[rows, j]
        y = gold.values[rows, j]
        # a constant side makes the correlation undefined; test exact
        # equality, not std == 0, which float summation noise can miss
        if np.all(x == x[0]) or np.all(y == y[0]):
            out[prop] = PearsonResult(None, None, n)
            continue
        sx = x.std()
        sy = y.std()
        rho = float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))
        rho = max(-1.0, min(1.0, rho))
        if n > 2 and abs(rho) < 1.0:
            t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
            p = float(2.0 * stdtr(n - 2, -abs(t)))
        else:
            p = 0.0 if abs(rho) == 1.0 else None
        out[prop] = PearsonResult(rho, p, n)
    return out


THRESHOLD_GRID = np.linspace(-3.0, 3.0, 121)  # 0.05 steps


def _binary_f1(pred_pos, gold_pos):
    tp = int(np.sum(pred_pos & gold_pos))
    fp = int(np.sum(pred_pos & ~gold_pos))
    fn = int(np.sum(~pred_pos & gold_pos))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def tune_thresholds(dev_pred, dev_gold):
    """Per-property binarization threshold maximizing dev F1 over the grid.

    The positive class is gold value > 0; ties take the lowest threshold;
    properties with no dev pairs default to 0.
    """
    thresholds = {}
    paired = dev_gold.mask & dev_pred.mask
    for j, prop in enumerate(dev_gold.properties):
        rows = paired[:, j]
        if not rows.any():
            thresholds[prop] = 0.0
            continue
        x = dev_pred.values[rows, j]
        gold_pos = dev_gold.values[rows, j] > 0
        best_f1, best_theta = -1.0, 0.0
        for theta in THRESHOLD_GRID:
            _, _, f1 = _binary_f1(x > theta, gold_pos)
            if f1 > best_f1 + 1e-12:
                best_f1, best_theta = f1, float(theta)
        thresholds[prop] = best_theta
    return thresholds


@dataclass(frozen=True)
class BinarizedReport:
    per_property: dict  # prop -> (precision, recall, f1, n)
    macro_f1: float


def binarized_f1(pred, gold, thresholds):
    """Per-property F1 of thresholded predictions against gold sign.

    The macro average runs over properties with at least one paired cell.
    """
    per = {}
    defined = []
    paired = gold.mask & pred.mask
    for j, prop in enumerate(gold.properties):
        rows = paired[:, j]
        n = int(rows.sum())
        if n == 0:
            per[prop] = (0.0, 0.0, 0.0, 0)
            continue
        theta = thresholds.get(prop, 0.0)
        p, r, f1 = _binary_f1(pred.values[rows, j] > theta, gold.values[rows, j] > 0)
        per[prop] = (p, r, f1, n)
        defined.append(f1)
    macro = float(np.mean(defined)) if defined else 0.0
    return BinarizedReport(per_property=per, macro_f1=macro)


@dataclass(frozen=True)
class MedianBaseline:
    properties: tuple
    medians: dict  # prop -> float (absent when a property had no annotations)

    def predict_like(self, gold):
        """Constant predictions shaped like (and annotated like) ``gold``."""
        values = np.zeros_like(gold.values)
        confidence = np.zeros_like(gold.confidence)
        for j, prop in enumerate(gold.properties):
            med = self.medians.get(prop)
            if med is None:
                continue
            rows = gold.mask[:, j]
            values[rows, j] = med
            confidence[rows, j] = 1.0
        return AttributeMatrix(gold.properties, gold.row_keys, values, confidence)


def median_baseline(train_gold):
    """Per-property median of annotated training values (even count: mean
    of the two middle values)."""
    medians = {}
    for j, prop in enumerate(train_gold.properties):
        rows = train_gold.mask[:, j]
        if rows.any():
            medians[prop] = float(np.median(train_gold.values[rows, j]))
    return MedianBaseline(properties=train_gold.properties, medians=medians)


def _pairwise_psi(pred_values, gold_values, mask):
    """Vectorized psi over all property pairs.

    Returns (psi matrix with NaN where undefined, pair counts).  Undefined
    means fewer than 3 co-annotated instances or a zero denominator.
    """
    m = mask.astype(np.float64)
    d = (gold_values - pred_values) * m
    g = gold_values * m
    n = m.T @ m
    with np.errstate(divide="ignore", invalid="ignore"):
        cross_resid = (d.T @ d) / n
        o = ((d * d).T @ m) / n  # raw second moment of residuals, per pair
        r_resid = cross_resid / np.sqrt(o * o.T)

        mu = (g.T @ m) / n  # gold mean of property j over the (j, k) pairing
        cross_gold = (g.T @ g) / n - mu * mu.T
        e = ((g * g).T @ m) / n - mu * mu
        r_gold = cross_gold / np.sqrt(e * e.T)

        psi_matrix = np.tanh(1.0 - np.abs(r_resid) / np.abs(r_gold))
    bad = (n < 3) | ~np.isfinite(psi_matrix)
    psi_matrix = np.where(bad, np.nan, psi_matrix)
    return psi_matrix, n.astype(int)


def psi(pred, gold, j, k):
    """Correlational strength for one property pair (names or indices)."""
    if isinstance(j, str):
        j = pred.column(j)
    if isinstance(k, str):
        k = pred.column(k)
    paired = pred.mask & gold.mask
    rows = paired[:, j] & paired[:, k]
    if int(rows.sum()) < 3:
        raise DegenerateError(f"only {int(rows.sum())} co-annotated instances")
    pv = pred.values[rows][:, [j, k]]
    gv = gold.values[rows][:, [j, k]]
    matrix, _ = _pairwise_psi(pv, gv, np.ones_like(pv, dtype=bool))
    value = matrix[0, 1]
    if not np.isfinite(value):
        raise DegenerateError("zero correlation denominator")
    return float(value)


@dataclass(frozen=True)
class PsiReport:
    properties: tuple
    psi: np.ndarray  # (K, K); undefined pairs rendered as 0
    significant: np.ndarray  # (K, K) bool
    pair_counts: np.ndarray  # (K, K) int
    replicants: int
    alpha: float


def psi_matrix(pred, gold, replicants=1000, alpha=0.05, seed=0):
    """Full psi matrix with bootstrap significance.

    Whole instances (rows) are resampled with replacement, preserving
    within-instance property correlation.  The per-pair level is alpha
    divided by the number of tested (defined, off-diagonal) pairs; a pair
    is significant when its corrected percentile interval excludes zero.
    Undefined pairs are reported as 0 and never significant.
    """
    if replicants < 1:
        raise ValueError("need at least one replicant")
    paired = pred.mask & gold.mask
    point, counts = _pairwise_psi(pred.values, gold.values, paired)
    k = len(pred.properties)
    off_diag = ~np.eye(k, dtype=bool)
    defined = np.isfinite(point)
    n_tested = int(np.sum(defined & off_diag) // 2)

    n_rows = pred.values.shape[0]
    rng = np.random.default_rng(seed)
    boot = np.full((replicants, k, k), np.nan)
    for r in range(replicants):
        idx = rng.integers(0, n_rows, n_rows)
        boot[r], _ = _pairwise_psi(pred.values[idx], gold.values[idx], paired[idx])

    level = alpha / max(1, n_tested)
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        valid = np.sum(np.isfinite(boot), axis=0)
        lo = np.nanpercentile(boot, 100.0 * level / 2.0, axis=0)
        hi = np.nanpercentile(boot, 100.0 * (1.0 - level / 2.0), axis=0)
    enough = valid >= max(10, replicants // 2)
    significant = defined & enough & ((lo > 0.0) | (hi < 0.0))
    np.fill_diagonal(significant, False)
    return PsiReport(
        properties=pred.properties,
        psi=np.where(defined, point, 0.0),
        significant=significant,
        pair_counts=counts,
        replicants=replicants,
        alpha=alpha,
    )
