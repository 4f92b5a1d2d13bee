"""CART decision tree and random forest with Gini splitting.

The single tree handles the two-dimensional appliance-left-on features.
The forest consumes per-second nonresponse-duration rows; because those
features grow linearly with time between sensor firings, the forest can
be evaluated exactly over whole quiet stretches at once instead of
second by second (each tree path changes only where a feature crosses a
node threshold).
"""

from __future__ import annotations

import logging

import numpy as np

from ..features import LabelTrack, NRD_CAP_SECONDS, NonresponseDurations
from ..metrics import IntervalSet, label_intervals

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
MIN_SAMPLES_SPLIT = 5
FOREST_TREES = 100
FOREST_WINDOW_DAYS = 3
# Per-tree training rows are capped for tractability; sampling is
# uniform over the window pool so the class ratio is preserved.
MAX_TRAINING_ROWS = 400_000
N_BINS = 256

try:  # numba accelerates the run-wise forest evaluation ~100x
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not (args and callable(args[0])) else args[0]


def _gini_decrease_from_counts(
    n_left: np.ndarray, pos_left: np.ndarray, n_total: int, pos_total: int
) -> np.ndarray:
    """Impurity decrease for each candidate split, vectorised.

    Gini of a node with p positive fraction is 2p(1-p); the decrease is
    parent impurity minus the size-weighted child impurities.
    """
    n_right = n_total - n_left
    pos_right = pos_total - pos_left
    with np.errstate(divide="ignore", invalid="ignore"):
        pl = pos_left / n_left
        pr = pos_right / n_right
        child = (n_left * 2 * pl * (1 - pl) + n_right * 2 * pr * (1 - pr)) / n_total
    p = pos_total / n_total
    return 2 * p * (1 - p) - child


def _best_split_exact(x: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ys = y[order]
    n = len(xs)
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    cum_pos = np.cumsum(ys)
    n_left = np.arange(1, n)
    dec = _gini_decrease_from_counts(n_left, cum_pos[:-1], n, int(cum_pos[-1]))
    dec[~valid] = -np.inf
    i = int(np.argmax(dec))
    if dec[i] <= 1e-12:
        return None
    return float(dec[i]), float((xs[i] + xs[i + 1]) / 2.0)


def _best_split_binned(
    bins: np.ndarray, y: np.ndarray, edges: np.ndarray
) -> tuple[float, float] | None:
    n_bins = len(edges) + 1
    cnt = np.bincount(bins, minlength=n_bins)
    pos = np.bincount(bins, weights=y, minlength=n_bins)
    cum_cnt = np.cumsum(cnt)[:-1]
    cum_pos = np.cumsum(pos)[:-1]
    valid = (cum_cnt > 0) & (cum_cnt < len(bins))
    if not valid.any():
        return None
    dec = _gini_decrease_from_counts(cum_cnt, cum_pos, len(bins), int(y.sum()))
    dec[~valid] = -np.inf
    b = int(np.argmax(dec))
    if dec[b] <= 1e-12:
        return None
    return float(dec[b]), float(edges[b])


class _TreeArrays:
    """Flat node storage: feature -1 marks a leaf with class leaf[i]."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf: list[int] = []

    def add_leaf(self, cls: int) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.leaf.append(int(cls))
        return len(self.feature) - 1

    def add_split(self, feature: int, threshold: float) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.leaf.append(0)
        return len(self.feature) - 1

    def finalize(self) -> dict[str, np.ndarray]:
        return {
            "feature": np.array(self.feature, dtype=np.int32),
            "threshold": np.array(self.threshold, dtype=np.float64),
            "left": np.array(self.left, dtype=np.int32),
            "right": np.array(self.right, dtype=np.int32),
            "leaf": np.array(self.leaf, dtype=np.int8),
        }


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    min_samples_split: int,
    rng: np.random.Generator | None,
    max_features: int | None,
    bins: np.ndarray | None = None,
    edges: list[np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Greedy CART growth, iterative to cope with deep trees.

    With ``bins``/``edges`` the split search runs on pre-binned values
    (forest path); otherwise splits are exact midpoints.
    """
    tree = _TreeArrays()
    n_features = X.shape[1]
    stack: list[tuple[np.ndarray, int, int]] = []

    def make_node(idx: np.ndarray) -> int:
        ys = y[idx]
        pos = int(ys.sum())
        if len(idx) < min_samples_split or pos == 0 or pos == len(idx):
            return tree.add_leaf(1 if 2 * pos > len(idx) else 0)
        if max_features is not None and max_features < n_features:
            feats = rng.choice(n_features, size=max_features, replace=False)
        else:
            feats = np.arange(n_features)
        best = None
        for f in feats:
            if bins is not None:
                found = _best_split_binned(bins[idx, f], ys, edges[f])
            else:
                found = _best_split_exact(X[idx, f], ys)
            if found and (best is None or found[0] > best[0]):
                best = (found[0], int(f), found[1])
        if best is None:
            return tree.add_leaf(1 if 2 * pos > len(idx) else 0)
        node = tree.add_split(best[1], best[2])
        stack.append((idx, node, 0))
        return node

    root_idx = np.arange(len(y))
    make_node(root_idx)
    while stack:
        idx, node, _ = stack.pop()
        f = tree.feature[node]
        thr = tree.threshold[node]
        goleft = X[idx, f] <= thr
        tree.left[node] = make_node(idx[goleft])
        tree.right[node] = make_node(idx[~goleft])
    return tree.finalize()


def _apply(tree: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    node = np.zeros(len(X), dtype=np.int32)
    feature = tree["feature"]
    threshold = tree["threshold"]
    left = tree["left"]
    right = tree["right"]
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            break
        rows = np.flatnonzero(internal)
        nd = node[rows]
        goleft = X[rows, feature[nd]] <= threshold[nd]
        node[rows] = np.where(goleft, left[nd], right[nd])
    return tree["leaf"][node]


def _tree_to_jsonable(tree: dict[str, np.ndarray]) -> dict:
    return {k: v.tolist() for k, v in tree.items()}


def _tree_from_jsonable(data: dict) -> dict[str, np.ndarray]:
    return {
        "feature": np.array(data["feature"], dtype=np.int32),
        "threshold": np.array(data["threshold"], dtype=np.float64),
        "left": np.array(data["left"], dtype=np.int32),
        "right": np.array(data["right"], dtype=np.int32),
        "leaf": np.array(data["leaf"], dtype=np.int8),
    }


class TreeModel:
    """Single CART classifier over low-dimensional feature rows."""

    def __init__(self, tree: dict[str, np.ndarray], feature_count: int, unit_seconds: int):
        self.tree = tree
        self.feature_count = feature_count
        self.unit_seconds = unit_seconds

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.feature_count:
            raise ValueError(
                f"expected {self.feature_count} features, got {X.shape[1]}"
            )
        return _apply(self.tree, X)

    def predict_track(self, X: np.ndarray) -> LabelTrack:
        y = self.predict(X).astype(np.int8)
        return LabelTrack(len(y), self.unit_seconds, label_intervals(y))

    def to_dict(self) -> dict:
        return {
            "model": "tree",
            "version": FORMAT_VERSION,
            "feature_count": self.feature_count,
            "unit_seconds": self.unit_seconds,
            "tree": _tree_to_jsonable(self.tree),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TreeModel":
        return cls(_tree_from_jsonable(data["tree"]), data["feature_count"], data["unit_seconds"])


def fit_tree(
    features: np.ndarray,
    labels: LabelTrack | np.ndarray,
    min_samples_split: int = MIN_SAMPLES_SPLIT,
    unit_seconds: int = 7200,
) -> TreeModel:
    """Greedy Gini tree; growth stops at pure or sub-5-sample nodes."""
    X = np.asarray(features, dtype=float)
    y = (labels.to_array() if isinstance(labels, LabelTrack) else np.asarray(labels)).astype(
        np.int8
    )
    if len(X) != len(y):
        raise ValueError("features and labels differ in length")
    if y.min() == y.max():
        log.warning("single-class training data: tree degenerates to a constant")
    tree = _grow(X, y, min_samples_split, rng=None, max_features=None)
    return TreeModel(tree, X.shape[1], unit_seconds)


# ---------------------------------------------------------------------------
# Random forest


@njit(cache=True)
def _runs_kernel(
    feature, threshold, left, right, leaf, roots,
    run_starts, run_lens, x0, slope, diff,
):  # pragma: no cover - exercised via predict_track
    n_trees = len(roots)
    stack_node = np.empty(512, dtype=np.int64)
    stack_lo = np.empty(512, dtype=np.int64)
    stack_hi = np.empty(512, dtype=np.int64)
    for r in range(len(run_starts)):
        a = run_starts[r]
        length = run_lens[r]
        for t in range(n_trees):
            sp = 0
            stack_node[0] = roots[t]
            stack_lo[0] = 0
            stack_hi[0] = length
            sp = 1
            while sp > 0:
                sp -= 1
                node = stack_node[sp]
                lo = stack_lo[sp]
                hi = stack_hi[sp]
                f = feature[node]
                if f < 0:
                    if leaf[node] == 1:
                        diff[a + lo] += 1
                        diff[a + hi] -= 1
                    continue
                thr = threshold[node]
                if slope[r, f] == 0:
                    child = left[node] if x0[r, f] <= thr else right[node]
                    stack_node[sp] = child
                    stack_lo[sp] = lo
                    stack_hi[sp] = hi
                    sp += 1
                else:
                    split = int(np.floor(thr - x0[r, f])) + 1
                    if split > lo:
                        stack_node[sp] = left[node]
                        stack_lo[sp] = lo
                        stack_hi[sp] = min(hi, split) if split < hi else hi
                        sp += 1
                    if split < hi:
                        stack_node[sp] = right[node]
                        stack_lo[sp] = max(lo, split) if split > lo else lo
                        stack_hi[sp] = hi
                        sp += 1


class ForestModel:
    """Bagged Gini trees with per-split random feature subsets."""

    def __init__(self, trees: list[dict[str, np.ndarray]], feature_count: int):
        self.trees = trees
        self.feature_count = feature_count

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Strict-majority vote over per-row tree classes."""
        X = np.asarray(X, dtype=float)
        if X.shape[1] != self.feature_count:
            raise ValueError(f"expected {self.feature_count} features, got {X.shape[1]}")
        votes = np.zeros(len(X), dtype=np.int32)
        for tree in self.trees:
            votes += _apply(tree, X)
        return (2 * votes > self.n_trees).astype(np.int8)

    def _flat(self):
        feature = np.concatenate([t["feature"] for t in self.trees])
        threshold = np.concatenate([t["threshold"] for t in self.trees])
        sizes = np.array([len(t["feature"]) for t in self.trees])
        offsets = np.concatenate(([0], np.cumsum(sizes)))[:-1]
        left = np.concatenate(
            [np.where(t["left"] >= 0, t["left"] + off, -1) for t, off in zip(self.trees, offsets)]
        )
        right = np.concatenate(
            [np.where(t["right"] >= 0, t["right"] + off, -1) for t, off in zip(self.trees, offsets)]
        )
        leaf = np.concatenate([t["leaf"] for t in self.trees])
        return (
            feature.astype(np.int64),
            threshold,
            left.astype(np.int64),
            right.astype(np.int64),
            leaf.astype(np.int8),
            offsets.astype(np.int64),
        )

    def predict_track(self, nrd: NonresponseDurations) -> LabelTrack:
        """Per-second fall labels over the whole horizon.

        Between sensor firings every feature either stays constant or
        grows one second per second, so the horizon splits into runs on
        which each tree's decision path is piecewise-constant; the
        kernel emits vote deltas per piece and a cumulative sum yields
        the per-second majority.
        """
        if nrd.feature_count != self.feature_count:
            raise ValueError(
                f"model expects {self.feature_count} sensors, stream has {nrd.feature_count}"
            )
        T = nrd.total_seconds
        breaks = [np.array([1, T + 1], dtype=np.int64)]
        for k in range(nrd.feature_count):
            anchors = nrd.anchors[k]
            breaks.append(anchors)
            breaks.append(anchors + NRD_CAP_SECONDS + 1)
            zr = nrd.zero_runs[k]
            if zr is not None and len(zr):
                breaks.append(zr[:, 0])
                breaks.append(zr[:, 1] + 1)
        bounds = np.unique(np.concatenate(breaks))
        bounds = bounds[(bounds >= 1) & (bounds <= T + 1)]
        run_starts = bounds[:-1]
        run_lens = np.diff(bounds)

        x0 = nrd.values_at(run_starts).astype(np.float64)
        slope = np.ones((len(run_starts), nrd.feature_count), dtype=np.uint8)
        for k in range(nrd.feature_count):
            zr = nrd.zero_runs[k]
            if zr is not None and len(zr):
                ridx = np.searchsorted(zr[:, 0], run_starts, side="right") - 1
                inside = (ridx >= 0) & (run_starts <= zr[np.maximum(ridx, 0), 1])
                slope[inside, k] = 0
            slope[x0[:, k] >= NRD_CAP_SECONDS, k] = 0

        feature, threshold, left, right, leaf, roots = self._flat()
        diff = np.zeros(T + 2, dtype=np.int32)
        # Kernel positions are relative to second 1 at diff[1].
        _runs_kernel(
            feature, threshold, left, right, leaf, roots,
            run_starts.astype(np.int64), run_lens.astype(np.int64),
            x0, slope, diff,
        )
        votes = np.cumsum(diff[:-1])
        labels = (2 * votes[1:] > self.n_trees).astype(np.int8)
        return LabelTrack(T, 1, label_intervals(labels))

    def to_dict(self) -> dict:
        return {
            "model": "forest",
            "version": FORMAT_VERSION,
            "feature_count": self.feature_count,
            "trees": [_tree_to_jsonable(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestModel":
        return cls([_tree_from_jsonable(t) for t in data["trees"]], data["feature_count"])


def _quantile_edges(col: np.ndarray, n_bins: int) -> np.ndarray:
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    return np.unique(np.quantile(col, qs))


def fit_forest_xy(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    n_trees: int = FOREST_TREES,
    min_samples_split: int = MIN_SAMPLES_SPLIT,
) -> ForestModel:
    """Forest on explicit rows: bootstrap per tree, sqrt(F) features per split."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int8)
    if y.sum() == 0:
        raise ValueError("no positive rows: cannot train the fall forest")
    n, n_features = X.shape
    max_features = max(1, int(round(np.sqrt(n_features))))
    edges = [_quantile_edges(X[:, f], N_BINS) for f in range(n_features)]
    bins = np.empty((n, n_features), dtype=np.int32)
    for f in range(n_features):
        bins[:, f] = np.searchsorted(edges[f], X[:, f], side="left")
    trees = []
    for t in range(n_trees):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, t))))
        boot = rng.integers(0, n, size=n)
        trees.append(
            _grow(
                X[boot],
                y[boot],
                min_samples_split,
                rng=rng,
                max_features=max_features,
                bins=bins[boot],
                edges=edges,
            )
        )
    return ForestModel(trees, n_features)


def fall_window_seconds(
    labels: LabelTrack, window_days: int = FOREST_WINDOW_DAYS
) -> np.ndarray:
    """Merged 1-based second runs within +-window_days of any fall."""
    pad = window_days * 86400
    windows: list[tuple[int, int]] = []
    for s, e in labels.intervals:
        windows.append((max(1, s + 1 - pad), min(labels.length, e + 1 + pad)))
    merged: list[tuple[int, int]] = []
    for a, b in sorted(windows):
        if merged and a <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return np.array(merged, dtype=np.int64).reshape(-1, 2)


def fit_forest(
    nrd: NonresponseDurations,
    labels: LabelTrack,
    seed: int,
    window_days: int = FOREST_WINDOW_DAYS,
    n_trees: int = FOREST_TREES,
    max_rows: int = MAX_TRAINING_ROWS,
) -> ForestModel:
    """Train the fall forest on seconds near fall episodes.

    Rows are restricted to +-``window_days`` around each labelled fall;
    when the pool exceeds ``max_rows`` a uniform subsample is drawn,
    leaving the positive/negative ratio untouched.  Raises when the
    labels contain no fall.
    """
    if labels.unit_seconds != 1:
        raise ValueError("fall labels must be at one-second resolution")
    if len(labels.intervals) == 0:
        raise ValueError("no falls in training labels: nothing to learn from")
    windows = fall_window_seconds(labels, window_days)
    lens = windows[:, 1] - windows[:, 0] + 1
    offsets = np.concatenate(([0], np.cumsum(lens)))
    pool = int(offsets[-1])
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 977))))
    if pool > max_rows:
        flat = np.sort(rng.choice(pool, size=max_rows, replace=False))
    else:
        flat = np.arange(pool)
    widx = np.searchsorted(offsets, flat, side="right") - 1
    seconds = windows[widx, 0] + (flat - offsets[widx])

    X = nrd.values_at(seconds).astype(np.float64)
    y = np.zeros(len(seconds), dtype=np.int8)
    if len(labels.intervals):
        ivs = np.array(labels.intervals.intervals, dtype=np.int64)
        idx = np.searchsorted(ivs[:, 0], seconds - 1, side="right") - 1
        inside = (idx >= 0) & ((seconds - 1) <= ivs[np.maximum(idx, 0), 1])
        y[inside] = 1
    return fit_forest_xy(X, y, seed=seed, n_trees=n_trees)
