"""Isolation Forest over complaint feature vectors, plus the review workflow.

Anomaly score of a point ``x`` is ``2 ** (-E[h(x)] / c(psi))`` where ``h`` is
the path length in one isolation tree (depth reached plus ``c(leaf size)`` for
leaves truncated by the depth limit) and ``c(n)`` is the average path length
of an unsuccessful binary-search-tree lookup among ``n`` points.
"""

from __future__ import annotations

import bisect
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FitError, StructuralError, TransitionError, ValidationError
from .sentiment import SentimentResult, tokenize
from .triage import Complaint

SCHEMA_VERSION = 1
EULER_GAMMA = 0.5772156649

FEATURE_NAMES = (
    "category_code",
    "sentiment_score",
    "hour_of_day",
    "day_of_week",
    "text_length",
    "keyword_hits",
    "recurrence_count",
)
CATEGORY_CODES = {
    "electrical": 1,
    "plumbing": 2,
    "water": 3,
    "sanitation": 4,
    "civil": 5,
    "general": 6,
    "other": 7,
}
DEFAULT_KEYWORDS = ("fire", "flood", "urgent", "emergency", "sparks", "smoke", "shock", "injury", "gas")
DEFAULT_WINDOW = timedelta(days=7)


@dataclass(frozen=True)
class FeatureVector:
    category_code: int
    sentiment_score: float
    hour_of_day: int
    day_of_week: int
    text_length: int
    keyword_hits: int
    recurrence_count: int

    def __post_init__(self) -> None:
        if not -1.0 <= self.sentiment_score <= 1.0:
            raise ValidationError("sentiment_score outside [-1, 1]")
        if not 0 <= self.hour_of_day <= 23 or not 0 <= self.day_of_week <= 6:
            raise ValidationError("hour_of_day/day_of_week out of range")
        if min(self.text_length, self.keyword_hits, self.recurrence_count, self.category_code) < 0:
            raise ValidationError("count features must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in FEATURE_NAMES], dtype=float)


def featurize(
    c: Complaint,
    s: SentimentResult,
    history: Iterable[Complaint],
    keywords: Iterable[str] = DEFAULT_KEYWORDS,
    window: timedelta = DEFAULT_WINDOW,
) -> FeatureVector:
    """Feature vector for one complaint; ``history`` holds earlier complaints."""
    kw = {k.lower() for k in keywords}
    recurrence = sum(
        1
        for h in history
        if h.id != c.id
        and h.category == c.category
        and h.room_id == c.room_id
        and h.created_at < c.created_at
        and c.created_at - h.created_at <= window
    )
    return FeatureVector(
        category_code=CATEGORY_CODES.get(c.category, CATEGORY_CODES["other"]),
        sentiment_score=s.score,
        hour_of_day=c.created_at.hour,
        day_of_week=c.created_at.weekday(),
        text_length=len(c.description),
        keyword_hits=sum(1 for t in tokenize(c.description) if t in kw),
        recurrence_count=recurrence,
    )


def featurize_stream(
    complaints: Sequence[Complaint],
    scorer,
    keywords: Iterable[str] = DEFAULT_KEYWORDS,
    window: timedelta = DEFAULT_WINDOW,
) -> list[FeatureVector]:
    """Featurize a whole stream, each complaint against its own past.

    Equivalent to calling :func:`featurize` per complaint with the full
    stream as history, but indexed by (category, room).
    """
    kw = tuple(keywords)
    by_key: dict[tuple[str, str], list[datetime]] = {}
    for c in complaints:
        by_key.setdefault((c.category, c.room_id), []).append(c.created_at)
    for times in by_key.values():
        times.sort()
    out = []
    for c in complaints:
        times = by_key[(c.category, c.room_id)]
        lo = bisect.bisect_left(times, c.created_at - window)
        hi = bisect.bisect_left(times, c.created_at)
        fv = featurize(c, scorer(c.description), (), kw, window)
        out.append(replace(fv, recurrence_count=hi - lo))
    return out


def average_path_length(n) -> np.ndarray | float:
    """``c(n)`` with the conventional special cases ``c(1) = 0`` and ``c(2) = 1``."""
    arr = np.asarray(n, dtype=float)
    out = np.zeros_like(arr)
    out[arr == 2] = 1.0
    big = arr > 2
    m = arr[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    return float(out) if out.ndim == 0 else out


class IsolationTree:
    """Array-backed isolation tree. Leaves have ``feature == -1``."""

    def __init__(self, feature, threshold, left, right, size, depth):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.size = np.asarray(size, dtype=np.int64)
        self.depth = np.asarray(depth, dtype=np.int64)

    @classmethod
    def grow(cls, X: np.ndarray, max_depth: int, rng: np.random.Generator) -> "IsolationTree":
        feature, threshold, left, right, size, depth = [], [], [], [], [], []

        def build(rows: np.ndarray, d: int) -> int:
            node = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            size.append(len(rows))
            depth.append(d)
            if d >= max_depth or len(rows) <= 1:
                return node
            sub = X[rows]
            lo, hi = sub.min(axis=0), sub.max(axis=0)
            candidates = np.flatnonzero(hi > lo)
            if candidates.size == 0:
                return node
            q = int(candidates[rng.integers(candidates.size)])
            p = rng.uniform(lo[q], hi[q])
            while p <= lo[q]:
                p = rng.uniform(lo[q], hi[q])
            mask = sub[:, q] < p
            feature[node] = q
            threshold[node] = p
            left[node] = build(rows[mask], d + 1)
            right[node] = build(rows[~mask], d + 1)
            return node

        build(np.arange(len(X)), 0)
        return cls(feature, threshold, left, right, size, depth)

    def path_lengths(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] < self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return self.depth[node] + average_path_length(self.size[node])

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"size": int(self.size[node])}
        return {
            "feature": int(self.feature[node]),
            "threshold": float(self.threshold[node]),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "IsolationTree":
        cols: tuple[list, ...] = ([], [], [], [], [], [])

        def walk(d: Mapping, depth: int) -> tuple[int, int]:
            node = len(cols[0])
            for col, val in zip(cols, (-1, 0.0, -1, -1, 0, depth)):
                col.append(val)
            if "feature" in d:
                cols[0][node] = int(d["feature"])
                cols[1][node] = float(d["threshold"])
                cols[2][node], n_left = walk(d["left"], depth + 1)
                cols[3][node], n_right = walk(d["right"], depth + 1)
                cols[4][node] = n_left + n_right
            else:
                cols[4][node] = int(d["size"])
            return node, cols[4][node]

        walk(doc, 0)
        return cls(*cols)


@dataclass
class IsolationForest:
    trees: list[IsolationTree]
    subsample_size: int
    tree_count: int
    max_depth: int
    normalizer: float
    threshold: float
    rng_seed: int
    feature_min: np.ndarray
    feature_span: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.feature_min)

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.feature_min) / self.feature_span

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "subsample_size": self.subsample_size,
            "tree_count": self.tree_count,
            "max_depth": self.max_depth,
            "normalizer": self.normalizer,
            "threshold": self.threshold,
            "rng_seed": self.rng_seed,
            "feature_names": list(FEATURE_NAMES) if self.dimension == len(FEATURE_NAMES) else None,
            "feature_min": self.feature_min.tolist(),
            "feature_span": self.feature_span.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "IsolationForest":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise StructuralError(f"unsupported forest schema_version {doc.get('schema_version')!r}")
        return cls(
            trees=[IsolationTree.from_dict(t) for t in doc["trees"]],
            subsample_size=int(doc["subsample_size"]),
            tree_count=int(doc["tree_count"]),
            max_depth=int(doc["max_depth"]),
            normalizer=float(doc["normalizer"]),
            threshold=float(doc["threshold"]),
            rng_seed=int(doc["rng_seed"]),
            feature_min=np.array(doc["feature_min"], dtype=float),
            feature_span=np.array(doc["feature_span"], dtype=float),
        )


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        X = np.asarray(data, dtype=float)
    else:
        rows = [d.as_array() if isinstance(d, FeatureVector) else np.asarray(d, dtype=float) for d in data]
        X = np.vstack(rows) if rows else np.empty((0, 0))
    if X.ndim == 1:
        X = X[None, :]
    return X


def fit(
    data,
    subsample_size: int = 256,
    tree_count: int = 100,
    seed: int = 0,
    threshold_percentile: float = 95.0,
    jobs: int = 1,
) -> IsolationForest:
    """Grow ``tree_count`` isolation trees on min-max normalized ``data``.

    Each tree draws ``min(subsample_size, n)`` rows without replacement from
    its own child seed, so the forest is identical for any ``jobs``.
    """
    X = _as_matrix(data)
    if len(X) < 2:
        raise FitError("isolation forest needs at least 2 training points")
    if subsample_size < 2:
        raise FitError("subsample_size must be >= 2")
    if tree_count < 1:
        raise FitError("tree_count must be >= 1")
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    Xn = (X - lo) / span

    psi = min(subsample_size, len(X))
    max_depth = math.ceil(math.log2(psi))
    children = np.random.SeedSequence(seed).spawn(tree_count)

    def grow(ss: np.random.SeedSequence) -> IsolationTree:
        rng = np.random.Generator(np.random.PCG64(ss))
        rows = rng.choice(len(Xn), size=psi, replace=False)
        return IsolationTree.grow(Xn[rows], max_depth, rng)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(ss) for ss in children]

    forest = IsolationForest(
        trees=trees,
        subsample_size=psi,
        tree_count=tree_count,
        max_depth=max_depth,
        normalizer=float(average_path_length(psi)),
        threshold=0.5,
        rng_seed=seed,
        feature_min=lo,
        feature_span=span,
    )
    forest.threshold = float(np.percentile(score_many(forest, X), threshold_percentile))
    return forest


def mean_path_length(forest: IsolationForest, data) -> np.ndarray:
    X = _as_matrix(data)
    if X.shape[1] != forest.dimension:
        raise StructuralError(f"expected {forest.dimension} features, got {X.shape[1]}")
    Xn = forest.normalize(X)
    return np.mean([t.path_lengths(Xn) for t in forest.trees], axis=0)


def score_from_path_length(mean_path: np.ndarray | float, normalizer: float):
    if normalizer <= 0:
        return np.ones_like(np.asarray(mean_path, dtype=float)) * 0.5
    return np.power(2.0, -np.asarray(mean_path, dtype=float) / normalizer)


def score_many(forest: IsolationForest, data) -> np.ndarray:
    return score_from_path_length(mean_path_length(forest, data), forest.normalizer)


def score(forest: IsolationForest, x) -> float:
    return float(score_many(forest, [x])[0])


# --- review workflow -------------------------------------------------------------

REVIEW_STATES = ("Flagged", "Confirmed", "Dismissed")


@dataclass(frozen=True)
class ReviewCase:
    complaint_id: str
    anomaly_score: float
    state: str = "Flagged"
    reviewer_note: str = ""


def flag(
    forest: IsolationForest,
    items: Sequence[tuple[str, FeatureVector]],
    threshold: float | None = None,
) -> list[ReviewCase]:
    """Flag every complaint scoring above ``threshold`` (forest default if None)."""
    cut = forest.threshold if threshold is None else threshold
    seen: dict[str, FeatureVector] = {}
    for cid, fv in items:
        seen.setdefault(cid, fv)
    if not seen:
        return []
    ids = list(seen)
    scores = score_many(forest, [seen[i] for i in ids])
    cases = [ReviewCase(cid, float(s)) for cid, s in zip(ids, scores) if s > cut]
    cases.sort(key=lambda c: (-c.anomaly_score, c.complaint_id))
    return cases


def review(case: ReviewCase, decision: str, note: str = "") -> ReviewCase:
    if decision not in ("Confirmed", "Dismissed"):
        raise ValidationError(f"decision must be Confirmed or Dismissed, got {decision!r}")
    if case.state != "Flagged":
        raise TransitionError(case.state, decision, "review")
    return replace(case, state=decision, reviewer_note=note)


def cases_to_jsonl(cases: Iterable[ReviewCase]) -> str:
    return "".join(json.dumps(asdict(c), sort_keys=True) + "\n" for c in cases)


def cases_from_jsonl(lines: Iterable[str]) -> list[ReviewCase]:
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            case = ReviewCase(str(d["complaint_id"]), float(d["anomaly_score"]), d["state"], d.get("reviewer_note", ""))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"review log line {lineno}: {exc}") from exc
        if case.state not in REVIEW_STATES:
            raise StructuralError(f"review log line {lineno}: unknown state {case.state!r}")
        out.append(case)
    return out
