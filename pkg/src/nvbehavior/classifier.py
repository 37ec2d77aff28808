"""Participant-level features, gradient-boosted trees and LOPO evaluation."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data_model import Session, ValidationError

MODEL_FORMAT_VERSION = 1
DEFAULT_CHANNELS = ("pitch", "yaw", "roll", "au04", "au06", "au12_likelihood",
                    "eye_contact_score")


@dataclass(frozen=True)
class ParticipantFeatures:
    participant_id: str
    names: tuple[str, ...]
    values: np.ndarray
    label: int | None = None


def aggregate_features(session: Session, channels: Sequence[str] = DEFAULT_CHANNELS,
                       label: int | None = None) -> ParticipantFeatures:
    """Mean and population standard deviation of each channel over valid frames."""
    names, values = [], []
    for ch in channels:
        if ch not in session.channels:
            raise ValidationError(f"{session.participant_id}: missing channel {ch!r}")
        s = session.channels[ch]
        x = s.values[s.valid]
        if x.size < 2:
            raise ValidationError(f"{session.participant_id}: channel {ch!r} has < 2 valid frames")
        names += [f"{ch}_mean", f"{ch}_std"]
        values += [float(np.mean(x)), float(np.std(x))]
    return ParticipantFeatures(session.participant_id, tuple(names), np.array(values), label)


def stack_features(features: Sequence[ParticipantFeatures]):
    """Feature matrix, labels and names; names must agree across participants."""
    if not features:
        raise ValueError("no participants")
    names = features[0].names
    for f in features:
        if f.names != names:
            raise ValidationError(f"{f.participant_id}: feature names differ")
    X = np.vstack([f.values for f in features]).astype(float)
    y = np.array([-1 if f.label is None else f.label for f in features])
    return X, y, names


# -- trees -----------------------------------------------------------------

@dataclass
class Node:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        if "leaf" in d:
            return cls(value=float(d["leaf"]))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        self._fill(X, np.arange(X.shape[0]), out)
        return out

    def _fill(self, X, idx, out):
        if self.is_leaf:
            out[idx] = self.value
            return
        go_left = X[idx, self.feature] <= self.threshold
        self.left._fill(X, idx[go_left], out)
        self.right._fill(X, idx[~go_left], out)


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf: int = 2
    reg_lambda: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 0 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("rounds >= 0, max_depth >= 1 and min_leaf >= 1 required")
        if not self.learning_rate > 0 or self.reg_lambda < 0:
            raise ValueError("learning_rate > 0 and reg_lambda >= 0 required")


@dataclass
class BoostModel:
    feature_names: tuple[str, ...]
    initial: float
    learning_rate: float
    trees: list[Node] = field(default_factory=list)
    max_depth: int = 3

    def raw_score(self, X: np.ndarray) -> np.ndarray:
        s = np.full(X.shape[0], self.initial)
        for tree in self.trees:
            s += self.learning_rate * tree.predict(X)
        return s

    def to_json(self) -> str:
        return json.dumps({
            "format": "nvbehavior-boost", "version": MODEL_FORMAT_VERSION,
            "loss": "binary_logistic", "feature_names": list(self.feature_names),
            "initial": self.initial, "learning_rate": self.learning_rate,
            "max_depth": self.max_depth, "trees": [t.to_dict() for t in self.trees],
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BoostModel":
        d = json.loads(text)
        if d.get("format") != "nvbehavior-boost" or d.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError("unsupported model format")
        return cls(tuple(d["feature_names"]), float(d["initial"]), float(d["learning_rate"]),
                   [Node.from_dict(t) for t in d["trees"]], int(d["max_depth"]))


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


class _SplitFinder:
    """Exact greedy split search on presorted features.

    Candidate splits sit between adjacent distinct values.  Gains get a
    seed-dependent jitter of relative size 1e-12, indexed by (feature,
    distinct-value rank of the left side) so that it depends neither on
    the feature scale nor on row multiplicity; any tie left after that
    goes to the lowest feature, then lowest threshold.
    """

    def __init__(self, X: np.ndarray, weight: np.ndarray, params: BoostParams, rng):
        self.X = X
        self.w = weight
        self.p = params
        self.order = np.argsort(X, axis=0, kind="stable")
        self.dense = np.column_stack([rankdata(X[:, f], method="dense").astype(np.intp) - 1
                                      for f in range(X.shape[1])]).reshape(X.shape)
        n_distinct = int(self.dense.max()) + 1 if X.size else 1
        self.jitter = rng.random((n_distinct, X.shape[1])) * 1e-12
        self._cols = np.arange(X.shape[1])

    def build(self, g: np.ndarray, h: np.ndarray) -> Node:
        ghw = np.column_stack((g, h, self.w))
        mask = np.ones(self.X.shape[0], dtype=bool)
        return self._grow(ghw, mask, 0)

    def _leaf(self, G, H):
        return Node(value=-G / (H + self.p.reg_lambda))

    def _grow(self, ghw, mask, depth) -> Node:
        G, H, W = ghw[mask].sum(axis=0).tolist()
        lam = self.p.reg_lambda
        if depth >= self.p.max_depth or W < 2 * self.p.min_leaf:
            return self._leaf(G, H)
        # per-feature sorted views restricted to this node
        sel = mask[self.order]  # (n, p) bool in sorted order
        n_node = int(mask.sum())
        idx = self.order.T[sel.T].reshape(self.X.shape[1], n_node).T  # (n_node, p)
        xs = self.X[idx, self._cols]
        left = ghw[idx].cumsum(axis=0)[:-1]  # (n_node - 1, p, 3)
        gl, hl, wl = left[..., 0], left[..., 1], left[..., 2]
        gr, hr, wr = G - gl, H - hl, W - wl
        gain = 0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam) - G ** 2 / (H + lam))
        ok = (xs[1:] > xs[:-1]) & (wl >= self.p.min_leaf) & (wr >= self.p.min_leaf)
        if not ok.any():
            return self._leaf(G, H)
        jit = self.jitter[self.dense[idx[:-1], self._cols], self._cols]
        score = np.where(ok, gain + jit * np.maximum(1.0, np.abs(gain)), -np.inf)
        # argmax over feature-major flattening: lowest feature, then lowest threshold
        flat = score.T.ravel()
        best = int(np.argmax(flat))
        f, pos = divmod(best, n_node - 1)
        if not gain[pos, f] > 0:
            return self._leaf(G, H)
        thr = 0.5 * (xs[pos, f] + xs[pos + 1, f])
        if not thr < xs[pos + 1, f]:  # midpoint rounded up to the right value
            thr = xs[pos, f]
        go_left = self.X[:, f] <= thr
        return Node(feature=f, threshold=float(thr),
                    left=self._grow(ghw, mask & go_left, depth + 1),
                    right=self._grow(ghw, mask & ~go_left, depth + 1))


def train_boost(X, y, params: BoostParams | None = None, feature_names: Sequence[str] | None = None,
                sample_weight=None) -> BoostModel:
    """Gradient boosting with logistic loss and Newton leaf values.

    ``sample_weight`` scales each row's gradient and hessian; a weight of 2
    is equivalent to duplicating the row.
    """
    params = params or BoostParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n, p) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValidationError("feature matrix contains missing values")
    w = np.ones(y.size) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    pos = float(np.sum(w * (y == 1)))
    neg = float(np.sum(w * (y == 0)))
    if pos == 0 or neg == 0 or pos + neg != float(np.sum(w)):
        raise ValidationError("single-class training set" if pos == 0 or neg == 0
                              else "labels must be 0 or 1")
    names = tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(X.shape[1]))
    model = BoostModel(names, math.log(pos / neg), params.learning_rate, [], params.max_depth)
    finder = _SplitFinder(X, w, params, np.random.default_rng(params.seed))
    raw = np.full(y.size, model.initial)
    for _ in range(params.rounds):
        prob = _sigmoid(raw)
        g = w * (prob - y)
        h = w * prob * (1.0 - prob)
        tree = finder.build(g, h)
        model.trees.append(tree)
        raw += params.learning_rate * tree.predict(X)
    return model


def predict(model: BoostModel, X, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Probability of class 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if feature_names is not None and tuple(feature_names) != model.feature_names:
        unknown = set(feature_names) ^ set(model.feature_names)
        raise ValidationError(f"feature names do not match the model: {sorted(unknown) or 'order differs'}")
    if X.shape[1] != len(model.feature_names):
        raise ValidationError("wrong number of features")
    return _sigmoid(model.raw_score(X))


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    pos = s[y == 1]
    neg = s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise ValueError("auc needs both classes")
    r = rankdata(np.concatenate((pos, neg)))
    u = float(r[: pos.size].sum()) - pos.size * (pos.size + 1) / 2.0
    return u / (pos.size * neg.size)


@dataclass(frozen=True)
class CvResult:
    participant_ids: tuple[str, ...]
    labels: np.ndarray
    scores: dict[int, np.ndarray]  # seed -> held-out score per participant (NaN if skipped)
    auc_per_seed: dict[int, float]
    skipped: tuple[str, ...] = ()

    @property
    def aucs(self) -> np.ndarray:
        return np.array(list(self.auc_per_seed.values()))

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def sd_auc(self) -> float:
        a = self.aucs
        return float(np.std(a, ddof=1)) if a.size > 1 else 0.0

    @property
    def auc_range(self) -> tuple[float, float]:
        return float(self.aucs.min()), float(self.aucs.max())


def _fold_scores(X, y, params: BoostParams, rebalance: bool = False):
    n = y.size
    out = np.full(n, np.nan)
    skipped = []
    rng = np.random.default_rng(params.seed)
    for i in range(n):
        train = np.arange(n) != i
        if rebalance:
            opposite = np.flatnonzero(train & (y != y[i]))
            if opposite.size:
                train[rng.choice(opposite)] = False
        yt = y[train]
        if np.all(yt == yt[0]):
            skipped.append(i)
            continue
        model = train_boost(X[train], yt, params)
        out[i] = float(_sigmoid(model.raw_score(X[i:i + 1]))[0])
    return out, skipped


def lopo_cv(features: Sequence[ParticipantFeatures], params: BoostParams | None = None,
            seeds: Sequence[int] = (0,), workers: int = 1,
            rebalance: bool = False) -> CvResult:
    """Leave-one-participant-out CV, repeated per seed; AUC over pooled scores.

    Folds whose training set has a single class are skipped and their
    participant excluded from the pooled AUC (NaN if one class is left).  With ``rebalance`` each fold
    also drops one seeded-random training participant of the opposite class,
    keeping the training class balance constant across folds (plain
    leave-one-out shifts it against the held-out class, which biases the
    pooled AUC below 0.5 on null data).
    """
    params = params or BoostParams()
    X, y, _ = stack_features(features)
    if y.size < 3:
        raise ValidationError("lopo_cv needs at least 3 participants")
    if not (np.any(y == 0) and np.any(y == 1)) or np.any((y != 0) & (y != 1)):
        raise ValidationError("lopo_cv needs labels 0/1 with both classes present")
    seeds = [int(s) for s in seeds]
    jobs = [(X, y, BoostParams(**{**params.__dict__, "seed": s}), rebalance) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fold_scores_star, jobs))
    else:
        results = [_fold_scores(*job) for job in jobs]
    scores, aucs = {}, {}
    skipped: set[int] = set()
    for s, (sc, sk) in zip(seeds, results):
        scores[s] = sc
        skipped.update(sk)
        keep = np.isfinite(sc)
        both = np.any(y[keep] == 0) and np.any(y[keep] == 1)
        aucs[s] = auc(sc[keep], y[keep]) if both else math.nan
    ids = tuple(f.participant_id for f in features)
    return CvResult(ids, y, scores, aucs, tuple(ids[i] for i in sorted(skipped)))


def _fold_scores_star(job):
    return _fold_scores(*job)
