"""Seeded synthetic long-tailed partially-labeled datasets and their file format.

Class sizes follow an exponential profile between a head count and
head/imbalance_ratio; features are isotropic Gaussian clouds around class
means drawn on a hypersphere whose radius sets the task difficulty.
Candidate sets contain the true label plus each negative label flipped in
independently with the ambiguity probability, optionally restricted to the
true label's superclass.

Datasets serialize to a line-oriented text format::

    plrlab-dataset v1 N=<int> c=<int> d=<int>
    <id> TAB f_1 ... TAB f_d TAB <true label> TAB <cand,cand,...>

with features printed at full float64 precision so files round-trip
exactly. Lines starting with '#' after the header are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .core import CandidateMatrix, FormatError, Rng, ShapeMismatch

__all__ = [
    "DatasetSpec",
    "PartialDataset",
    "longtail_counts",
    "gen_features",
    "gen_candidates",
    "group_split",
    "gen_dataset",
    "write_dataset",
    "read_dataset",
]


@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for one seeded train/test dataset pair."""

    n_classes: int
    head_count: int
    imbalance_ratio: float = 1.0
    flip_prob: float = 0.0
    feature_dim: int = 16
    class_separation: float = 4.0
    test_per_class: int = 50
    hierarchy: tuple[tuple[int, ...], ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1 or self.head_count < 1 or self.feature_dim < 1:
            raise ValueError("n_classes, head_count and feature_dim must be positive")
        if self.imbalance_ratio < 1.0:
            raise ValueError("imbalance_ratio must be at least 1")
        if not 0.0 <= self.flip_prob < 1.0:
            raise ValueError("flip_prob must lie in [0, 1)")
        if round(self.head_count / self.imbalance_ratio) < 1:
            raise ValueError("tail class would be empty: head_count/imbalance_ratio < 0.5")
        if self.test_per_class < 1:
            raise ValueError("test_per_class must be positive")
        if self.class_separation < 0.0:
            raise ValueError("class_separation must be nonnegative")
        if self.hierarchy is not None:
            flat = sorted(j for group in self.hierarchy for j in group)
            if flat != list(range(self.n_classes)):
                raise ValueError("hierarchy must partition the class indices")


@dataclass(frozen=True, eq=False)
class PartialDataset:
    """Feature matrix, hidden true labels, and candidate sets for one split.

    ``class_counts`` counts true labels per class (non-increasing by
    construction, classes are ordered head to tail) and
    ``group_boundaries`` holds the many/medium/few split points.
    """

    features: np.ndarray
    true_labels: np.ndarray
    candidates: CandidateMatrix
    class_counts: np.ndarray
    group_boundaries: tuple[int, int]

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.true_labels, dtype=np.int64)
        if feats.ndim != 2 or labels.ndim != 1 or feats.shape[0] != labels.shape[0]:
            raise ShapeMismatch("features and labels disagree on the sample count")
        if feats.shape[0] != self.candidates.n_samples:
            raise ShapeMismatch("candidates disagree with features on the sample count")
        c = self.candidates.n_classes
        if labels.size and (labels.min() < 0 or labels.max() >= c):
            raise ValueError("true labels out of class range")
        rows = np.arange(labels.shape[0])
        if not np.all(self.candidates.bits[rows, labels] == 1.0):
            raise ValueError("every true label must be inside its candidate set")
        counts = np.ascontiguousarray(self.class_counts, dtype=np.int64)
        if np.any(np.diff(counts) > 0):
            raise ValueError("class counts must be non-increasing (head classes first)")
        feats.setflags(write=False)
        labels.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "true_labels", labels)
        object.__setattr__(self, "class_counts", counts)

    @classmethod
    def from_arrays(cls, features, true_labels, candidates: CandidateMatrix) -> "PartialDataset":
        labels = np.asarray(true_labels, dtype=np.int64)
        counts = np.bincount(labels, minlength=candidates.n_classes)
        bounds = group_split(counts, candidates.n_classes)
        return cls(features, labels, candidates, counts, bounds)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_classes(self) -> int:
        return self.candidates.n_classes

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


def longtail_counts(head_count: int, imbalance_ratio: float, n_classes: int) -> np.ndarray:
    """Per-class sample counts on an exponential head-to-tail profile.

    Endpoints are exact: class 0 gets head_count, the last class gets
    round(head_count / imbalance_ratio).
    """
    if n_classes < 1 or head_count < 1 or imbalance_ratio < 1.0:
        raise ValueError("need n_classes >= 1, head_count >= 1, imbalance_ratio >= 1")
    if n_classes == 1:
        return np.array([head_count], dtype=np.int64)
    exponents = np.arange(n_classes) / (n_classes - 1)
    raw = head_count * imbalance_ratio ** (-exponents)
    return np.array([round(x) for x in raw], dtype=np.int64)


def _class_means(spec: DatasetSpec, rng: Rng) -> np.ndarray:
    directions = rng.normal(size=(spec.n_classes, spec.feature_dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return spec.class_separation * directions / norms


def _sample_split(means: np.ndarray, counts: np.ndarray, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    labels = np.repeat(np.arange(means.shape[0]), counts)
    feats = means[labels] + rng.normal(size=(labels.shape[0], means.shape[1]))
    return feats, labels


def gen_features(spec: DatasetSpec, rng: Rng) -> tuple[np.ndarray, np.ndarray]:
    """Training-split features and labels for a spec (class means from rng)."""
    means = _class_means(spec, rng.child(0))
    counts = longtail_counts(spec.head_count, spec.imbalance_ratio, spec.n_classes)
    return _sample_split(means, counts, rng.child(1))


def gen_candidates(true_labels, flip_prob: float, hierarchy, rng: Rng,
                   n_classes: int | None = None) -> CandidateMatrix:
    """Candidate sets: the true label plus independently flipped negatives.

    With a hierarchy, labels outside the true label's superclass never
    become candidates. n_classes defaults to the largest label + 1.
    """
    if not 0.0 <= flip_prob < 1.0:
        raise ValueError("flip_prob must lie in [0, 1)")
    labels = np.asarray(true_labels, dtype=np.int64)
    c = n_classes if n_classes is not None else (int(labels.max()) + 1 if labels.size else 1)
    if hierarchy is not None:
        c = max(c, max(j for group in hierarchy for j in group) + 1)
    bits = (rng.uniform(size=(labels.shape[0], c)) < flip_prob).astype(np.float64)
    if hierarchy is not None:
        group_of = np.full(c, -1, dtype=np.int64)
        for g, group in enumerate(hierarchy):
            for j in group:
                group_of[j] = g
        if np.any(group_of < 0):
            raise ValueError("hierarchy must cover every class")
        same_group = group_of[labels][:, None] == group_of[None, :]
        bits *= same_group
    bits[np.arange(labels.shape[0]), labels] = 1.0
    return CandidateMatrix(bits)


def group_split(class_counts, n_classes: int) -> tuple[int, int]:
    """Boundary indices splitting classes into many/medium/few thirds.

    Classes [0, lo) are many, [lo, hi) medium, [hi, c) few; any remainder
    goes to the middle group. Expects counts sorted non-increasing.
    """
    counts = np.asarray(class_counts)
    if counts.shape[0] != n_classes:
        raise ShapeMismatch(f"{counts.shape[0]} counts for {n_classes} classes")
    if np.any(np.diff(counts) > 0):
        raise ValueError("class counts must be sorted non-increasing")
    lo = n_classes // 3
    hi = n_classes - n_classes // 3
    return lo, hi


def gen_dataset(spec: DatasetSpec) -> tuple[PartialDataset, PartialDataset]:
    """Seeded (train, test) pair sharing class means.

    The train split is long-tailed with flipped candidate sets; the test
    split is balanced (test_per_class each) with singleton candidates.
    """
    rng = Rng(spec.seed)
    means = _class_means(spec, rng.child(0))
    train_counts = longtail_counts(spec.head_count, spec.imbalance_ratio, spec.n_classes)
    train_x, train_y = _sample_split(means, train_counts, rng.child(1))
    test_counts = np.full(spec.n_classes, spec.test_per_class, dtype=np.int64)
    test_x, test_y = _sample_split(means, test_counts, rng.child(2))

    train_s = gen_candidates(train_y, spec.flip_prob, spec.hierarchy, rng.child(3),
                             n_classes=spec.n_classes)
    test_s = gen_candidates(test_y, 0.0, None, rng.child(4), n_classes=spec.n_classes)

    train = PartialDataset.from_arrays(train_x, train_y, train_s)
    test = PartialDataset.from_arrays(test_x, test_y, test_s)
    return train, test


def write_dataset(ds: PartialDataset, path, comments=()) -> None:
    """Serialize a dataset split; optional '#' comment lines follow the header."""
    n, c, d = ds.n_samples, ds.n_classes, ds.feature_dim
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"plrlab-dataset v1 N={n} c={c} d={d}\n")
        for line in comments:
            fh.write(f"# {line}\n")
        for i in range(n):
            feats = "\t".join(f"{x:.17g}" for x in ds.features[i])
            cands = ",".join(str(j) for j in np.flatnonzero(ds.candidates.bits[i]))
            fh.write(f"{i}\t{feats}\t{ds.true_labels[i]}\t{cands}\n")


_HEADER_RE = re.compile(r"^plrlab-dataset v1 N=(\d+) c=(\d+) d=(\d+)$")


def read_dataset(path) -> PartialDataset:
    """Parse a dataset file, raising FormatError with the offending line number."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if not lines or not lines[0]:
        raise FormatError(1, "missing header")
    match = _HEADER_RE.match(lines[0])
    if match is None:
        raise FormatError(1, f"bad header {lines[0]!r}")
    n, c, d = (int(g) for g in match.groups())

    features = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    bits = np.zeros((n, c))
    row = 0
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("#"):
            continue
        if row >= n:
            raise FormatError(lineno, f"more than N={n} records")
        parts = line.split("\t")
        if len(parts) != d + 3:
            raise FormatError(lineno, f"expected {d + 3} fields, got {len(parts)}")
        try:
            idx = int(parts[0])
            features[row] = [float(x) for x in parts[1 : d + 1]]
            label = int(parts[d + 1])
            cands = [int(x) for x in parts[d + 2].split(",")]
        except ValueError as exc:
            raise FormatError(lineno, str(exc)) from None
        if idx != row:
            raise FormatError(lineno, f"record id {idx}, expected {row}")
        if not 0 <= label < c:
            raise FormatError(lineno, f"label {label} out of range")
        if any(not 0 <= j < c for j in cands) or any(
            b <= a for a, b in zip(cands, cands[1:])
        ):
            raise FormatError(lineno, "candidate ids must be strictly ascending and in range")
        labels[row] = label
        bits[row, cands] = 1.0
        row += 1
    if row != n:
        raise FormatError(len(lines), f"expected N={n} records, found {row}")
    try:
        return PartialDataset.from_arrays(features, labels, CandidateMatrix(bits))
    except (ValueError, ShapeMismatch) as exc:
        raise FormatError(len(lines), str(exc)) from None
