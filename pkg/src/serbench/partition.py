"""Speaker-disjoint, label-stratified folds and self/cross-corpus splits.

Fold assignment is a deterministic greedy: speakers are ordered by descending
utterance count (ties broken by a seeded shuffle) and each is placed into the
fold where it least increases the squared deviation of per-fold class counts
from the globally proportional per-fold target. Empty folds carry the maximal
deviation, so they fill first; remaining ties go to the smallest fold, then
the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidK, SingleCorpus, TooFewGroups, UnknownCorpus
from .corpus import Manifest


@dataclass
class FoldAssignment:
    k: int
    fold_of: dict  # utterance_id -> fold index
    seed: int

    def fold_ids(self, fold: int) -> list:
        return [u for u, f in self.fold_of.items() if f == fold]


@dataclass
class TrainTestSplit:
    train_ids: frozenset
    test_ids: frozenset
    description: str = ""


def grouped_stratified_folds(groups, labels, k: int, seed: int = 0) -> np.ndarray:
    """Fold index per item such that all items of a group share one fold."""
    if k < 2:
        raise InvalidK(f"need k >= 2, got {k}")
    groups = list(groups)
    labels = np.asarray(list(labels), dtype=int)
    if len(groups) != labels.size:
        raise ValueError("groups and labels must align")

    group_keys = sorted(set(groups), key=repr)
    if len(group_keys) < k:
        raise TooFewGroups(f"{len(group_keys)} groups for k={k} folds")

    classes = np.unique(labels)
    class_pos = {c: i for i, c in enumerate(classes)}
    group_idx = {g: i for i, g in enumerate(group_keys)}
    counts = np.zeros((len(group_keys), classes.size))
    for g, y in zip(groups, labels):
        counts[group_idx[g], class_pos[y]] += 1

    target = counts.sum(axis=0) / k
    rng = np.random.default_rng(seed)
    shuffle_pos = rng.permutation(len(group_keys))
    order = sorted(
        range(len(group_keys)), key=lambda i: (-counts[i].sum(), shuffle_pos[i])
    )

    fold_counts = np.zeros((k, classes.size))
    fold_sizes = np.zeros(k)
    fold_of_group = np.empty(len(group_keys), dtype=int)
    for i in order:
        v = counts[i]
        before = np.sum((fold_counts - target) ** 2, axis=1)
        after = np.sum((fold_counts + v - target) ** 2, axis=1)
        delta = after - before
        best = min(range(k), key=lambda f: (delta[f], fold_sizes[f], f))
        fold_of_group[i] = best
        fold_counts[best] += v
        fold_sizes[best] += v.sum()

    if np.any(fold_sizes == 0):
        raise TooFewGroups("assignment left an empty fold; add speakers or lower k")
    return np.asarray([fold_of_group[group_idx[g]] for g in groups])


def _speaker_key(record) -> tuple:
    # speakers are only comparable within a corpus
    return (record.corpus, record.speaker_id)


def stratified_group_kfold(manifest: Manifest, labels: dict, k: int = 4, seed: int = 0) -> FoldAssignment:
    """Assign every utterance to one of k folds, keeping speakers whole."""
    groups = [_speaker_key(r) for r in manifest.records]
    y = [labels[r.utterance_id] for r in manifest.records]
    folds = grouped_stratified_folds(groups, y, k, seed)
    fold_of = {r.utterance_id: int(f) for r, f in zip(manifest.records, folds)}
    return FoldAssignment(k=k, fold_of=fold_of, seed=seed)


def self_corpus_splits(assignment: FoldAssignment) -> list:
    """k splits where fold i is the test set and the rest train."""
    splits = []
    for i in range(assignment.k):
        test = frozenset(u for u, f in assignment.fold_of.items() if f == i)
        train = frozenset(u for u, f in assignment.fold_of.items() if f != i)
        splits.append(TrainTestSplit(train, test, description=f"self fold {i}/{assignment.k}"))
    return splits


def cross_corpus_splits(
    target: str, manifest: Manifest, assignment: FoldAssignment, k: int | None = None
) -> list:
    """3-to-1 style splits: all other corpora plus target-train folds vs one target fold."""
    corpora = manifest.corpora
    if len(corpora) < 2:
        raise SingleCorpus("cross-corpus evaluation needs at least two corpora")
    if target not in corpora:
        raise UnknownCorpus(f"target {target!r} not among {corpora}")
    k = k or assignment.k
    other_ids = frozenset(r.utterance_id for r in manifest.records if r.corpus != target)
    splits = []
    for i in range(k):
        test = frozenset(u for u, f in assignment.fold_of.items() if f == i)
        target_train = frozenset(u for u, f in assignment.fold_of.items() if f != i)
        splits.append(
            TrainTestSplit(
                other_ids | target_train,
                test,
                description=f"cross target={target} fold {i}/{k}",
            )
        )
    return splits


def dump_folds(assignment: FoldAssignment, path) -> None:
    """Audit CSV with one `utterance_id,fold` row per utterance."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("utterance_id,fold\n")
        for utt, fold in assignment.fold_of.items():
            fh.write(f"{utt},{fold}\n")


class SpeakerStratifiedKFold:
    """Splitter with the sklearn cross-validator calling convention."""

    def __init__(self, n_splits: int = 4, seed: int = 0):
        self.n_splits = n_splits
        self.seed = seed

    def get_n_splits(self, X=None, y=None, groups=None) -> int:
        return self.n_splits

    def split(self, X, y, groups):
        folds = grouped_stratified_folds(groups, y, self.n_splits, self.seed)
        indices = np.arange(len(folds))
        for i in range(self.n_splits):
            yield indices[folds != i], indices[folds == i]
