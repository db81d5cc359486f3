"""Corpus manifests, binary valence mapping, and multi-rater gold labels."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    EmptyManifest,
    InvalidCounts,
    MissingColumn,
    UnknownEmotion,
)

EMOTIONS = ("happy", "anger", "sad", "neutral")

# happy/neutral carry positive-or-neutral valence (0); anger/sad negative (1).
VALENCE_OF = {"happy": 0, "neutral": 0, "anger": 1, "sad": 1}

MANIFEST_COLUMNS = ("utterance_id", "path", "corpus", "speaker_id", "emotion")
RATINGS_COLUMNS = ("utterance_id", "rater_id", "emotion")


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    path: str
    corpus: str
    speaker_id: str
    emotion: str


@dataclass
class Manifest:
    records: list
    source_path: str = ""

    def __post_init__(self):
        if not self.records:
            raise EmptyManifest("manifest has no records")
        seen = set()
        for rec in self.records:
            if rec.utterance_id in seen:
                raise DuplicateId(f"duplicate utterance_id {rec.utterance_id!r}")
            seen.add(rec.utterance_id)
            if rec.emotion not in EMOTIONS:
                raise UnknownEmotion(f"{rec.utterance_id}: emotion {rec.emotion!r} not in {EMOTIONS}")
            if not rec.speaker_id:
                raise MissingColumn(f"{rec.utterance_id}: empty speaker_id")

    @property
    def corpora(self) -> tuple:
        return tuple(sorted({r.corpus for r in self.records}))

    def ids(self) -> list:
        return [r.utterance_id for r in self.records]

    def by_id(self, utterance_id: str) -> UtteranceRecord:
        return self._index()[utterance_id]

    def _index(self) -> dict:
        if not hasattr(self, "_id_index"):
            self._id_index = {r.utterance_id: r for r in self.records}
        return self._id_index

    def subset(self, corpus: str) -> "Manifest":
        return Manifest([r for r in self.records if r.corpus == corpus], self.source_path)

    def resolve_path(self, rec: UtteranceRecord) -> Path:
        p = Path(rec.path)
        if not p.is_absolute() and self.source_path:
            p = Path(self.source_path).parent / p
        return p


@dataclass
class RatingsTable:
    rows: list  # (utterance_id, rater_id, emotion)

    def __post_init__(self):
        seen = set()
        for utt, rater, emotion in self.rows:
            if (utt, rater) in seen:
                raise DuplicateId(f"rater {rater!r} rated {utt!r} twice")
            seen.add((utt, rater))
            if emotion not in EMOTIONS:
                raise UnknownEmotion(f"{utt}: emotion {emotion!r} not in {EMOTIONS}")


@dataclass
class CorpusStats:
    total: int
    per_corpus: dict
    per_emotion: dict
    per_class: dict
    speakers_per_corpus: dict
    imbalance_ratio: float


def _read_rows(path, required):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        return list(reader)


def parse_manifest(path) -> Manifest:
    """Read and validate a manifest CSV (utterance_id,path,corpus,speaker_id,emotion)."""
    rows = _read_rows(path, MANIFEST_COLUMNS)
    records = [
        UtteranceRecord(
            utterance_id=r["utterance_id"],
            path=r["path"],
            corpus=r["corpus"],
            speaker_id=r["speaker_id"],
            emotion=r["emotion"],
        )
        for r in rows
    ]
    return Manifest(records, source_path=str(path))


def write_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in manifest.records:
            writer.writerow([r.utterance_id, r.path, r.corpus, r.speaker_id, r.emotion])


def parse_ratings(path) -> RatingsTable:
    rows = _read_rows(path, RATINGS_COLUMNS)
    return RatingsTable([(r["utterance_id"], r["rater_id"], r["emotion"]) for r in rows])


def map_valence(emotion: str) -> int:
    try:
        return VALENCE_OF[emotion]
    except KeyError:
        raise UnknownEmotion(f"emotion {emotion!r} not in {EMOTIONS}") from None


def valence_labels(manifest: Manifest) -> dict:
    return {r.utterance_id: map_valence(r.emotion) for r in manifest.records}


def majority_vote(ratings: RatingsTable) -> tuple[dict, list]:
    """Gold label per utterance by strict plurality; ties go to the unresolved list."""
    votes: dict[str, Counter] = {}
    order: list[str] = []
    for utt, _rater, emotion in ratings.rows:
        if utt not in votes:
            votes[utt] = Counter()
            order.append(utt)
        votes[utt][emotion] += 1
    gold: dict[str, str] = {}
    unresolved: list[str] = []
    for utt in order:
        ranked = votes[utt].most_common()
        if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
            unresolved.append(utt)
        else:
            gold[utt] = ranked[0][0]
    return gold, unresolved


def ratings_counts(ratings: RatingsTable) -> tuple[list, np.ndarray]:
    """Items-by-category count matrix over the emotion vocabulary.

    Raises InvalidCounts unless every item was rated by the same number of
    raters (at least two).
    """
    per_item: dict[str, Counter] = {}
    order: list[str] = []
    for utt, _rater, emotion in ratings.rows:
        if utt not in per_item:
            per_item[utt] = Counter()
            order.append(utt)
        per_item[utt][emotion] += 1
    counts = np.array([[per_item[u][e] for e in EMOTIONS] for u in order], dtype=int)
    row_sums = set(counts.sum(axis=1).tolist())
    if len(row_sums) != 1:
        raise InvalidCounts(f"raters per utterance not constant: saw {sorted(row_sums)}")
    n = row_sums.pop()
    if n < 2:
        raise InvalidCounts("need at least two raters per utterance")
    return order, counts


def summarize(manifest: Manifest) -> CorpusStats:
    """Exact per-corpus, per-emotion, per-class, and speaker counts."""
    per_corpus = Counter(r.corpus for r in manifest.records)
    per_emotion = Counter(r.emotion for r in manifest.records)
    per_class = Counter(map_valence(r.emotion) for r in manifest.records)
    speakers: dict[str, set] = {}
    for r in manifest.records:
        speakers.setdefault(r.corpus, set()).add(r.speaker_id)
    class_counts = [per_class.get(0, 0), per_class.get(1, 0)]
    lo = min(class_counts)
    ratio = float("inf") if lo == 0 else max(class_counts) / lo
    return CorpusStats(
        total=len(manifest.records),
        per_corpus=dict(per_corpus),
        per_emotion=dict(per_emotion),
        per_class=dict(per_class),
        speakers_per_corpus={c: len(s) for c, s in speakers.items()},
        imbalance_ratio=ratio,
    )
