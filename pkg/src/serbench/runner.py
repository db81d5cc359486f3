"""End-to-end experiment orchestration.

Builds feature caches, executes self-corpus and cross-corpus evaluations with
speaker-grouped folds and inner hyperparameter search, generates synthetic
corpora for desk-scale validation, and renders UAR summary tables.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .acoustic_features import FeatureConfig, extract_features, preset_descriptor
from .audio_io import AudioClip, PreprocessConfig, load_wav, preprocess, save_wav
from .corpus import EMOTIONS, Manifest, UtteranceRecord, map_valence, valence_labels, write_manifest
from .errors import (
    ConfigError,
    ExtractionFailed,
    InconsistentReports,
    LeakageError,
    SerBenchError,
    UnknownCorpus,
)
from .learners import FeatureScaler, HyperGrid, make_estimator, search_hyperparams
from .metrics import confusion_matrix, uar
from .partition import cross_corpus_splits, self_corpus_splits, stratified_group_kfold


@dataclass
class ExperimentConfig:
    manifest: str
    preset: str = "compact"
    model: str = "logreg"
    mode: str = "self"
    target: str = ""
    k: int = 4
    seed: int = 0
    grid: str = "default"
    search: str = "grid"
    n_draws: int = 0
    class_weighting: bool = False
    standardize: bool = True
    cache_dir: str = ""

    def __post_init__(self):
        if self.preset not in ("compact", "brute"):
            raise ConfigError(f"preset must be compact|brute, got {self.preset!r}")
        if self.model not in ("logreg", "mlp"):
            raise ConfigError(f"model must be logreg|mlp, got {self.model!r}")
        if self.mode not in ("self", "cross"):
            raise ConfigError(f"mode must be self|cross, got {self.mode!r}")
        if self.mode == "cross" and not self.target:
            raise ConfigError("cross mode requires a target corpus")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")

    def as_dict(self) -> dict:
        return {
            "manifest": self.manifest,
            "preset": self.preset,
            "model": self.model,
            "mode": self.mode,
            "target": self.target,
            "k": self.k,
            "seed": self.seed,
            "grid": self.grid,
            "search": self.search,
            "n_draws": self.n_draws,
            "class_weighting": self.class_weighting,
            "standardize": self.standardize,
        }


@dataclass
class EvalReport:
    config: dict
    fold_uars: list
    mean_uar: float
    confusions: list  # one 2x2 nested list per fold
    chosen_hypers: list
    seeds: dict
    wall_clock_s: float

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "fold_uars": self.fold_uars,
            "mean_uar": self.mean_uar,
            "confusions": self.confusions,
            "chosen_hypers": self.chosen_hypers,
            "seeds": self.seeds,
            "wall_clock_s": self.wall_clock_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def report_from_dict(d: dict) -> EvalReport:
    return EvalReport(
        config=d["config"],
        fold_uars=d["fold_uars"],
        mean_uar=d["mean_uar"],
        confusions=d["confusions"],
        chosen_hypers=d["chosen_hypers"],
        seeds=d["seeds"],
        wall_clock_s=d["wall_clock_s"],
    )


def load_report(path) -> EvalReport:
    with open(path, encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Config and synth-spec files: flat "key = value" lines, '#' comments.


def _parse_kv_file(path) -> list:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            pairs.append((key.strip(), value.strip()))
    return pairs


_BOOLS = {"on": True, "true": True, "1": True, "off": False, "false": False, "0": False}


def _to_bool(value: str, key: str) -> bool:
    try:
        return _BOOLS[value.lower()]
    except KeyError:
        raise ConfigError(f"{key} must be on/off, got {value!r}") from None


def parse_experiment_config(path, **overrides) -> ExperimentConfig:
    fields = {
        "manifest": str, "preset": str, "model": str, "mode": str, "target": str,
        "k": int, "seed": int, "grid": str, "search": str, "n_draws": int,
        "class_weighting": "bool", "standardize": "bool", "cache_dir": str,
    }
    values: dict = {}
    for key, raw in _parse_kv_file(path):
        if key not in fields:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        kind = fields[key]
        values[key] = _to_bool(raw, key) if kind == "bool" else kind(raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "manifest" not in values:
        raise ConfigError(f"{path}: missing required key 'manifest'")
    if not Path(values["manifest"]).is_absolute():
        values["manifest"] = str((Path(path).parent / values["manifest"]).resolve())
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# Feature cache


def _format_value(v: float) -> str:
    return f"{v:.9g}"


def cache_features(manifest: Manifest, preset: str, out_path, cfg: FeatureConfig | None = None) -> Path:
    """Extract features for every utterance, in manifest order, into a CSV.

    Rows are written with 9 significant digits, so reruns over unchanged
    inputs produce byte-identical files. Any per-utterance failure aborts the
    cache with every failing utterance named.
    """
    descriptor = preset_descriptor(preset)
    out_path = Path(out_path)
    failures = []
    rows = []
    for rec in manifest.records:
        try:
            clip = load_wav(manifest.resolve_path(rec))
            clip = preprocess(clip, PreprocessConfig())
            fv = extract_features(clip, preset, cfg, utterance_id=rec.utterance_id)
            rows.append((rec.utterance_id, fv.values))
        except (SerBenchError, OSError) as exc:
            failures.append(f"{rec.utterance_id}: {type(exc).__name__}: {exc}")
    if failures:
        raise ExtractionFailed("; ".join(failures))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("utterance_id," + ",".join(descriptor.names) + "\n")
        for utt, values in rows:
            fh.write(utt + "," + ",".join(_format_value(v) for v in values) + "\n")
    return out_path


def load_feature_cache(path, preset: str) -> tuple[list, np.ndarray]:
    descriptor = preset_descriptor(preset)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != ["utterance_id"] + list(descriptor.names):
            raise ExtractionFailed(f"{path}: cache header does not match the {preset} schema")
        ids, rows = [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[1:]])
    return ids, np.asarray(rows)


def _manifest_digest(manifest: Manifest) -> str:
    if manifest.source_path and Path(manifest.source_path).exists():
        blob = Path(manifest.source_path).read_bytes()
    else:
        blob = "\n".join(
            f"{r.utterance_id},{r.path},{r.corpus},{r.speaker_id},{r.emotion}"
            for r in manifest.records
        ).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def ensure_feature_cache(manifest: Manifest, preset: str, cache_dir=None) -> Path:
    """Reuse the cache keyed by (manifest digest, preset), building it if absent."""
    base = Path(cache_dir) if cache_dir else Path(manifest.source_path).parent / "feature_cache"
    path = base / f"{_manifest_digest(manifest)}_{preset}.csv"
    if not path.exists():
        cache_features(manifest, preset, path)
    return path


# ---------------------------------------------------------------------------
# Evaluation


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def _check_leakage(split, manifest: Manifest, target: str) -> None:
    if split.train_ids & split.test_ids:
        raise LeakageError(f"{split.description}: train and test share utterances")
    speaker_of = {r.utterance_id: (r.corpus, r.speaker_id) for r in manifest.records}
    train_speakers = {speaker_of[u] for u in split.train_ids if speaker_of[u][0] == target}
    test_speakers = {speaker_of[u] for u in split.test_ids}
    if train_speakers & test_speakers:
        raise LeakageError(f"{split.description}: target-corpus speakers leak across the split")


def _make_grid(config: ExperimentConfig) -> HyperGrid:
    if config.grid != "default":
        raise ConfigError(f"unknown grid {config.grid!r}; only 'default' is defined")
    return HyperGrid(mode=config.search, n_draws=config.n_draws)


def _evaluate_splits(config: ExperimentConfig, manifest: Manifest, splits, target: str) -> EvalReport:
    start = time.perf_counter()
    cache_path = ensure_feature_cache(manifest, config.preset, config.cache_dir or None)
    ids, X = load_feature_cache(cache_path, config.preset)
    row_of = {u: i for i, u in enumerate(ids)}
    labels = valence_labels(manifest)
    speaker_of = {r.utterance_id: (r.corpus, r.speaker_id) for r in manifest.records}

    grid = _make_grid(config)
    class_weight = "balanced" if config.class_weighting else None
    fold_uars, confusions, chosen, fold_seeds = [], [], [], []
    for fold_idx, split in enumerate(splits):
        _check_leakage(split, manifest, target)
        train = sorted(split.train_ids, key=row_of.__getitem__)
        test = sorted(split.test_ids, key=row_of.__getitem__)
        X_tr = X[[row_of[u] for u in train]]
        y_tr = np.array([labels[u] for u in train])
        X_te = X[[row_of[u] for u in test]]
        y_te = np.array([labels[u] for u in test])
        groups_tr = [speaker_of[u] for u in train]

        if config.standardize:
            scaler = FeatureScaler().fit(X_tr)
            assert scaler.n_fit_rows_ == X_tr.shape[0]  # train rows only
            X_tr = scaler.transform(X_tr)
            X_te = scaler.transform(X_te)

        seed = _derive_seed(config.seed, fold_idx)
        best, _ = search_hyperparams(
            config.model, grid, X_tr, y_tr, groups_tr, inner_k=3, seed=seed,
            class_weight=class_weight,
        )
        model = make_estimator(config.model, best, seed=seed, class_weight=class_weight)
        model.fit(X_tr, y_tr)
        cm = confusion_matrix(y_te, model.predict(X_te), 2)
        fold_uars.append(uar(cm))
        confusions.append(cm.tolist())
        chosen.append(best)
        fold_seeds.append(seed)

    config_echo = config.as_dict()
    config_echo["target"] = target
    return EvalReport(
        config=config_echo,
        fold_uars=fold_uars,
        mean_uar=float(np.mean(fold_uars)),
        confusions=confusions,
        chosen_hypers=chosen,
        seeds={"master": config.seed, "folds": fold_seeds},
        wall_clock_s=time.perf_counter() - start,
    )


def _resolve_target(config: ExperimentConfig, manifest: Manifest) -> str:
    corpora = manifest.corpora
    if config.target:
        if config.target not in corpora:
            raise UnknownCorpus(f"target {config.target!r} not among {corpora}")
        return config.target
    if len(corpora) == 1:
        return corpora[0]
    raise ConfigError(f"manifest has corpora {corpora}; pick one with --target")


def run_self_corpus(config: ExperimentConfig, manifest: Manifest | None = None) -> EvalReport:
    """Stratified group k-fold over one corpus; per-fold search/train/test."""
    from .corpus import parse_manifest

    manifest = manifest or parse_manifest(config.manifest)
    target = _resolve_target(config, manifest)
    sub = manifest.subset(target)
    assignment = stratified_group_kfold(sub, valence_labels(sub), k=config.k, seed=config.seed)
    splits = self_corpus_splits(assignment)
    return _evaluate_splits(config, manifest, splits, target)


def run_cross_corpus(config: ExperimentConfig, manifest: Manifest | None = None) -> EvalReport:
    """Train on the other corpora plus the target's train folds, test on the rest."""
    from .corpus import parse_manifest

    manifest = manifest or parse_manifest(config.manifest)
    target = _resolve_target(config, manifest)
    sub = manifest.subset(target)
    assignment = stratified_group_kfold(sub, valence_labels(sub), k=config.k, seed=config.seed)
    splits = cross_corpus_splits(target, manifest, assignment, k=config.k)
    return _evaluate_splits(config, manifest, splits, target)


def run_experiment(config: ExperimentConfig) -> EvalReport:
    if config.mode == "self":
        return run_self_corpus(config)
    return run_cross_corpus(config)


# ---------------------------------------------------------------------------
# Synthetic corpora


@dataclass
class CorpusSpec:
    name: str
    n_speakers: int = 8
    n_utterances: int = 320
    base_f0_hz: float = 140.0
    class_f0_offset_hz: float = 60.0
    class_am_depth: float = 0.3
    pitch_shift_hz: float = 0.0
    noise_level: float = 0.01


@dataclass
class SynthSpec:
    corpora: list
    seed: int = 0
    sample_rate: int = 16000

    def __post_init__(self):
        if not self.corpora:
            raise ConfigError("synth spec needs at least one corpus")


def parse_synth_spec(path) -> SynthSpec:
    corpora = []
    seed = 0
    for key, raw in _parse_kv_file(path):
        if key == "seed":
            seed = int(raw)
        elif key in ("corpus", "corpora"):
            kwargs: dict = {}
            for part in raw.split(","):
                part = part.strip()
                if not part:
                    continue
                if "=" not in part:
                    raise ConfigError(f"{path}: corpus fields look like name=value, got {part!r}")
                k, v = (s.strip() for s in part.split("=", 1))
                if k == "name":
                    kwargs[k] = v
                elif k in ("n_speakers", "n_utterances"):
                    kwargs[k] = int(v)
                elif k in ("base_f0_hz", "class_f0_offset_hz", "class_am_depth",
                           "pitch_shift_hz", "noise_level"):
                    kwargs[k] = float(v)
                else:
                    raise ConfigError(f"{path}: unknown corpus field {k!r}")
            if "name" not in kwargs:
                raise ConfigError(f"{path}: corpus line needs a name")
            corpora.append(CorpusSpec(**kwargs))
        else:
            raise ConfigError(f"{path}: unknown synth key {key!r}")
    return SynthSpec(corpora=corpora, seed=seed)


def _synth_utterance(rng, rate, f0, am_depth, noise_level) -> np.ndarray:
    duration = float(rng.uniform(1.0, 2.0))
    t = np.arange(int(duration * rate)) / rate
    x = np.zeros(t.size)
    for harmonic, amp in enumerate((1.0, 0.5, 0.25, 0.125), start=1):
        x += amp * np.sin(2 * np.pi * f0 * harmonic * t + float(rng.uniform(0, 2 * np.pi)))
    if am_depth > 0:
        am_rate = float(rng.uniform(4.0, 6.0))
        x *= 1.0 + am_depth * np.sin(2 * np.pi * am_rate * t)
    x += noise_level * rng.standard_normal(t.size)
    return 0.9 * x / np.max(np.abs(x))


def generate_synthetic_corpus(spec: SynthSpec, out_dir) -> Path:
    """Write per-utterance WAVs plus a manifest; deterministic per (spec, seed).

    Speakers get a jittered base pitch; the negative-valence class sits
    class_f0_offset_hz above it with extra amplitude modulation; the whole
    corpus can be shifted by pitch_shift_hz to inject a domain gap.
    """
    out_dir = Path(out_dir)
    (out_dir / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    records = []
    for corpus in spec.corpora:
        speaker_base = corpus.base_f0_hz * (
            1.0 + rng.uniform(-0.1, 0.1, size=corpus.n_speakers)
        )
        per_speaker = [0] * corpus.n_speakers
        for i in range(corpus.n_utterances):
            speaker = i % corpus.n_speakers
            j = per_speaker[speaker]
            per_speaker[speaker] += 1
            emotion = EMOTIONS[(speaker + j) % 4]
            valence = map_valence(emotion)
            f0 = (
                speaker_base[speaker]
                + valence * corpus.class_f0_offset_hz
                + corpus.pitch_shift_hz
                + float(rng.uniform(-3.0, 3.0))
            )
            x = _synth_utterance(
                rng, spec.sample_rate, f0, valence * corpus.class_am_depth, corpus.noise_level
            )
            utt = f"{corpus.name}_s{speaker:02d}_u{j:03d}"
            rel = f"wav/{utt}.wav"
            save_wav(AudioClip(x, spec.sample_rate, 1), out_dir / rel)
            records.append(
                UtteranceRecord(utt, rel, corpus.name, f"s{speaker:02d}", emotion)
            )
    manifest = Manifest(records, source_path=str(out_dir / "manifest.csv"))
    write_manifest(manifest, out_dir / "manifest.csv")
    return out_dir / "manifest.csv"


# ---------------------------------------------------------------------------
# Tables


def format_pct(value: float) -> str:
    """Percent with 2 decimals, rounding halves away from zero (0.81525 -> 81.53)."""
    cents = Decimal(repr(float(value))) * 100
    return str(cents.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


_TABLE_COLUMNS = (
    ("compact", "self"),
    ("compact", "cross"),
    ("brute", "self"),
    ("brute", "cross"),
)

_MODEL_TITLES = {"logreg": "Logistic Regression", "mlp": "Multilayer Perceptron"}


def render_tables(reports: list) -> str:
    """One markdown table over (dataset x preset x mode) mean UAR percentages.

    All reports must share one model family; each (dataset, preset, mode)
    cell may be filled at most once. Unfilled cells render as '-'.
    """
    if not reports:
        raise InconsistentReports("no reports to render")
    models = {r.config["model"] for r in reports}
    if len(models) != 1:
        raise InconsistentReports(f"reports mix model families: {sorted(models)}")
    model = models.pop()

    cells: dict = {}
    datasets = []
    for r in reports:
        dataset = r.config.get("target") or "all"
        key = (dataset, r.config["preset"], r.config["mode"])
        if key in cells:
            raise InconsistentReports(f"duplicate cell for {key}")
        cells[key] = r.mean_uar
        if dataset not in datasets:
            datasets.append(dataset)

    title = _MODEL_TITLES.get(model, model)
    lines = [
        f"### {title}: mean UAR (%)",
        "",
        "| Dataset | eGeMAPS-style Self-Corpus | eGeMAPS-style Cross-Corpus |"
        " ComParE-style Self-Corpus | ComParE-style Cross-Corpus |",
        "| --- | --- | --- | --- | --- |",
    ]
    for dataset in datasets:
        row = [dataset]
        for preset, mode in _TABLE_COLUMNS:
            value = cells.get((dataset, preset, mode))
            row.append("-" if value is None else format_pct(value))
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
