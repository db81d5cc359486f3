"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
The end-to-end criteria share one synthetic two-corpus dataset (A unshifted,
B with a +80 Hz corpus-level pitch shift) and a session-scoped feature cache.
"""

import time

import numpy as np
import pytest

from serbench.acoustic_features import extract_features, preset_descriptor
from serbench.audio_io import resample
from serbench.corpus import Manifest, UtteranceRecord, parse_manifest, valence_labels
from serbench.learners import logreg_loss_grad, mlp_loss_grad
from serbench.metrics import confusion_matrix, fleiss_kappa, kappa_interpretation, uar
from serbench.partition import cross_corpus_splits, self_corpus_splits, stratified_group_kfold
from serbench.runner import (
    CorpusSpec,
    EvalReport,
    ExperimentConfig,
    SynthSpec,
    format_pct,
    generate_synthetic_corpus,
    render_tables,
    run_cross_corpus,
    run_self_corpus,
)

from conftest import make_tone


def announce(num, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {num}: {status} - {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------------------
# Shared end-to-end fixtures


@pytest.fixture(scope="session")
def corpus_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("acceptance_corpora")
    spec = SynthSpec(
        corpora=[
            CorpusSpec(name="A", n_speakers=8, n_utterances=320,
                       class_f0_offset_hz=60.0, noise_level=0.01),
            CorpusSpec(name="B", n_speakers=8, n_utterances=320,
                       class_f0_offset_hz=60.0, noise_level=0.01, pitch_shift_hz=80.0),
        ],
        seed=7,
    )
    return str(generate_synthetic_corpus(spec, d))


def _configs(manifest):
    return {
        "self_A_logreg": ExperimentConfig(manifest=manifest, preset="compact",
                                          model="logreg", mode="self", target="A", seed=7),
        "self_A_mlp": ExperimentConfig(manifest=manifest, preset="compact",
                                       model="mlp", mode="self", target="A", seed=7),
        "self_B_logreg": ExperimentConfig(manifest=manifest, preset="compact",
                                          model="logreg", mode="self", target="B", seed=7),
        "cross_B_logreg": ExperimentConfig(manifest=manifest, preset="compact",
                                           model="logreg", mode="cross", target="B", seed=7),
    }


def _run(config):
    if config.mode == "self":
        return run_self_corpus(config)
    return run_cross_corpus(config)


@pytest.fixture(scope="session")
def e2e_results(corpus_manifest):
    results = {}
    for name, config in _configs(corpus_manifest).items():
        start = time.perf_counter()
        report = _run(config)
        results[name] = (report, time.perf_counter() - start)
    return results


# ---------------------------------------------------------------------------
# Criteria


def test_criterion_1_metric_oracle_equivalence():
    start = time.perf_counter()

    def brute_force(cm):
        recalls = []
        for c in range(len(cm)):
            recalls.append(cm[c][c] / sum(cm[c]))
        return sum(recalls) / len(recalls)

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 7))
        cm = rng.integers(0, 40, size=(k, k))
        cm[np.arange(k), np.arange(k)] += 1
        worst = max(worst, abs(uar(cm) - brute_force(cm.tolist())))
    exact = uar([[9, 1], [2, 8]])
    elapsed = time.perf_counter() - start
    announce(
        1,
        worst < 1e-12 and exact == 0.85 and elapsed < 1.0,
        f"1000-matrix oracle gap {worst:.2e}, [[9,1],[2,8]] -> {exact}, {elapsed:.2f}s",
    )


def test_criterion_2_fleiss_kappa():
    unanimous = fleiss_kappa([[3, 0, 0], [0, 3, 0], [0, 0, 3], [3, 0, 0]])
    four_item = fleiss_kappa([[3, 0], [3, 0], [0, 3], [2, 1]])
    band = kappa_interpretation(0.54)
    announce(
        2,
        unanimous == 1.0 and abs(four_item - 0.625) <= 1e-12 and band == "moderate",
        f"unanimous={unanimous}, 4-item={four_item:.12f}, band(0.54)={band}",
    )


def test_criterion_3_dsp_correctness():
    start = time.perf_counter()
    tone = make_tone(220.0, duration_s=1.0, rate=16000)
    fv = extract_features(tone, "compact")
    names = fv.descriptor.names
    f0_mean = fv.values[names.index("f0_hz__mean")]
    jitter = fv.values[names.index("jitter_local__mean")]
    shimmer = fv.values[names.index("shimmer_local_db__mean")]

    out = resample(make_tone(440.0, duration_s=1.0, rate=44100), 16000)
    spec = np.abs(np.fft.rfft(out.samples))
    freqs = np.fft.rfftfreq(out.samples.size, 1.0 / 16000)
    peak_hz = freqs[int(np.argmax(spec))]
    elapsed = time.perf_counter() - start
    announce(
        3,
        abs(f0_mean - 220.0) <= 2.0 and jitter < 1e-3 and shimmer < 0.05
        and abs(peak_hz - 440.0) <= 1.0 and elapsed < 5.0,
        f"f0_mean={f0_mean:.2f}Hz, jitter={jitter:.2e}, shimmer={shimmer:.3f}dB,"
        f" resampled peak={peak_hz:.1f}Hz, {elapsed:.2f}s",
    )


def test_criterion_4_gradient_checks():
    start = time.perf_counter()

    def fd(f, x, h=1e-6):
        g = np.zeros_like(x)
        for i in range(x.size):
            e = np.zeros_like(x)
            e[i] = h
            g[i] = (f(x + e) - f(x - e)) / (2 * h)
        return g

    rng = np.random.default_rng(99)
    worst_lr = 0.0
    for _ in range(20):
        n, d = int(rng.integers(4, 15)), int(rng.integers(2, 8))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        w = rng.normal(scale=0.5, size=d)
        b = float(rng.normal())
        l2 = float(rng.uniform(0, 0.2))
        _, gw, gb = logreg_loss_grad(w, b, X, y, l2)
        theta = np.concatenate([w, [b]])
        approx = fd(lambda t: logreg_loss_grad(t[:-1], t[-1], X, y, l2)[0], theta)
        analytic = np.concatenate([gw, [gb]])
        worst_lr = max(worst_lr, np.linalg.norm(analytic - approx) / np.linalg.norm(approx))

    worst_mlp = 0.0
    for _ in range(20):
        n, d, h = int(rng.integers(2, 8)), int(rng.integers(2, 6)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n).astype(float)
        params = {
            "W1": rng.normal(size=(d, h)) * 0.6,
            "b1": rng.normal(size=h) * 0.2 + 0.05,
            "W2": rng.normal(size=h) * 0.6,
            "b2": float(rng.normal() * 0.2),
        }

        def pack(p):
            return np.concatenate([p["W1"].ravel(), p["b1"], p["W2"], [p["b2"]]])

        def unpack(v):
            return {
                "W1": v[: d * h].reshape(d, h),
                "b1": v[d * h : d * h + h],
                "W2": v[d * h + h : d * h + 2 * h],
                "b2": float(v[-1]),
            }

        _, grads = mlp_loss_grad(params, X, y, 1e-4)
        analytic = pack({k: np.asarray(grads[k]) for k in ("W1", "b1", "W2", "b2")})
        approx = fd(lambda v: mlp_loss_grad(unpack(v), X, y, 1e-4)[0], pack(params))
        worst_mlp = max(worst_mlp, np.linalg.norm(analytic - approx) / np.linalg.norm(approx))

    elapsed = time.perf_counter() - start
    announce(
        4,
        worst_lr < 1e-6 and worst_mlp < 1e-4 and elapsed < 10.0,
        f"worst LR rel err {worst_lr:.2e}, worst MLP rel err {worst_mlp:.2e}, {elapsed:.2f}s",
    )


def _random_manifest(rng, n_corpora):
    records = []
    i = 0
    for c in range(n_corpora):
        corpus = f"C{c}"
        for s in range(int(rng.integers(8, 41))):
            for _ in range(int(rng.integers(2, 10))):
                emotion = ("happy", "neutral", "anger", "sad")[int(rng.integers(0, 4))]
                records.append(UtteranceRecord(f"u{i}", "x.wav", corpus, f"s{s}", emotion))
                i += 1
    return Manifest(records)


def test_criterion_5_split_integrity():
    start = time.perf_counter()
    ok = True
    notes = []
    for trial in range(100):
        rng = np.random.default_rng(5000 + trial)
        manifest = _random_manifest(rng, n_corpora=2)
        labels = valence_labels(manifest)
        target = "C0"
        sub = manifest.subset(target)
        sub_labels = {u: labels[u] for u in sub.ids()}
        a1 = stratified_group_kfold(sub, sub_labels, k=4, seed=trial)
        a2 = stratified_group_kfold(sub, sub_labels, k=4, seed=trial)
        if a1.fold_of != a2.fold_of:
            ok, notes = False, ["non-deterministic assignment"]
            break
        if set(a1.fold_of) != set(sub.ids()):
            ok, notes = False, ["incomplete coverage"]
            break
        speaker_fold = {}
        for rec in sub.records:
            speaker_fold.setdefault(rec.speaker_id, set()).add(a1.fold_of[rec.utterance_id])
        if any(len(f) != 1 for f in speaker_fold.values()):
            ok, notes = False, ["speaker split across folds"]
            break
        test_union = set()
        for split in self_corpus_splits(a1):
            if split.train_ids & split.test_ids:
                ok, notes = False, ["self split overlap"]
                break
            test_union |= split.test_ids
        if test_union != set(sub.ids()):
            ok, notes = False, ["self splits missed utterances"]
            break
        other = {r.utterance_id for r in manifest.records if r.corpus != target}
        for split in cross_corpus_splits(target, manifest, a1):
            if not other <= split.train_ids or split.train_ids & split.test_ids:
                ok, notes = False, ["cross split leak"]
                break
            if not split.test_ids <= set(sub.ids()):
                ok, notes = False, ["cross test escaped target"]
                break
    elapsed = time.perf_counter() - start
    announce(
        5,
        ok and elapsed < 5.0,
        f"100 seeded manifests clean ({elapsed:.2f}s)" if ok else f"{notes[0]} at trial {trial}",
    )


def test_criterion_6_self_corpus_end_to_end(e2e_results):
    lr_report, lr_time = e2e_results["self_A_logreg"]
    mlp_report, mlp_time = e2e_results["self_A_mlp"]
    elapsed = lr_time + mlp_time  # first run includes the feature-cache build
    announce(
        6,
        lr_report.mean_uar >= 0.90 and mlp_report.mean_uar >= 0.90 and elapsed < 120.0,
        f"LR UAR={lr_report.mean_uar:.4f}, MLP UAR={mlp_report.mean_uar:.4f}, {elapsed:.1f}s",
    )


def test_criterion_7_generalization_gap(e2e_results):
    self_b, t1 = e2e_results["self_B_logreg"]
    cross_b, t2 = e2e_results["cross_B_logreg"]
    elapsed = t1 + t2
    announce(
        7,
        cross_b.mean_uar <= self_b.mean_uar and elapsed < 300.0,
        f"self UAR={self_b.mean_uar:.4f} >= cross UAR={cross_b.mean_uar:.4f}"
        f" on the +80 Hz shifted target, {elapsed:.1f}s",
    )


def test_criterion_8_report_fidelity():
    def stub(mean, preset, mode):
        return EvalReport(
            config={"model": "logreg", "preset": preset, "mode": mode, "target": "smallset"},
            fold_uars=[mean] * 4, mean_uar=mean, confusions=[[[1, 0], [0, 1]]] * 4,
            chosen_hypers=[{"l2": 0.001}] * 4, seeds={"master": 0, "folds": []},
            wall_clock_s=0.0,
        )

    text = render_tables(
        [stub(0.6484, "compact", "self"), stub(0.5182, "compact", "cross"),
         stub(0.5635, "brute", "self"), stub(0.5757, "brute", "cross")]
    )
    lines = text.splitlines()
    layout_ok = (
        lines[2] == "| Dataset | eGeMAPS-style Self-Corpus | eGeMAPS-style Cross-Corpus |"
        " ComParE-style Self-Corpus | ComParE-style Cross-Corpus |"
        and "| smallset | 64.84 | 51.82 | 56.35 | 57.57 |" in text
    )
    announce(
        8,
        layout_ok and format_pct(0.6484) == "64.84" and format_pct(0.81525) == "81.53",
        f"cell(0.6484)={format_pct(0.6484)}, cell(0.81525)={format_pct(0.81525)}, table rows ok",
    )


def test_criterion_9_determinism(corpus_manifest, e2e_results):
    def strip(report):
        d = report.to_dict()
        d.pop("wall_clock_s")
        return d

    identical = True
    for name, config in _configs(corpus_manifest).items():
        again = _run(config)
        if strip(again) != strip(e2e_results[name][0]):
            identical = False
            break
    announce(
        9,
        identical,
        "re-running all end-to-end configs with the same master seed reproduced"
        " every report field except wall-clock",
    )
