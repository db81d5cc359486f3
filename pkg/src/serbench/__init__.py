"""Speech-emotion-recognition benchmark library.

Standardized preprocessing, handcrafted acoustic features (compact and
brute-force presets), speaker-grouped stratified folds, self- and
cross-corpus evaluation with logistic-regression and MLP classifiers, and
UAR / Fleiss-kappa metrics.
"""

from .acoustic_features import (
    FeatureExtractor,
    extract_features,
    extract_llds,
    preset_descriptor,
)
from .audio_io import AudioClip, PreprocessConfig, load_wav, preprocess, resample, save_wav
from .corpus import Manifest, parse_manifest, map_valence, majority_vote, summarize
from .learners import (
    FeatureScaler,
    HyperGrid,
    LogisticRegressionGD,
    MlpClassifier,
    search_hyperparams,
)
from .metrics import confusion_matrix, fleiss_kappa, kappa_interpretation, uar
from .partition import (
    SpeakerStratifiedKFold,
    cross_corpus_splits,
    self_corpus_splits,
    stratified_group_kfold,
)
from .runner import (
    ExperimentConfig,
    EvalReport,
    cache_features,
    generate_synthetic_corpus,
    render_tables,
    run_cross_corpus,
    run_self_corpus,
)

__version__ = "0.1.0"
