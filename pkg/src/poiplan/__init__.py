"""Tour-itinerary recommendation from POI check-in trajectories.

Pipeline: ingest check-ins into consolidated trajectories, bootstrap per-POI
visit durations, train a small masked-sequence transformer over (category,
POI) token sentences, then iteratively predict a time-budgeted itinerary
between a source and destination POI. Includes an evaluation harness, a CLI
and an HTTP planning service.
"""

__version__ = "0.1.0"

from .corpus import (
    CheckIn,
    CsvSchema,
    Poi,
    SplitCorpus,
    Trajectory,
    Visit,
    build_trajectories,
    load_checkins,
    load_pois,
    split_corpus,
)
from .durations import (
    BootstrapConfig,
    DurationEstimate,
    bootstrap_estimate,
    estimate_all,
    get_samples,
)
from .evaluation import EvalReport, ScoreRow, epoch_sweep, run_eval, score
from .model import ModelConfig, TrainedModel, UnmaskResult, train, unmask
from .predictor import (
    Itinerary,
    MarkovModel,
    PredictRequest,
    fit_markov,
    predict_itinerary,
    predict_markov,
)
from .sentences import TrainingPair, Vocab, build_vocab, generate_corpus, generate_pairs

__all__ = [
    "__version__",
    "BootstrapConfig",
    "CheckIn",
    "CsvSchema",
    "DurationEstimate",
    "EvalReport",
    "Itinerary",
    "MarkovModel",
    "ModelConfig",
    "Poi",
    "PredictRequest",
    "ScoreRow",
    "SplitCorpus",
    "TrainedModel",
    "TrainingPair",
    "Trajectory",
    "UnmaskResult",
    "Visit",
    "Vocab",
    "bootstrap_estimate",
    "build_trajectories",
    "build_vocab",
    "epoch_sweep",
    "estimate_all",
    "fit_markov",
    "generate_corpus",
    "generate_pairs",
    "get_samples",
    "load_checkins",
    "load_pois",
    "predict_itinerary",
    "predict_markov",
    "run_eval",
    "score",
    "split_corpus",
    "train",
    "unmask",
]
