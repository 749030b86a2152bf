from .config import ConfigError, TaggerConfig, load_config, read_flat_config
from .model import AlignmentError, FeatureConfigMismatch, FeaturizedSentence, TaggerModel, featurize
from .persist import CorruptContainer, FormatVersionMismatch, load, save
from .search import random_search, sample_config
from .train import (
    Example,
    FeatureSource,
    MeanEpochResult,
    NoTrainingData,
    TaggerSystem,
    TrainReport,
    make_examples,
    predict,
    round_half_up,
    train,
    train_with_mean_epoch,
)
from .vocab import Vocab, build_vocab, load_embeddings
