"""Deep-and-wide learning: Bayesian dimensionality reduction fused with a small network."""

from .bdr import BdrConfig, BdrModel, Prior, bdr_fit, bdr_project, pca_baseline, pca_fit
from .datasets import Dataset, SplitSpec, load_csv, make_bars, make_blobs, make_lowrank, split
from .dnet import (
    AugmentConfig,
    BdrSource,
    Classification,
    DNetConfig,
    PcaSource,
    Regression,
    TrainConfig,
    dnet_predict,
    dnet_train,
    extract_layer_features,
)
from .metrics import accuracy, adjusted_rand_index, feature_ari, kmeans

__version__ = "0.1.0"
