"""Distributional principal autoencoder toolkit.

An encoder-decoder pair trained with an energy-score objective so that the
decoder samples from the conditional distribution of the data given the
embedding, with nested latent dimensions ordered by importance.  Ships with
PCA and ordered-autoencoder baselines, distributional evaluation metrics,
synthetic data generators, and a CLI (``dpa --help``).
"""

from .autodiff import Tape
from .baselines import (ConditionalGaussian, PcaModel, conditional_gaussian,
                        objective_trace_G, ordered_ae_train, pca_fit,
                        pca_reconstruct, pca_transform, psd_sqrt, random_frame)
from .datasets import (Dataset, apply_preprocessing, export_csv, gen_disk,
                       gen_gaussian, import_csv, inverse_preprocess,
                       load_dataset, preprocess, save_dataset, split)
from .metrics import (MetricReport, conditional_energy_loss, conditional_mse,
                      energy_score_terms, evaluate_model, knn_accuracy,
                      marginal_wasserstein1, qq_table,
                      unconditional_energy_distance, write_report_csv)
from .model import (DpaModel, draw_reconstructions, fresh_model, load_model,
                    save_model, zero_fill_latent)
from .networks import Architecture, MlpParams, decode, encode, init_params
from .objective import LatentSchedule, dpa_loss, loss_terms, mask_latent
from .training import TrainConfig, TrainHistory, train

__version__ = "0.1.0"

__all__ = [
    "Architecture", "ConditionalGaussian", "Dataset", "DpaModel",
    "LatentSchedule", "MetricReport", "MlpParams", "PcaModel", "Tape",
    "TrainConfig", "TrainHistory", "apply_preprocessing",
    "conditional_energy_loss", "conditional_gaussian", "conditional_mse",
    "decode", "dpa_loss", "draw_reconstructions", "encode",
    "energy_score_terms", "evaluate_model", "export_csv", "fresh_model",
    "gen_disk", "gen_gaussian", "import_csv", "init_params",
    "inverse_preprocess", "knn_accuracy", "load_dataset", "load_model",
    "loss_terms", "marginal_wasserstein1", "mask_latent",
    "objective_trace_G", "ordered_ae_train", "pca_fit", "pca_reconstruct",
    "pca_transform", "preprocess", "psd_sqrt", "qq_table", "random_frame",
    "save_dataset", "save_model", "split", "train",
    "unconditional_energy_distance", "write_report_csv", "zero_fill_latent",
]
